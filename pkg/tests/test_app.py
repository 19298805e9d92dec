import dataclasses
import json

import pytest

import app
from app import EXIT_CHECK_FAILED, EXIT_INPUT_ERROR, EXIT_OK, run, run_verification
from config import Settings
from model_registry import parse_model
from models.file_chain import load_triple

SETTINGS = Settings(multistart=2, transport_grid=8)


def run_json(capsys, *argv):
    code = run(['--format', 'json', *argv], settings=SETTINGS)
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


def check_names(document):
    return {check['name']: check['passed'] for check in document['checks']}


# ========== REPORTS ==========

def test_certify_json(capsys):
    code, doc = run_json(capsys, 'certify', 'bl(4,2)')
    assert code == EXIT_OK
    assert doc['tool'] == 'ricci-bounds'
    assert doc['command'] == 'certify'
    assert doc['kappa'] == '3/4'
    assert doc['breakdown'] == {'on_diagonal': '1/2', 'triangle': '1/4', 'square': '0', 'kappa': '3/4'}
    assert doc['model']['spec'] == 'bl(4,2)'
    assert doc['model']['triangles'] == 8
    assert all(check_names(doc).values())


def test_certify_text(capsys):
    code = run(['certify', 'complete(4)'], settings=SETTINGS)
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert out.startswith("ricci-bounds certify")
    assert "kappa: 1" in out


def test_certify_without_certificate_fails(capsys):
    code = run(['certify', 'cycle(5)'], settings=SETTINGS)
    captured = capsys.readouterr()
    assert code == EXIT_CHECK_FAILED
    assert captured.out == ""
    assert "error:" in captured.err


def test_gap_and_info(capsys):
    code, doc = run_json(capsys, 'gap', 'cycle(4)')
    assert code == EXIT_OK
    assert doc['spectral_gap'] == pytest.approx(1.0)
    code, doc = run_json(capsys, 'info', 'complete(3)')
    assert code == EXIT_OK
    assert doc['model']['states'] == 3
    assert doc['model']['triangles'] == 1
    assert doc['model']['squares'] == 0
    assert doc['checks'] == []


def test_estimate(capsys):
    code, doc = run_json(capsys, 'estimate', 'complete(3)', '--starts', '2', '--max-iter', '10')
    assert code == EXIT_OK
    assert doc['kappa_estimate'] <= doc['spectral_gap'] + 1e-6
    assert len(doc['diagnostics']) == 2
    assert len(doc['witness']['rho']) == 3
    assert doc['kappa_certified'] == '5/4'
    assert check_names(doc) == {'certified_below_estimate': True, 'estimate_below_gap': True}


def test_estimate_below_certificate_fails(capsys, monkeypatch):
    real_estimate_kappa = app.estimate_kappa

    def broken(triple, options):
        return dataclasses.replace(real_estimate_kappa(triple, options), kappa=-1e8)

    monkeypatch.setattr(app, 'estimate_kappa', broken)
    code, doc = run_json(capsys, 'estimate', 'bl(5,2)', '--starts', '2', '--max-iter', '5')
    assert code == EXIT_CHECK_FAILED
    assert check_names(doc) == {'certified_below_estimate': False, 'estimate_below_gap': True}


def test_estimate_without_certificate(capsys):
    code, doc = run_json(capsys, 'estimate', 'cycle(5)', '--starts', '2', '--max-iter', '10')
    assert code == EXIT_OK
    assert doc['kappa_certified'] is None
    assert check_names(doc) == {'estimate_below_gap': True}


def test_inequalities(capsys):
    code, doc = run_json(capsys, 'inequalities', 'bl(4,2)', '--samples', '4')
    assert code == EXIT_OK
    assert doc['kappa_certified'] == '3/4'
    assert doc['alpha_interval'][0] == '3/2'
    assert 'poincare' in check_names(doc)


def test_inequalities_reports_missing_certificate(capsys):
    code, doc = run_json(capsys, 'inequalities', 'cycle(5)', '--samples', '4')
    assert code == EXIT_OK
    assert doc['kappa_certified'] is None
    assert 'certificate_unavailable' in doc


def test_transport(capsys):
    code, doc = run_json(capsys, 'transport', 'complete(3)', '--grid', '8')
    assert code == EXIT_OK
    assert len(doc['pairs']) == 1
    assert doc['pairs'][0]['w_upper'] > 0
    assert check_names(doc) == {'continuity_residual[0]': True}


def test_transport_with_certified_kappa(capsys):
    code, doc = run_json(capsys, 'transport', 'complete(3)', '--grid', '8', '--kappa', 'auto', '--pairs', '2')
    assert code in (EXIT_OK, EXIT_CHECK_FAILED)
    assert doc['kappa'] == '5/4'
    names = check_names(doc)
    assert names['continuity_residual[0]'] and names['continuity_residual[1]']
    assert {'convexity[0]', 'convexity[1]'} <= set(names)


def test_counterexample(capsys):
    code, doc = run_json(capsys, 'counterexample', '--eps', '0.01,0.1,1e-6')
    assert code == EXIT_OK
    assert 'model' not in doc
    assert [point['eps'] for point in doc['sweep']] == [0.1, 0.01, 1e-6]
    assert all(check_names(doc).values())


def test_counterexample_text_table(capsys):
    code = run(['counterexample', '--eps', '0.1,0.01'], settings=SETTINGS)
    lines = capsys.readouterr().out.splitlines()
    assert code == EXIT_OK
    start = lines.index('sweep')
    assert lines[start + 1] == '-----'
    assert lines[start + 2].split() == ['eps', 'A', 'B_off', 'ratio']
    assert lines[start + 4].split()[0] == '0.1'
    assert lines[start + 5].split()[0] == '0.01'
    assert not any(line.startswith('sweep:') for line in lines)


def test_certify_text_breakdown_table(capsys):
    code = run(['certify', 'bl(4,2)'], settings=SETTINGS)
    lines = capsys.readouterr().out.splitlines()
    assert code == EXIT_OK
    start = lines.index('breakdown')
    assert lines[start + 2].split() == ['term', 'value']
    assert ['on_diagonal', '1/2'] in [line.split() for line in lines[start + 3:]]
    assert ['triangle', '1/4'] in [line.split() for line in lines[start + 3:]]


def test_export_round_trip(capsys, tmp_path):
    out = tmp_path / "bl.json"
    code, doc = run_json(capsys, 'export', 'bl(4,2)', '--out', str(out), '--as', 'json')
    assert code == EXIT_OK
    assert doc['format'] == 'json'
    assert load_triple(out).size == 6
    code, doc = run_json(capsys, 'gap', f'file:{out}')
    assert code == EXIT_OK
    assert doc['spectral_gap'] == pytest.approx(1.0)


# ========== VERIFY ==========

@pytest.mark.parametrize("spec", ["cycle(4)", "bl(4,2)", "rt(3)"])
def test_verify_passes(capsys, spec):
    code, doc = run_json(capsys, 'verify', spec, '--samples', '3')
    assert code == EXIT_OK, [c for c in doc['checks'] if not c['passed']]
    names = check_names(doc)
    for name in ('generator_self_adjoint', 'simplified_b_matches_direct_b', 'certificate_valid',
                 'square_identity', 'relabel_invariant_certificate'):
        assert names[name]


def test_verify_without_certificate():
    built = parse_model("cycle(5)")
    payload, checks = run_verification(built, samples=3, seed=1)
    assert payload['kappa_certified'] is None
    assert 'certificate_valid' not in {c.name for c in checks}
    assert all(c.passed for c in checks)


def test_verify_rejects_large_models(capsys):
    assert run(['verify', 'rt(7)'], settings=SETTINGS) == EXIT_INPUT_ERROR


# ========== INPUT ERRORS ==========

@pytest.mark.parametrize("argv", [
    ['certify', 'foo(1)'],
    ['certify', 'bl(4,5)'],
    ['counterexample', '--eps', 'small'],
    ['counterexample', '--eps', '0.1,2'],
    ['transport', 'complete(3)', '--kappa', 'big'],
    ['launch', 'bl(4,2)'],
    [],
])
def test_input_errors(capsys, argv):
    assert run(argv, settings=SETTINGS) == EXIT_INPUT_ERROR


def test_version(capsys):
    assert run(['--version'], settings=SETTINGS) == EXIT_OK
    assert "ricci-bounds 0.1.0" in capsys.readouterr().out
