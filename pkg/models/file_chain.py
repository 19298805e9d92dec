"""Reading and writing Markov triples as files.

Two formats are supported:

* text edge list: ``x y rate`` lines, ``pi x weight`` lines and ``#`` comments
* JSON document: ``{"states": [...], "rates": [[x, y, q], ...], "weights": {x: w}}``

State labels are read back as strings. Numbers are written with ``repr`` so
a dump followed by a load reproduces the chain exactly.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

from errors import ModelSpecError
from markov import MarkovTriple, build_triple

logger = logging.getLogger(__name__)

FORMATS = ('text', 'json')


def _number(token: str, path: Path, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ModelSpecError(f"{path}:{lineno}: {token!r} is not a number")


def _parse_text(path: Path, text: str):
    states: List[str] = []
    seen = set()
    rates: List[Tuple[str, str, float]] = []
    weights: Dict[str, float] = {}

    def note(label):
        if label not in seen:
            seen.add(label)
            states.append(label)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ModelSpecError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}: {raw.strip()!r}")
        if parts[0] == 'pi':
            if parts[1] in weights:
                raise ModelSpecError(f"{path}:{lineno}: duplicate weight for state {parts[1]!r}")
            note(parts[1])
            weights[parts[1]] = _number(parts[2], path, lineno)
        else:
            note(parts[0])
            note(parts[1])
            rates.append((parts[0], parts[1], _number(parts[2], path, lineno)))
    return states, rates, weights


def _parse_json(path: Path, text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelSpecError(f"{path}: invalid JSON ({e})")
    if not isinstance(doc, dict) or not {'states', 'rates', 'weights'} <= set(doc):
        raise ModelSpecError(f"{path}: expected an object with 'states', 'rates' and 'weights'")
    states = [str(s) for s in doc['states']]
    try:
        rates = [(str(x), str(y), float(q)) for x, y, q in doc['rates']]
        weights = {str(x): float(w) for x, w in doc['weights'].items()}
    except (TypeError, ValueError) as e:
        raise ModelSpecError(f"{path}: malformed rates or weights ({e})")
    return states, rates, weights


def load_triple(path: Union[str, Path]) -> MarkovTriple:
    """Load a triple from an edge-list text file or a JSON document (by suffix).

    Raises:
        ModelSpecError: If the file is missing or cannot be parsed
        TripleValidationError: If the content is not a valid reversible chain
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ModelSpecError(f"cannot read chain file {path}: {e.strerror or e}")
    parser = _parse_json if path.suffix.lower() == '.json' else _parse_text
    states, rates, weights = parser(path, text)
    logger.info("Loaded %s: %s states, %s rate entries", path, len(states), len(rates))
    return build_triple(states, rates, weights, name=f"file:{path}")


def dump_triple(t: MarkovTriple, path: Union[str, Path], fmt: str = 'text') -> Path:
    """Write a triple so that ``load_triple`` reproduces it.

    Raises:
        ModelSpecError: For an unknown format or state labels that collide as text
    """
    if fmt not in FORMATS:
        raise ModelSpecError(f"unknown export format {fmt!r}; use one of {FORMATS}")
    path = Path(path)
    labels = [t.label(x) for x in range(t.size)]
    if len(set(labels)) != len(labels):
        raise ModelSpecError(f"state labels of {t.name or 'chain'} are not unique as text")

    pairs = [(labels[x], labels[y], float(q)) for x, y, q in zip(t.sources, t.targets, t.rates)]
    if fmt == 'json':
        doc = {
            'states': labels,
            'rates': [[x, y, q] for x, y, q in pairs],
            'weights': {label: float(w) for label, w in zip(labels, t.pi)},
        }
        path.write_text(json.dumps(doc, indent=2), encoding='utf-8')
    else:
        lines = [f"# {t.name or 'chain'}: {t.size} states, {len(t.edges)} edges"]
        lines += [f"pi {label} {float(w)!r}" for label, w in zip(labels, t.pi)]
        lines += [f"{x} {y} {q!r}" for x, y, q in pairs]
        path.write_text("\n".join(lines) + "\n", encoding='utf-8')
    logger.info("Exported %s to %s (%s)", t.name, path, fmt)
    return path
