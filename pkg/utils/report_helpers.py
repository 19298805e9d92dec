"""Formatting helpers for report documents (JSON-ready values and plain-text rendering)."""
import dataclasses
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np

SIGNIFICANT_DIGITS = 9


def format_float(value: float) -> str:
    """Float with 9 significant digits.

    Args:
        value: Number to format

    Returns:
        Text such as '0.666666667'
    """
    return f"{float(value):.{SIGNIFICANT_DIGITS}g}"


def format_rational(value: Fraction) -> str:
    """Exact rational as 'p/q' ('p' for integers)."""
    return str(Fraction(value))


def to_jsonable(value: Any) -> Any:
    """Convert report values into JSON-compatible data.

    Fractions become 'p/q' strings, floats are rounded to 9 significant
    digits, arrays become lists and dataclasses / named tuples become dicts.
    """
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not np.isfinite(value):
            return None
        return float(format_float(value))
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, tuple) and hasattr(value, '_asdict'):
        return {k: to_jsonable(v) for k, v in value._asdict().items()}
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def styled_header(text: str, level: int = 1) -> str:
    """Underlined header ('=' for level 1, '-' below)."""
    rule = "=" if level == 1 else "-"
    return f"{text}\n{rule * len(text)}"


def status_line(message: str, passed: bool) -> str:
    return f"[{'PASS' if passed else 'FAIL'}] {message}"


def create_table(headers: List[str], rows: List[List[Any]]) -> str:
    """Left-aligned text table.

    Args:
        headers: Column titles
        rows: Cell values; floats are shown with 9 significant digits

    Returns:
        Table text
    """
    def cell(value):
        if isinstance(value, (float, np.floating)):
            return format_float(value)
        if isinstance(value, Fraction):
            return format_rational(value)
        return str(value)

    body = [[cell(v) for v in row] for row in rows]
    widths = [max([len(h)] + [len(r[i]) for r in body]) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in body]
    return "\n".join(lines)


def render_text(document: dict, tables: Optional[Dict[str, str]] = None) -> str:
    """Plain-text rendering of a JSON-ready report document.

    Args:
        document: Report document (see to_jsonable)
        tables: Pre-rendered tables keyed by the document field they replace
    """
    tables = tables or {}
    lines = [styled_header(f"{document.get('tool', 'report')} {document.get('command', '')}".strip())]

    def walk(value, indent):
        pad = "  " * indent
        if isinstance(value, dict):
            for key, item in value.items():
                if isinstance(item, (dict, list)) and item:
                    lines.append(f"{pad}{key}:")
                    walk(item, indent + 1)
                else:
                    lines.append(f"{pad}{key}: {_scalar(item)}")
        elif isinstance(value, list):
            for item in value:
                if isinstance(item, dict):
                    lines.append(f"{pad}-")
                    walk(item, indent + 1)
                else:
                    lines.append(f"{pad}- {_scalar(item)}")

    skipped = {'tool', 'command', 'checks', *tables}
    walk({k: v for k, v in document.items() if k not in skipped}, 0)
    for name, table in tables.items():
        lines.append("")
        lines.append(styled_header(name, level=2))
        lines.append(table)
    checks = document.get('checks') or []
    if checks:
        lines.append("")
        lines.append(styled_header("checks", level=2))
        for check in checks:
            residual = check.get('residual')
            suffix = f" (residual {_scalar(residual)})" if residual is not None else ""
            lines.append(status_line(f"{check['name']}{suffix}", check['passed']))
    return "\n".join(lines)


def _scalar(value: Any) -> str:
    if isinstance(value, float):
        return format_float(value)
    if value is None:
        return "-"
    if isinstance(value, list) and not value:
        return "[]"
    if isinstance(value, dict) and not value:
        return "{}"
    return str(value)
