"""Line-oriented ``key = value`` reports."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .linalg import format_rational


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (Fraction, int, np.integer)):
        return format_rational(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if v is None:
        return "none"
    return str(v)


def format_report(items) -> str:
    """Render ``(key, value)`` pairs (or a dict) one per line."""
    pairs = items.items() if isinstance(items, dict) else items
    return "".join(f"{key} = {format_value(val)}\n" for key, val in pairs)


def parse_report(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if " = " in line:
            key, val = line.split(" = ", 1)
            out[key.strip()] = val.strip()
    return out
