"""Deterministic text serialization helpers.

All real numbers leaving the package (model JSON, report CSVs, SVG
coordinates) go through these formatters so that identical values always
produce identical bytes, regardless of platform or thread count.
"""

from __future__ import annotations

import math

# 17 significant digits: the smallest count that round-trips every float64.
_REAL_FMT = "%.17g"


def fmt_real(x: float) -> str:
    """Format a finite real with 17 significant digits.

    NaN is the undefined-ratio marker throughout the package and serializes
    to the empty string so CSV consumers cannot mistake it for a number.
    """
    if isinstance(x, float) and math.isnan(x):
        return ""
    return _REAL_FMT % float(x)


def fmt_cell(value) -> str:
    """Format one CSV cell: ints verbatim, reals at 17 digits, None/NaN empty."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        raise TypeError("ambiguous cell type: bool")
    if isinstance(value, int):
        return str(value)
    return fmt_real(value)


def write_csv(path, header: list[str], rows) -> None:
    """Write a CSV with LF newlines and deterministic cell formatting."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_cell(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
