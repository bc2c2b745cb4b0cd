"""Delimited report output.

Layout is fixed: one comment line carrying the scenario hash and seeds,
then the header row, then data rows. Floats print with 12 significant
digits, booleans as true/false, and nothing carries a timestamp, so the
same command always produces byte-identical output.
"""

from __future__ import annotations

import math
import os
import sys
from pathlib import Path

OUTPUT_ENV = "FAIRSLOT_OUT"


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int,)):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".12g")
    return str(value)


def render_report(header, rows, comment):
    lines = [f"# {comment}"]
    lines.append(",".join(header))
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row width does not match the header")
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def resolve_output_path(path):
    """Apply the output-directory override to relative paths.

    Absolute paths and None (stdout) pass through; relative paths are
    joined under $FAIRSLOT_OUT when it is set.
    """
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def write_report(header, rows, comment, path=None):
    """Render and deliver a report; returns the resolved path (or None
    for stdout)."""
    text = render_report(header, rows, comment)
    target = resolve_output_path(path)
    if target is None:
        sys.stdout.write(text)
        return None
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text)
    return target
