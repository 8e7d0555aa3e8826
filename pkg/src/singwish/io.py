"""Atomic file output, CSV/JSON formatting and the overlay SVG."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    return f"{float(value):.17g}"


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows) -> str:
    lines = [",".join(header)] if header else []
    for row in rows:
        lines.append(",".join(fmt(v) for v in np.atleast_1d(row)))
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows) -> Path:
    return atomic_write_text(path, csv_text(header, rows))


def read_vectors_csv(path) -> np.ndarray:
    """Numeric rows of a CSV; comment lines and a non-numeric header are skipped."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                if rows:
                    raise
    if not rows:
        raise ValueError(f"{path}: no numeric rows")
    return np.array(rows, dtype=float)


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json_text(obj))


def overlay_svg(grid, dashed, solid, width: int = 480, height: int = 320, title: str = "") -> str:
    """Two curves on shared axes: ``dashed`` (estimate) over ``solid`` (reference)."""
    grid = np.asarray(grid, dtype=float)
    ys = np.concatenate([np.asarray(dashed, float), np.asarray(solid, float)])
    pad = 40
    x0, x1 = float(grid[0]), float(grid[-1])
    y1 = float(ys.max()) * 1.05 or 1.0

    def pts(y):
        px = pad + (grid - x0) / (x1 - x0) * (width - 2 * pad)
        py = height - pad - np.asarray(y, float) / y1 * (height - 2 * pad)
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))

    axis_y = height - pad
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{axis_y}" x2="{width - pad}" y2="{axis_y}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{axis_y}" stroke="black"/>',
        f'<text x="{pad}" y="{axis_y + 16}" font-size="11">{x0:g}</text>',
        f'<text x="{width - pad}" y="{axis_y + 16}" font-size="11" text-anchor="end">{x1:g}</text>',
        f'<text x="{pad - 4}" y="{pad}" font-size="11" text-anchor="end">{y1:.2f}</text>',
        f'<text x="{width / 2}" y="{pad / 2}" font-size="12" text-anchor="middle">{title}</text>',
        f'<polyline fill="none" stroke="black" stroke-width="1.5" points="{pts(solid)}"/>',
        f'<polyline fill="none" stroke="black" stroke-width="1.5" stroke-dasharray="6,4" points="{pts(dashed)}"/>',
        "</svg>",
    ]) + "\n"
