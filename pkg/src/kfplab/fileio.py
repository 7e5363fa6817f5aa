"""Field snapshots, CSV reports and SVG line plots.

Snapshot layout (all little-endian)::

    b"KFP1"
    uint32 m, nx, ny, nt
    float64 bounds[4m + 2]   (x1a, x1b, ..., y1a, y1b, ..., t0, t1)
    float64 values[...]      C order over (t, y_1..y_m, x_1..x_m)
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path
from typing import Iterable, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .mesh import BoxDomain, Field, build_grid

__all__ = ["MAGIC", "SnapshotError", "snapshot_bytes", "read_snapshot_bytes", "write_snapshot",
           "read_snapshot", "csv_text", "write_csv", "svg_lines", "write_svg"]

MAGIC = b"KFP1"
_HEAD = struct.Struct("<4s4I")


class SnapshotError(ValueError):
    """Malformed snapshot bytes."""


def snapshot_bytes(field: Field) -> bytes:
    g = field.grid
    head = _HEAD.pack(MAGIC, g.m, g.nx, g.ny, g.nt)
    bounds = g.domain.bounds_vector().astype("<f8").tobytes()
    return head + bounds + np.ascontiguousarray(field.values, dtype="<f8").tobytes()


def read_snapshot_bytes(data: bytes) -> Field:
    if len(data) < _HEAD.size or data[:4] != MAGIC:
        raise SnapshotError("not a KFP1 snapshot")
    _, m, nx, ny, nt = _HEAD.unpack_from(data)
    off = _HEAD.size
    nb = 4 * m + 2
    if len(data) < off + 8 * nb:
        raise SnapshotError("truncated header")
    bounds = np.frombuffer(data, "<f8", nb, off)
    off += 8 * nb
    grid = build_grid(BoxDomain.from_bounds_vector(m, bounds), nx, ny, nt)
    if len(data) - off != 8 * grid.size:
        raise SnapshotError(f"expected {grid.size} values, found {(len(data) - off) / 8:g}")
    values = np.frombuffer(data, "<f8", grid.size, off).astype(float).reshape(grid.shape)
    return Field(grid, values)


def write_snapshot(field: Field, path) -> Path:
    path = Path(path)
    path.write_bytes(snapshot_bytes(field))
    return path


def read_snapshot(path) -> Field:
    return read_snapshot_bytes(Path(path).read_bytes())


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (tuple, list, np.ndarray)):
        return " ".join(_cell(x) for x in np.asarray(v, dtype=object).ravel())
    return str(v)


def csv_text(rows: Iterable[dict], columns: Sequence[str]) -> str:
    """CSV with a header row; ``columns`` fixes the order, missing cells are blank.

    Floats are written with ``repr`` (shortest round-trip form) so equal
    inputs give identical text.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        unknown = set(row) - set(columns)
        if unknown:
            raise KeyError(f"row has columns not in the schema: {sorted(unknown)}")
        w.writerow(["" if row.get(c) is None else _cell(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(rows: Iterable[dict], columns: Sequence[str], path) -> Path:
    path = Path(path)
    path.write_text(csv_text(rows, columns), encoding="utf-8", newline="")
    return path


def svg_lines(series: dict, title: str = "", xlabel: str = "", ylabel: str = "", logy: bool = False,
              width: int = 480, height: int = 320) -> str:
    """Polyline plot of ``{label: (xs, ys)}`` with a framed axis box and range labels."""
    pad = 48
    pts = {}
    for label, (xs, ys) in series.items():
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        if logy:
            keep = ys > 0
            xs, ys = xs[keep], np.log10(ys[keep])
        keep = np.isfinite(xs) & np.isfinite(ys)
        pts[label] = (xs[keep], ys[keep])
    allx = np.concatenate([p[0] for p in pts.values()] or [np.zeros(1)])
    ally = np.concatenate([p[1] for p in pts.values()] or [np.zeros(1)])
    if allx.size == 0:
        allx = ally = np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
           'fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle">{escape(title)}</text>',
           f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="12" y="{height / 2:.1f}" transform="rotate(-90 12 {height / 2:.1f})" '
           f'text-anchor="middle">{escape(ylabel)}{" (log10)" if logy else ""}</text>',
           f'<text x="{pad}" y="{height - pad + 16}" text-anchor="middle">{x0:.3g}</text>',
           f'<text x="{width - pad}" y="{height - pad + 16}" text-anchor="middle">{x1:.3g}</text>',
           f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end">{y0:.3g}</text>',
           f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end">{y1:.3g}</text>']
    for i, (label, (xs, ys)) in enumerate(pts.items()):
        c = colours[i % len(colours)]
        line = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{c}" points="{line}"/>')
        out.append(f'<text x="{width - pad + 4}" y="{pad + 14 * (i + 1)}" fill="{c}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(series: dict, path, **kw) -> Optional[Path]:
    """Best effort: returns ``None`` instead of raising on any failure."""
    try:
        path = Path(path)
        path.write_text(svg_lines(series, **kw), encoding="utf-8")
        return path
    except Exception:
        return None
