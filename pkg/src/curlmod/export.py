"""CSV, JSON and SVG writers for trajectories, portraits and stability grids."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .analysis import PhasePortrait
from .floquet import StabilityGrid
from .ode import Trajectory

DIGITS = 12

_COORDS = ("x", "y")


def _fmt(x: float) -> str:
    return format(float(x), f".{DIGITS}g")


def trajectory_columns(traj: Trajectory, labels=(), values=None) -> tuple[list[str], np.ndarray]:
    """Header and data block ``t, x, vx[, y, vy][, invariants...]``."""
    d = traj.d
    if d > len(_COORDS):
        raise ValueError(f"no column names for d={d}")
    header = ["t"]
    cols = [traj.t]
    for i in range(d):
        header += [_COORDS[i], f"v{_COORDS[i]}"]
        cols += [traj.q[:, i], traj.v[:, i]]
    if values is not None:
        values = np.asarray(values, dtype=float).reshape(len(traj), -1)
        if values.shape[1] != len(labels):
            raise ValueError("one label per invariant column is required")
        header += list(labels)
        cols += [values[:, j] for j in range(values.shape[1])]
    return header, np.column_stack(cols)


def _write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}", str(path)) from None
    return path


def table_csv(header, data) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in np.atleast_2d(data):
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def export_table(header, data, path, fmt: str = "csv") -> Path:
    """Write a column table as CSV or as JSON ``{"columns": [...], "data": {...}}``."""
    data = np.asarray(data, dtype=float).reshape(-1, len(header))
    if fmt == "csv":
        return _write_text(path, table_csv(header, data))
    if fmt == "json":
        body = {
            "columns": list(header),
            "data": {h: [None if not math.isfinite(x) else float(x) for x in data[:, j]] for j, h in enumerate(header)},
        }
        return _write_text(path, json.dumps(body) + "\n")
    raise ValueError(f"unknown format {fmt!r}")


def export_csv(traj: Trajectory, invariant_samples=None, path="trajectory.csv", labels=None) -> Path:
    """One row per sample with 12 significant digits.

    ``invariant_samples`` is an ``(n, k)`` array of invariant values; columns
    are named ``I`` for a single invariant and ``I1, I2, ...`` otherwise,
    unless ``labels`` is given.
    """
    if invariant_samples is not None and labels is None:
        k = np.asarray(invariant_samples).reshape(len(traj), -1).shape[1]
        labels = ("I",) if k == 1 else tuple(f"I{j + 1}" for j in range(k))
    header, data = trajectory_columns(traj, labels or (), invariant_samples)
    return export_table(header, data, path, "csv")


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    return header, data


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------

WIDTH, HEIGHT = 480, 360
MARGIN = 56

CLASS_COLORS = {
    "bounded-oscillatory": "#2c7fb8",
    "marginal": "#fdae61",
    "unstable": "#d7191c",
    "out-of-domain": "#d9d9d9",
    "failed": "#252525",
}


def _svg_open(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]


def _axes(xlabel: str, ylabel: str, xlim=None, ylim=None) -> list[str]:
    x0, x1 = MARGIN, WIDTH - 16
    y0, y1 = HEIGHT - MARGIN, 16
    out = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>',
    ]
    if xlim is not None:
        out += [
            f'<text x="{x0}" y="{y0 + 16}" text-anchor="start">{_tick(xlim[0])}</text>',
            f'<text x="{x1}" y="{y0 + 16}" text-anchor="end">{_tick(xlim[1])}</text>',
        ]
    if ylim is not None:
        out += [
            f'<text x="{x0 - 4}" y="{y0}" text-anchor="end">{_tick(ylim[0])}</text>',
            f'<text x="{x0 - 4}" y="{y1 + 8}" text-anchor="end">{_tick(ylim[1])}</text>',
        ]
    return out


def _tick(v: float) -> str:
    return format(v, ".3g")


def _padded(lo: float, hi: float) -> tuple[float, float]:
    if hi > lo:
        return lo, hi
    pad = max(abs(lo), 1.0) * 0.5
    return lo - pad, hi + pad


def svg_polyline(xs, ys, xlabel: str, ylabel: str, title: str = "") -> str:
    """Self-contained line plot; an empty series gives axes and a "no data" note."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    ok = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = xs[ok], ys[ok]
    parts = _svg_open(title or f"{ylabel} vs {xlabel}")
    if xs.size == 0:
        parts += _axes(xlabel, ylabel)
        parts.append(
            f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT / 2:.1f}" text-anchor="middle" fill="gray">no data</text>'
        )
    else:
        xlim = _padded(float(xs.min()), float(xs.max()))
        ylim = _padded(float(ys.min()), float(ys.max()))
        parts += _axes(xlabel, ylabel, xlim, ylim)
        px = MARGIN + (xs - xlim[0]) / (xlim[1] - xlim[0]) * (WIDTH - 16 - MARGIN)
        py = (HEIGHT - MARGIN) - (ys - ylim[0]) / (ylim[1] - ylim[0]) * (HEIGHT - MARGIN - 16)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        parts.append(f'<polyline fill="none" stroke="#1f4e79" stroke-width="1" points="{pts}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_grid(grid: StabilityGrid) -> str:
    """Colored rectangle per sweep cell with a class legend."""
    n1, n2 = grid.classes.shape
    parts = _svg_open(f"stability over ({grid.axis1.name}, {grid.axis2.name})")
    parts += _axes(
        grid.axis1.name, grid.axis2.name,
        (grid.axis1.min, grid.axis1.max), (grid.axis2.min, grid.axis2.max),
    )
    legend_w = 120
    cw = (WIDTH - 16 - MARGIN - legend_w) / n1
    ch = (HEIGHT - MARGIN - 16) / n2
    for i in range(n1):
        for j in range(n2):
            cls = str(grid.classes[i, j])
            x = MARGIN + i * cw
            y = (HEIGHT - MARGIN) - (j + 1) * ch
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw:.2f}" height="{ch:.2f}" '
                f'fill="{CLASS_COLORS.get(cls, "#ffffff")}"><title>{escape(cls)}</title></rect>'
            )
    lx = WIDTH - legend_w
    for k, (cls, color) in enumerate(CLASS_COLORS.items()):
        y = 24 + 18 * k
        parts.append(f'<rect x="{lx}" y="{y - 10}" width="12" height="12" fill="{color}"/>')
        parts.append(f'<text x="{lx + 16}" y="{y}">{escape(cls)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def export_svg(obj, path, title: str = "") -> Path:
    """Write a :class:`PhasePortrait` or :class:`StabilityGrid` as SVG."""
    if isinstance(obj, PhasePortrait):
        name = _COORDS[obj.index] if obj.index < len(_COORDS) else f"q{obj.index}"
        text = svg_polyline(obj.u, obj.udot, name, f"v{name}", title)
    elif isinstance(obj, StabilityGrid):
        text = svg_grid(obj)
    else:
        raise TypeError(f"cannot export {type(obj).__name__} as SVG")
    return _write_text(path, text)
