"""SVG 1.1 plots: density maps and cell-centre trajectories.

Written as plain text so identical inputs give byte-identical files.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np

from .records import SnapshotRecord, TrajectoryRecord

WHITE = (255, 255, 255)
DARK = (8, 48, 107)
# time scale stops at 0, 1/3, 2/3 and 1 of the duration
TIME_STOPS = ((255, 255, 0), (0, 255, 0), (0, 255, 255), (0, 0, 255))
MIN_WIDTH = 0.5
MAX_WIDTH = 4.0
PLOT_WIDTH = 600.0
PAD = 10.0


def _hex(rgb) -> str:
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _mix(a, b, s: float):
    return tuple(ca + (cb - ca) * s for ca, cb in zip(a, b))


def density_color(rho: float, rho_jam: float) -> str:
    """Linear ramp from white at 0 to dark blue at ``rho_jam`` (clamped)."""
    s = min(max(rho / rho_jam, 0.0), 1.0)
    return _hex(_mix(WHITE, DARK, s))


def time_color(t: float, duration: float) -> str:
    """Yellow -> green -> cyan -> blue over ``[0, duration]``."""
    s = 0.0 if duration <= 0 else min(max(t / duration, 0.0), 1.0)
    pos = s * (len(TIME_STOPS) - 1)
    k = min(int(pos), len(TIME_STOPS) - 2)
    return _hex(_mix(TIME_STOPS[k], TIME_STOPS[k + 1], pos - k))


def stroke_width(n: float, n_max: float) -> float:
    if n_max <= 1.0:
        return MIN_WIDTH
    s = min(max((n - 1.0) / (n_max - 1.0), 0.0), 1.0)
    return MIN_WIDTH + (MAX_WIDTH - MIN_WIDTH) * s


class _Frame:
    """World-to-pixel map with y pointing up in the world."""

    def __init__(self, xs, ys):
        self.x0, self.x1 = float(np.min(xs)), float(np.max(xs))
        self.y0, self.y1 = float(np.min(ys)), float(np.max(ys))
        span = max(self.x1 - self.x0, self.y1 - self.y0, 1e-9)
        self.scale = PLOT_WIDTH / span
        self.width = (self.x1 - self.x0) * self.scale + 2 * PAD
        self.height = (self.y1 - self.y0) * self.scale + 2 * PAD

    def __call__(self, x: float, y: float) -> str:
        px = PAD + (x - self.x0) * self.scale
        py = PAD + (self.y1 - y) * self.scale
        return f"{px:.3f},{py:.3f}"


def _header(width: float, height: float, title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.3f} {height:.3f}">',
        f"<title>{title}</title>",
    ]


def render_density_svg(snapshot: Sequence[SnapshotRecord], triangles: np.ndarray, rho_jam: float,
                       title: str = "density") -> str:
    """Filled mesh coloured by cell density with a legend bar.

    ``triangles`` has shape ``(n_cells, 3, 2)`` in the order of cell ids.
    Empty cells are drawn unfilled.
    """
    tri = np.asarray(triangles, dtype=float).reshape(-1, 3, 2)
    dens = {r.cell_id: r.density for r in snapshot}
    if len(tri):
        frame = _Frame(tri[:, :, 0], tri[:, :, 1])
    else:
        frame = _Frame([0.0, 1.0], [0.0, 1.0])
    legend_h = 40.0
    out = _header(frame.width, frame.height + legend_h, title)
    out.append('<g stroke="#bbbbbb" stroke-width="0.3">')
    for cid, t in enumerate(tri):
        rho = dens.get(cid, 0.0)
        fill = "none" if rho <= 0.0 else density_color(rho, rho_jam)
        pts = " ".join(frame(x, y) for x, y in t)
        out.append(f'<polygon points="{pts}" fill="{fill}"/>')
    out.append("</g>")
    y = frame.height + 5.0
    out.append('<defs><linearGradient id="ramp" x1="0" x2="1" y1="0" y2="0">'
               f'<stop offset="0" stop-color="{_hex(WHITE)}"/><stop offset="1" stop-color="{_hex(DARK)}"/>'
               "</linearGradient></defs>")
    out.append(f'<rect x="{PAD:.3f}" y="{y:.3f}" width="200" height="12" fill="url(#ramp)" stroke="#000000" '
               'stroke-width="0.5"/>')
    out.append(f'<text x="{PAD:.3f}" y="{y + 26:.3f}" font-size="10">0</text>')
    out.append(f'<text x="{PAD + 200:.3f}" y="{y + 26:.3f}" font-size="10" text-anchor="end">'
               f"{rho_jam:g} /m2</text>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_trajectories_svg(records: Iterable[TrajectoryRecord], duration: float,
                            title: str = "trajectories") -> str:
    """Cell-centre paths per ``(epoch, cell_id)``.

    Each segment is coloured by its mid time and sized by its mean count;
    paths that never move are drawn as dots.
    """
    paths: dict[tuple[int, int], list[TrajectoryRecord]] = defaultdict(list)
    recs = sorted(records, key=lambda r: (r.epoch, r.cell_id, r.time))
    for r in recs:
        paths[(r.epoch, r.cell_id)].append(r)
    if recs:
        frame = _Frame([r.cx for r in recs], [r.cy for r in recs])
        n_max = max(r.n_peds for r in recs)
    else:
        frame = _Frame([0.0, 1.0], [0.0, 1.0])
        n_max = 1.0
    out = _header(frame.width, frame.height, title)
    out.append('<g stroke-linecap="round" fill="none">')
    for key in sorted(paths):
        pts = paths[key]
        if all(p.cx == pts[0].cx and p.cy == pts[0].cy for p in pts):
            p = pts[0]
            r = 0.5 * stroke_width(max(q.n_peds for q in pts), n_max)
            cx, cy = frame(p.cx, p.cy).split(",")
            out.append(f'<circle cx="{cx}" cy="{cy}" r="{r:.3f}" fill="{time_color(p.time, duration)}" stroke="none"/>')
            continue
        for a, b in zip(pts, pts[1:]):
            w = stroke_width(0.5 * (a.n_peds + b.n_peds), n_max)
            c = time_color(0.5 * (a.time + b.time), duration)
            (x1, y1), (x2, y2) = frame(a.cx, a.cy).split(","), frame(b.cx, b.cy).split(",")
            out.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="{c}" stroke-width="{w:.3f}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
