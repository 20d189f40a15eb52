"""
Deterministic SVG drawings of maps: a single period, overlaid periods with
an opacity ramp, and per-object trajectories. One-dimensional maps are drawn
on a horizontal line scale.
"""
from xml.sax.saxutils import escape

import numpy as np

from .core import as_configuration, as_mask
from .errors import ConfigError

WIDTH = 640
HEIGHT = 640
MARGIN = 60
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
           "#bcbd22", "#17becf"]
DEFAULT_COLOR = "#1f77b4"
RADIUS = 5.0
MIN_RADIUS, MAX_RADIUS = 3.0, 14.0


def _num(x):
    return f"{x:.2f}"


class _Canvas:
    """Maps data coordinates to pixels with equal scaling on both axes."""

    def __init__(self, points, d):
        pts = np.asarray(points, dtype=float).reshape(-1, d)
        self.d = d
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        usable = min(WIDTH, HEIGHT) - 2 * MARGIN
        self.scale = usable / float(span.max())
        self.center = (lo + hi) / 2

    def xy(self, p):
        x = WIDTH / 2 + (p[0] - self.center[0]) * self.scale
        if self.d == 1:
            return x, HEIGHT / 2
        return x, HEIGHT / 2 - (p[1] - self.center[1]) * self.scale


def _header(title):
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" '
        'orient="auto-start-reverse"><path d="M 0 0 L 10 5 L 0 10 z" fill="#555555"/></marker></defs>',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]
    if title:
        lines.append(f'<text class="title" x="{WIDTH / 2:.2f}" y="24.00" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="16">{escape(str(title))}</text>')
    return lines


def _scale_line(lines, canvas):
    if canvas.d == 1:
        y = _num(HEIGHT / 2)
        lines.append(f'<line class="scale" x1="{_num(MARGIN)}" y1="{y}" x2="{_num(WIDTH - MARGIN)}" y2="{y}" '
                     'stroke="#999999" stroke-width="1"/>')


def _colors(color, n):
    if color is None:
        return [DEFAULT_COLOR] * n
    color = list(color)
    if len(color) != n:
        raise ConfigError(f"{len(color)} color values for {n} objects")
    levels = sorted({str(c) for c in color})
    lookup = {c: PALETTE[k % len(PALETTE)] for k, c in enumerate(levels)}
    return [lookup[str(c)] for c in color]


def _radii(size, n):
    if size is None:
        return [RADIUS] * n
    size = np.asarray(size, dtype=float)
    if size.shape != (n,):
        raise ConfigError(f"{size.size} size values for {n} objects")
    if np.any(size < 0) or not np.all(np.isfinite(size)):
        raise ConfigError("sizes must be finite and nonnegative")
    root = np.sqrt(size)
    top = root.max()
    rel = root / top if top > 0 else np.ones(n)
    return list(MIN_RADIUS + rel * (MAX_RADIUS - MIN_RADIUS))


def _labels(labels, n):
    if labels is None:
        return [str(i) for i in range(n)]
    labels = [str(label) for label in labels]
    if len(labels) != n:
        raise ConfigError(f"{len(labels)} labels for {n} objects")
    return labels


def _point(lines, xy, r, fill, opacity=1.0):
    lines.append(f'<circle class="point" cx="{_num(xy[0])}" cy="{_num(xy[1])}" r="{_num(r)}" '
                 f'fill="{fill}" fill-opacity="{opacity:.3f}" stroke="#333333" stroke-width="0.5"/>')


def _text(lines, xy, text, r, cls="label", size=11):
    lines.append(f'<text class="{cls}" x="{_num(xy[0] + r + 2)}" y="{_num(xy[1] - r - 2)}" '
                 f'font-family="sans-serif" font-size="{size}">{escape(text)}</text>')


def _prepare(X, mask):
    X = as_configuration(X)
    if X.shape[2] > 2:
        raise ConfigError(f"can only draw 1- or 2-dimensional maps, got d={X.shape[2]}")
    mask = as_mask(mask, *X.shape[:2]) if mask is not None else None
    present = np.ones(X.shape[:2], dtype=bool) if mask is None else mask.astype(bool)
    return X, present


def draw_map(X, labels=None, included=None, color=None, size=None, title=None):
    """SVG scatter of one configuration ``(n, d)`` with text labels."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ConfigError(f"expected a single configuration (n, d), got shape {X.shape}")
    Xs, present = _prepare(X[None], None)
    n, d = Xs.shape[1:]
    if included is not None:
        included = np.asarray(included)
        if included.shape != (n,) or not np.all(np.isin(included, (0, 1))):
            raise ConfigError(f"included must be a 0/1 vector of length {n}")
        if not included.any():
            raise ConfigError("no object is included")
        present = included.astype(bool)[None]
    labels, fills, radii = _labels(labels, n), _colors(color, n), _radii(size, n)
    canvas = _Canvas(Xs[0][present[0]], d)
    lines = _header(title)
    _scale_line(lines, canvas)
    for i in range(n):
        if present[0, i]:
            xy = canvas.xy(Xs[0, i])
            _point(lines, xy, radii[i], fills[i])
            _text(lines, xy, labels[i], radii[i])
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def draw_dynamic_map(X, labels=None, mask=None, color=None, size=None, transparency_start=0.1,
                     transparency_end=1.0, show_arrows=False, title=None):
    """Overlay all periods; opacity ramps linearly from ``transparency_start``
    in the first period to ``transparency_end`` in the last. Labels are drawn
    at each object's last present position."""
    X, present = _prepare(X, mask)
    n_periods, n, d = X.shape
    labels, fills, radii = _labels(labels, n), _colors(color, n), _radii(size, n)
    canvas = _Canvas(X[present], d)
    opacity = np.linspace(transparency_start, transparency_end, n_periods) if n_periods > 1 \
        else np.array([transparency_end])
    lines = _header(title)
    _scale_line(lines, canvas)
    if show_arrows:
        for t in range(1, n_periods):
            for i in range(n):
                if present[t - 1, i] and present[t, i]:
                    (x1, y1), (x2, y2) = canvas.xy(X[t - 1, i]), canvas.xy(X[t, i])
                    lines.append(f'<line class="arrow" x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" '
                                 f'y2="{_num(y2)}" stroke="#555555" stroke-width="0.8" '
                                 f'stroke-opacity="{opacity[t]:.3f}" marker-end="url(#arrow)"/>')
    for t in range(n_periods):
        for i in range(n):
            if present[t, i]:
                _point(lines, canvas.xy(X[t, i]), radii[i], fills[i], opacity[t])
    for i in range(n):
        last = np.flatnonzero(present[:, i])[-1]
        _text(lines, canvas.xy(X[last, i]), labels[i], radii[i])
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def draw_trajectories(X, labels=None, mask=None, periods=None, color=None, title=None):
    """One polyline per object through its present positions, with a period
    tick at every vertex and the object label at its last position."""
    X, present = _prepare(X, mask)
    n_periods, n, d = X.shape
    labels, fills = _labels(labels, n), _colors(color, n)
    periods = [str(t) for t in (range(n_periods) if periods is None else periods)]
    if len(periods) != n_periods:
        raise ConfigError(f"{len(periods)} period labels for {n_periods} periods")
    canvas = _Canvas(X[present], d)
    lines = _header(title)
    _scale_line(lines, canvas)
    for i in range(n):
        ts = np.flatnonzero(present[:, i])
        pts = [canvas.xy(X[t, i]) for t in ts]
        if len(pts) > 1:
            path = " ".join(f"{_num(x)},{_num(y)}" for x, y in pts)
            lines.append(f'<polyline class="trajectory" points="{path}" fill="none" stroke="{fills[i]}" '
                         'stroke-width="1.5"/>')
        for t, xy in zip(ts, pts):
            lines.append(f'<text class="tick" x="{_num(xy[0])}" y="{_num(xy[1] + 12)}" font-family="sans-serif" '
                         f'font-size="8" text-anchor="middle">{escape(periods[t])}</text>')
        _point(lines, pts[-1], RADIUS, fills[i])
        _text(lines, pts[-1], labels[i], RADIUS)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
