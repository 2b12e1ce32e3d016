"""Self-contained SVG figures: space-time heatmaps, line plots and scatter plots.

Heatmaps are embedded as base64 PNG images, so the files need nothing
beyond a browser to view.
"""
from __future__ import annotations

import base64
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

# perceptually ordered anchors (dark blue to yellow)
_CMAP = np.array([
    [0.267, 0.005, 0.329], [0.283, 0.141, 0.458], [0.254, 0.265, 0.530],
    [0.207, 0.372, 0.553], [0.164, 0.471, 0.558], [0.128, 0.567, 0.551],
    [0.135, 0.659, 0.518], [0.267, 0.749, 0.441], [0.478, 0.821, 0.318],
    [0.741, 0.873, 0.150], [0.993, 0.906, 0.144],
])
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#7f7f7f")

W, H = 640, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50


def colormap(values, vmin=None, vmax=None) -> np.ndarray:
    """Map an array to uint8 RGB."""
    v = np.asarray(values, dtype=float)
    lo = np.nanmin(v) if vmin is None else vmin
    hi = np.nanmax(v) if vmax is None else vmax
    t = np.clip((v - lo) / (hi - lo if hi > lo else 1.0), 0.0, 1.0)
    t = np.nan_to_num(t)
    pos = t * (len(_CMAP) - 1)
    i = np.minimum(pos.astype(int), len(_CMAP) - 2)
    f = (pos - i)[..., None]
    rgb = _CMAP[i] * (1 - f) + _CMAP[i + 1] * f
    return (rgb * 255 + 0.5).astype(np.uint8)


def png_bytes(rgb: np.ndarray) -> bytes:
    """Encode an (h, w, 3) uint8 array as PNG."""
    h, w, _ = rgb.shape
    raw = b"".join(b"\x00" + rgb[r].tobytes() for r in range(h))

    def chunk(tag, data):
        return (struct.pack(">I", len(data)) + tag + data
                + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF))

    return (b"\x89PNG\r\n\x1a\n"
            + chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0))
            + chunk(b"IDAT", zlib.compress(raw, 9))
            + chunk(b"IEND", b""))


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10)), key=lambda s: abs(s - raw))
    start = np.ceil(lo / step) * step
    return [round(t, 10) for t in np.arange(start, hi + 1e-9 * step, step)]


def _fmt(v):
    return f"{v:.4g}"


@dataclass
class Axes:
    xlim: tuple
    ylim: tuple
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    body: list = field(default_factory=list)

    def sx(self, x):
        x0, x1 = self.xlim
        return LEFT + (np.asarray(x, float) - x0) / (x1 - x0) * (W - LEFT - RIGHT)

    def sy(self, y):
        y0, y1 = self.ylim
        return H - BOTTOM - (np.asarray(y, float) - y0) / (y1 - y0) * (H - TOP - BOTTOM)

    def line(self, x, y, color="#000", width=1.5, dash=None, label=None):
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        # break the polyline at gaps
        runs, cur = [], []
        for px, py, good in zip(self.sx(x), self.sy(y), ok):
            if good:
                cur.append(f"{px:.2f},{py:.2f}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        style = f' stroke-dasharray="{dash}"' if dash else ""
        for r in runs:
            self.body.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{style} '
                             f'points="{" ".join(r)}"/>')
        if label:
            self._legend.append((label, color, dash, "line"))

    def scatter(self, x, y, color="#000", r=2.5, label=None):
        for px, py in zip(self.sx(x), self.sy(y)):
            if np.isfinite(px) and np.isfinite(py):
                self.body.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="{r}" fill="{color}"/>')
        if label:
            self._legend.append((label, color, None, "dot"))

    def image(self, rgb):
        data = base64.b64encode(png_bytes(rgb)).decode()
        x, y = LEFT, TOP
        w, h = W - LEFT - RIGHT, H - TOP - BOTTOM
        self.body.append(f'<image x="{x}" y="{y}" width="{w}" height="{h}" preserveAspectRatio="none" '
                         f'style="image-rendering:pixelated" href="data:image/png;base64,{data}"/>')

    def __post_init__(self):
        self._legend = []

    def render(self) -> str:
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
               f'<rect width="{W}" height="{H}" fill="white"/>',
               f'<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" '
               f'height="{H - TOP - BOTTOM}"/></clipPath>',
               '<g clip-path="url(#plot)">']
        out += self.body
        out.append("</g>")
        out.append(f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" height="{H - TOP - BOTTOM}" '
                   'fill="none" stroke="#000"/>')
        for t in _ticks(*self.xlim):
            px = float(self.sx(t))
            out.append(f'<line x1="{px:.2f}" y1="{H - BOTTOM}" x2="{px:.2f}" y2="{H - BOTTOM + 5}" stroke="#000"/>')
            out.append(f'<text x="{px:.2f}" y="{H - BOTTOM + 18}" text-anchor="middle">{_fmt(t)}</text>')
        for t in _ticks(*self.ylim):
            py = float(self.sy(t))
            out.append(f'<line x1="{LEFT - 5}" y1="{py:.2f}" x2="{LEFT}" y2="{py:.2f}" stroke="#000"/>')
            out.append(f'<text x="{LEFT - 8}" y="{py + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
        out.append(f'<text x="{(LEFT + W - RIGHT) / 2}" y="{H - 12}" text-anchor="middle">'
                   f'{escape(self.xlabel)}</text>')
        out.append(f'<text transform="translate(16,{(TOP + H - BOTTOM) / 2}) rotate(-90)" '
                   f'text-anchor="middle">{escape(self.ylabel)}</text>')
        if self.title:
            out.append(f'<text x="{W / 2}" y="{TOP - 10}" text-anchor="middle" font-size="14">'
                       f'{escape(self.title)}</text>')
        for i, (label, color, dash, kind) in enumerate(self._legend):
            y = TOP + 16 + 16 * i
            x = W - RIGHT - 150
            if kind == "line":
                style = f' stroke-dasharray="{dash}"' if dash else ""
                out.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 24}" y2="{y - 4}" stroke="{color}" '
                           f'stroke-width="2"{style}/>')
            else:
                out.append(f'<circle cx="{x + 12}" cy="{y - 4}" r="3" fill="{color}"/>')
            out.append(f'<text x="{x + 30}" y="{y}">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path):
        Path(path).write_text(self.render())


def _limits(arrays, pad=0.05):
    vals = np.concatenate([np.ravel(np.asarray(a, float)) for a in arrays])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return (0.0, 1.0)
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        return (lo - 1.0, hi + 1.0)
    d = (hi - lo) * pad
    return (lo - d, hi + d)


def line_plot(path, x, series, xlabel="", ylabel="", title="", dashes=None):
    """``series`` maps a label to y values sampled at ``x`` (or an (x, y) pair)."""
    items = []
    for label, ys in series.items():
        xs, ys = ys if isinstance(ys, tuple) else (x, ys)
        items.append((label, np.asarray(xs, float), np.asarray(ys, float)))
    ax = Axes(_limits([i[1] for i in items], 0.0), _limits([i[2] for i in items]),
              xlabel, ylabel, title)
    for n, (label, xs, ys) in enumerate(items):
        dash = (dashes or {}).get(label)
        ax.line(xs, ys, COLORS[n % len(COLORS)], dash=dash, label=label)
    ax.save(path)
    return ax


def scatter_plot(path, x, y, xlabel="", ylabel="", title=""):
    ax = Axes(_limits([x]), _limits([y]), xlabel, ylabel, title)
    ax.scatter(x, y, COLORS[0])
    ax.save(path)
    return ax


def heatmap(path, x, t, values, overlays=None, xlabel="x", ylabel="t", title="", max_cells=600):
    """Space-time map of ``values[t, x]`` with optional (x(t), t) overlay curves."""
    values = np.asarray(values, float)
    sx = max(1, values.shape[1] // max_cells)
    st = max(1, values.shape[0] // max_cells)
    img = values[::st, ::sx][::-1]
    ax = Axes((float(x[0]), float(x[-1])), (float(t[0]), float(t[-1])), xlabel, ylabel, title)
    ax.image(colormap(img))
    for n, (label, xs, ts) in enumerate(overlays or []):
        ax.line(xs, ts, "white", width=1.5, dash="4,3" if n % 2 else None)
    ax.save(path)
    return ax
