"""Dependency-free SVG overlay plots.

One chart style: water level polylines against time (left axis, cm) with
the rain rate drawn hanging from the top on an inverted right axis, the
usual hyetograph convention. Ticks every 360 minutes. Output is plain
SVG text with fixed-precision coordinates, so identical inputs produce
byte-identical files.
"""

_W, _H = 960, 480
_ML, _MR, _MT, _MB = 64, 64, 36, 44
_PW, _PH = _W - _ML - _MR, _H - _MT - _MB

_LEVEL_COLORS = ("#2b6cb0", "#2f855a", "#b7791f", "#9f2b68", "#c05621",
                 "#2c7a7b", "#6b46c1", "#86472f", "#4a5568", "#b83280")


def _fmt(x):
    return f"{x:.2f}"


def _poly(points, color, width, opacity=1.0):
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}" '
            f'stroke-opacity="{opacity}" points="{pts}"/>')


def _downsample(n, target=1080):
    step = max(1, n // target)
    idx = list(range(0, n, step))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return idx


def svg_overlay(path, runs, horizon_min, max_level_cm, rain_max, title=""):
    """Write an overlay chart of several runs.

    runs: list of dicts with keys t, w, rain (equal-length sequences).
    """
    rain_max = max(rain_max, 1e-9)

    def sx(t):
        return _ML + _PW * (t / horizon_min)

    def sy_level(w):
        return _MT + _PH * (1.0 - w / max_level_cm)

    def sy_rain(r):
        return _MT + _PH * 0.35 * (r / rain_max)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{_PW}" height="{_PH}" fill="none" '
        f'stroke="#999"/>',
    ]
    if title:
        parts.append(f'<text x="{_ML}" y="20" font-size="14">{title}</text>')
    t = 0.0
    while t <= horizon_min + 1e-9:
        x = sx(t)
        parts.append(f'<line x1="{_fmt(x)}" y1="{_MT}" x2="{_fmt(x)}" '
                     f'y2="{_MT + _PH}" stroke="#ddd"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{_MT + _PH + 16}" '
                     f'text-anchor="middle">{int(t)}</text>')
        t += 360.0
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        w = frac * max_level_cm
        y = sy_level(w)
        parts.append(f'<text x="{_ML - 6}" y="{_fmt(y + 4)}" '
                     f'text-anchor="end">{int(w)}</text>')
        r = frac * rain_max
        yr = sy_rain(r)
        parts.append(f'<text x="{_ML + _PW + 6}" y="{_fmt(yr + 4)}" '
                     f'text-anchor="start" fill="#777">{r:.3f}</text>')
    parts.append(f'<text x="{_ML - 40}" y="{_MT - 10}">cm</text>')
    parts.append(f'<text x="{_ML + _PW + 8}" y="{_MT - 10}" fill="#777">'
                 f'mm/min (inverted)</text>')
    parts.append(f'<text x="{_fmt(_ML + _PW / 2)}" y="{_H - 8}" '
                 f'text-anchor="middle">time [min]</text>')
    # rim line
    y_rim = sy_level(max_level_cm)
    parts.append(f'<line x1="{_ML}" y1="{_fmt(y_rim)}" x2="{_ML + _PW}" '
                 f'y2="{_fmt(y_rim)}" stroke="#c53030" stroke-dasharray="6,4"/>')
    for ri, run in enumerate(runs):
        idx = _downsample(len(run["t"]))
        rain_pts = [(sx(run["t"][i]), sy_rain(run["rain"][i])) for i in idx]
        parts.append(_poly(rain_pts, "#888", 0.8, opacity=0.5))
    for ri, run in enumerate(runs):
        idx = _downsample(len(run["t"]))
        lvl_pts = [(sx(run["t"][i]), sy_level(run["w"][i])) for i in idx]
        color = _LEVEL_COLORS[ri % len(_LEVEL_COLORS)]
        parts.append(_poly(lvl_pts, color, 1.4, opacity=0.9))
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")
