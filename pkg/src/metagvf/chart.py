"""Self-contained SVG bar chart for the three-agent comparison.

Hand-rolled so headless runs need no plotting stack: bars, standard-error
whiskers, a 0..1 reward axis, and labels.
"""

_COLORS = {"obs-only": "#4477cc", "expert": "#ee8833", "meta": "#333333"}

_WIDTH, _HEIGHT = 480, 320
_LEFT, _RIGHT, _TOP, _BOTTOM = 64, 20, 44, 52


def _y(value):
    span = _HEIGHT - _TOP - _BOTTOM
    return _TOP + span * (1.0 - min(max(value, 0.0), 1.0))


def comparison_svg(entries, title="Mean evaluation reward (greedy phase)"):
    """entries: [(label, mean, standard_error), ...] -> SVG text."""
    plot_w = _WIDTH - _LEFT - _RIGHT
    slot = plot_w / max(len(entries), 1)
    bar_w = slot * 0.5
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="sans-serif">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = _y(tick)
        parts.append(f'<line x1="{_LEFT}" y1="{y:.1f}" x2="{_WIDTH - _RIGHT}" y2="{y:.1f}" '
                     f'stroke="#dddddd"/>')
        parts.append(f'<text x="{_LEFT - 8}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{tick:.2f}</text>')
    for i, (label, mean, se) in enumerate(entries):
        cx = _LEFT + slot * (i + 0.5)
        x0 = cx - bar_w / 2
        y_top = _y(mean)
        color = _COLORS.get(label, "#888888")
        parts.append(f'<rect x="{x0:.1f}" y="{y_top:.1f}" width="{bar_w:.1f}" '
                     f'height="{_y(0.0) - y_top:.1f}" fill="{color}"/>')
        if se > 0.0:
            y_lo, y_hi = _y(mean - se), _y(mean + se)
            parts.append(f'<line x1="{cx:.1f}" y1="{y_lo:.1f}" x2="{cx:.1f}" y2="{y_hi:.1f}" '
                         f'stroke="black" stroke-width="1.5"/>')
            for y in (y_lo, y_hi):
                parts.append(f'<line x1="{cx - 6:.1f}" y1="{y:.1f}" x2="{cx + 6:.1f}" '
                             f'y2="{y:.1f}" stroke="black" stroke-width="1.5"/>')
        parts.append(f'<text x="{cx:.1f}" y="{_HEIGHT - _BOTTOM + 18}" text-anchor="middle" '
                     f'font-size="12">{label}</text>')
        parts.append(f'<text x="{cx:.1f}" y="{y_top - 6:.1f}" text-anchor="middle" '
                     f'font-size="11">{mean:.3f}</text>')
    parts.append(f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_y(0.0):.1f}" stroke="black"/>')
    parts.append(f'<line x1="{_LEFT}" y1="{_y(0.0):.1f}" x2="{_WIDTH - _RIGHT}" '
                 f'y2="{_y(0.0):.1f}" stroke="black"/>')
    parts.append(f'<text x="18" y="{_HEIGHT / 2:.1f}" text-anchor="middle" font-size="12" '
                 f'transform="rotate(-90 18 {_HEIGHT / 2:.1f})">mean reward</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_comparison_svg(path, entries, title="Mean evaluation reward (greedy phase)"):
    with open(path, "w", newline="") as f:
        f.write(comparison_svg(entries, title=title))
