"""Deterministic SVG rendering for graphs and evaluation plots.

Hand-rolled SVG keeps the output byte-stable: fixed float formatting, no
timestamps, no generator metadata. Color scales are documented in a
<desc> block inside each file.
"""

from __future__ import annotations

import numpy as np

from .network import BrainGraph

__all__ = ["adjacency_heatmap_svg", "topology_svg", "confusion_svg", "roc_svg"]


def _f(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def _diverging_color(value: float, vmax: float) -> str:
    """Blue (negative) -> white (zero) -> red (positive), clipped at vmax."""
    if vmax <= 0:
        return "#ffffff"
    t = max(-1.0, min(1.0, value / vmax))
    if t >= 0:
        r, g, b = 255, round(255 * (1 - t)), round(255 * (1 - t))
    else:
        r, g, b = round(255 * (1 + t)), round(255 * (1 + t)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def _svg(width: float, height: float, desc: str, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" '
        f'height="{_f(height)}" viewBox="0 0 {_f(width)} {_f(height)}">\n'
        f"<desc>{desc}</desc>\n"
    )
    return head + "\n".join(body) + "\n</svg>\n"


def adjacency_heatmap_svg(g: BrainGraph, cell: float = 24.0) -> str:
    """N x N heatmap of connection weights on a symmetric diverging scale."""
    a = g.adjacency
    n = g.n_nodes
    vmax = float(np.abs(a).max()) or 1.0
    margin = 30.0
    body = []
    for i in range(n):
        for j in range(n):
            color = _diverging_color(float(a[i, j]), vmax)
            body.append(
                f'<rect x="{_f(margin + j * cell)}" y="{_f(margin + i * cell)}" '
                f'width="{_f(cell)}" height="{_f(cell)}" fill="{color}" '
                f'stroke="#cccccc" stroke-width="0.5"/>'
            )
    labels = g.labels or [str(i) for i in range(n)]
    for i, lab in enumerate(labels):
        y = margin + i * cell + cell / 2 + 4
        body.append(f'<text x="{_f(margin - 6)}" y="{_f(y)}" font-size="10" '
                    f'text-anchor="end">{lab}</text>')
        body.append(f'<text x="{_f(margin + i * cell + cell / 2)}" y="{_f(margin - 8)}" '
                    f'font-size="10" text-anchor="middle">{lab}</text>')
    size = margin * 2 + n * cell
    desc = (f"adjacency heatmap; diverging scale blue=-{_f(vmax)} white=0 "
            f"red=+{_f(vmax)}")
    return _svg(size, size, desc, body)


def topology_svg(g: BrainGraph, radius: float = 140.0) -> str:
    """Circular node layout; edge opacity and width scale with |weight|."""
    n = g.n_nodes
    cx = cy = radius + 50.0
    angles = [2 * np.pi * i / n - np.pi / 2 for i in range(n)]
    xs = [cx + radius * np.cos(t) for t in angles]
    ys = [cy + radius * np.sin(t) for t in angles]
    vmax = float(np.abs(g.adjacency).max()) or 1.0
    body = []
    for i in range(n):
        for j in range(i + 1, n):
            w = float(g.adjacency[i, j])
            if w == 0:
                continue
            frac = abs(w) / vmax
            color = "#c0392b" if w > 0 else "#2c5aa0"
            body.append(
                f'<line x1="{_f(xs[i])}" y1="{_f(ys[i])}" x2="{_f(xs[j])}" '
                f'y2="{_f(ys[j])}" stroke="{color}" '
                f'stroke-width="{_f(0.5 + 2.5 * frac)}" '
                f'stroke-opacity="{_f(0.25 + 0.75 * frac)}"/>'
            )
    labels = g.labels or [str(i) for i in range(n)]
    for i in range(n):
        body.append(f'<circle cx="{_f(xs[i])}" cy="{_f(ys[i])}" r="9" '
                    f'fill="#f5f5f5" stroke="#333333"/>')
        body.append(f'<text x="{_f(xs[i])}" y="{_f(ys[i] + 3.5)}" font-size="9" '
                    f'text-anchor="middle">{labels[i]}</text>')
    size = 2 * (radius + 50.0)
    desc = (f"network topology, circular layout; edge width/opacity scale with "
            f"|weight|/{_f(vmax)}; red positive, blue negative")
    return _svg(size, size, desc, body)


def confusion_svg(confusion: list[list[int]]) -> str:
    """2x2 confusion matrix: rows true class, columns predicted class."""
    cell = 90.0
    margin = 60.0
    total = max(sum(sum(row) for row in confusion), 1)
    body = []
    for i in range(2):
        for j in range(2):
            count = confusion[i][j]
            shade = round(255 - 155 * (count / total))
            body.append(
                f'<rect x="{_f(margin + j * cell)}" y="{_f(margin + i * cell)}" '
                f'width="{_f(cell)}" height="{_f(cell)}" '
                f'fill="#{shade:02x}{shade:02x}ff" stroke="#333333"/>'
            )
            body.append(
                f'<text x="{_f(margin + j * cell + cell / 2)}" '
                f'y="{_f(margin + i * cell + cell / 2 + 5)}" font-size="16" '
                f'text-anchor="middle">{count}</text>'
            )
    for j, lab in enumerate(("pred 0", "pred 1")):
        body.append(f'<text x="{_f(margin + j * cell + cell / 2)}" y="{_f(margin - 10)}" '
                    f'font-size="12" text-anchor="middle">{lab}</text>')
    for i, lab in enumerate(("true 0", "true 1")):
        body.append(f'<text x="{_f(margin - 8)}" y="{_f(margin + i * cell + cell / 2 + 4)}" '
                    f'font-size="12" text-anchor="end">{lab}</text>')
    size = margin * 2 + 2 * cell
    return _svg(size, size, "confusion matrix; blue shade scales with count", body)


def roc_svg(roc_points: list[tuple[float, float]], auc: float | None = None) -> str:
    """ROC polyline on a unit square with the chance diagonal."""
    side = 240.0
    margin = 40.0
    def sx(v): return margin + v * side
    def sy(v): return margin + (1 - v) * side
    body = [
        f'<rect x="{_f(margin)}" y="{_f(margin)}" width="{_f(side)}" '
        f'height="{_f(side)}" fill="none" stroke="#333333"/>',
        f'<line x1="{_f(sx(0))}" y1="{_f(sy(0))}" x2="{_f(sx(1))}" y2="{_f(sy(1))}" '
        f'stroke="#999999" stroke-dasharray="4,4"/>',
    ]
    pts = " ".join(f"{_f(sx(fpr))},{_f(sy(tpr))}" for fpr, tpr in roc_points)
    body.append(f'<polyline points="{pts}" fill="none" stroke="#c0392b" stroke-width="2"/>')
    body.append(f'<text x="{_f(margin + side / 2)}" y="{_f(margin + side + 28)}" '
                f'font-size="12" text-anchor="middle">false positive rate</text>')
    body.append(f'<text x="{_f(12)}" y="{_f(margin + side / 2)}" font-size="12" '
                f'text-anchor="middle" transform="rotate(-90 12 {_f(margin + side / 2)})">'
                f'true positive rate</text>')
    if auc is not None:
        body.append(f'<text x="{_f(margin + side - 8)}" y="{_f(margin + side - 10)}" '
                    f'font-size="12" text-anchor="end">AUC = {auc:.4f}</text>')
    size = margin * 2 + side
    return _svg(size, size + 20, "ROC curve with chance diagonal", body)
