"""Deterministic SVG figures: training curves, 2-D scatters, distance bars.

Every figure is a standalone SVG built from formatted strings, so a byte
comparison of two files answers "same inputs?". Scatter plots of data with
more than two feature dimensions are projected onto the top two principal
components (exact symmetric eigendecomposition of the covariance); bar
charts carry the underlying values verbatim in data-value attributes so a
reader can recover them without rescaling pixel heights.
"""

from __future__ import annotations

from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .divergence import DistanceReport
from .errors import DimensionError, ValidationError
from .pipelines import MetricRecord
from .synthdata import DomainDataset

__all__ = ["emit_plot", "project_2d"]

_W, _H = 640, 420
_PLOT = (64.0, 28.0, 608.0, 368.0)  # left, top, right, bottom in px
_PALETTE = (
    "#2a6f97", "#c05b26", "#5a9a4e", "#8458a5", "#b0443c",
    "#7a7a2e", "#3e8f8f", "#a3527f", "#6b6b6b", "#8a6f3c",
)


def project_2d(points: np.ndarray) -> np.ndarray:
    """Top-two principal components of a point cloud, deterministic signs.

    2-D input is returned unchanged. Eigenvectors are ordered by
    descending eigenvalue and flipped so each one's largest-magnitude
    entry is positive, which pins the projection regardless of solver
    sign conventions.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] < 2:
        raise DimensionError(f"project_2d needs an (n, d>=2) array, got {pts.shape}")
    if pts.shape[1] == 2:
        return pts
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / max(1, pts.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:2]
    basis = vecs[:, order]
    for j in range(2):
        k = int(np.argmax(np.abs(basis[:, j])))
        if basis[k, j] < 0:
            basis[:, j] = -basis[:, j]
    return centered @ basis


def _num(x: float) -> str:
    return f"{x:.6g}"


def _exact(x: float) -> str:
    return f"{float(x):.17g}"


def _scale(lo: float, hi: float) -> Tuple[float, float]:
    if not np.isfinite(lo) or not np.isfinite(hi):
        raise ValidationError("plot range is not finite")
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


class _Canvas:
    def __init__(self, x_label: str, y_label: str,
                 x_range: Tuple[float, float], y_range: Tuple[float, float]):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
        ]
        self.x0, self.y0, self.x1, self.y1 = _PLOT
        self.xmin, self.xmax = _scale(*x_range)
        self.ymin, self.ymax = _scale(*y_range)
        self._frame(x_label, y_label)

    def sx(self, x: float) -> float:
        return self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * (self.x1 - self.x0)

    def sy(self, y: float) -> float:
        return self.y1 - (y - self.ymin) / (self.ymax - self.ymin) * (self.y1 - self.y0)

    def _frame(self, x_label: str, y_label: str) -> None:
        p = self.parts
        p.append(f'<rect x="{self.x0}" y="{self.y0}" width="{self.x1 - self.x0}" '
                 f'height="{self.y1 - self.y0}" fill="none" stroke="#333"/>')
        for i in range(5):
            t = i / 4.0
            xv = self.xmin + t * (self.xmax - self.xmin)
            yv = self.ymin + t * (self.ymax - self.ymin)
            xp, yp = self.sx(xv), self.sy(yv)
            p.append(f'<line x1="{_num(xp)}" y1="{self.y1}" x2="{_num(xp)}" '
                     f'y2="{self.y1 + 4}" stroke="#333"/>')
            p.append(f'<text x="{_num(xp)}" y="{self.y1 + 16}" font-size="10" '
                     f'text-anchor="middle" font-family="sans-serif">{_num(xv)}</text>')
            p.append(f'<line x1="{self.x0 - 4}" y1="{_num(yp)}" x2="{self.x0}" '
                     f'y2="{_num(yp)}" stroke="#333"/>')
            p.append(f'<text x="{self.x0 - 6}" y="{_num(yp + 3)}" font-size="10" '
                     f'text-anchor="end" font-family="sans-serif">{_num(yv)}</text>')
        p.append(f'<text x="{(self.x0 + self.x1) / 2}" y="{_H - 6}" font-size="12" '
                 f'text-anchor="middle" font-family="sans-serif">{x_label}</text>')
        p.append(f'<text x="14" y="{(self.y0 + self.y1) / 2}" font-size="12" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'transform="rotate(-90 14 {(self.y0 + self.y1) / 2})">{y_label}</text>')

    def legend(self, entries: Sequence[Tuple[str, str]]) -> None:
        x, y = self.x1 - 150, self.y0 + 12
        for i, (name, color) in enumerate(entries):
            yy = y + 14 * i
            self.parts.append(f'<line x1="{x}" y1="{yy - 3}" x2="{x + 18}" y2="{yy - 3}" '
                              f'stroke="{color}" stroke-width="2"/>')
            self.parts.append(f'<text x="{x + 24}" y="{yy}" font-size="10" '
                              f'font-family="sans-serif">{name}</text>')

    def finish(self) -> str:
        return "\n".join(self.parts) + "\n</svg>\n"


def _series_from_records(records: Sequence[MetricRecord]) -> Dict[str, list]:
    series: Dict[str, list] = {}
    for rec in records:
        for key in sorted(rec.losses):
            v = rec.losses[key]
            if np.isfinite(v):
                series.setdefault(key, []).append((rec.iteration, float(v)))
        for key in sorted(rec.accuracy):
            v = rec.accuracy[key]
            if np.isfinite(v):
                series.setdefault(f"acc:{key}", []).append((rec.iteration, float(v)))
    return {k: v for k, v in series.items() if v}


def _curves_svg(records: Sequence[MetricRecord]) -> str:
    if not records:
        raise ValidationError("curves plot needs at least one record")
    series = _series_from_records(records)
    if not series:
        raise ValidationError("curves plot needs at least one finite series")
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    cv = _Canvas("iteration", "value", (min(xs), max(xs)), (min(ys), max(ys)))
    names = sorted(series)
    for i, name in enumerate(names):
        color = _PALETTE[i % len(_PALETTE)]
        pts = series[name]
        coords = " ".join(f"{_num(cv.sx(x))},{_num(cv.sy(y))}" for x, y in pts)
        cv.parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                        f'stroke-width="1.5" data-series="{name}"/>')
        if len(pts) <= 200:
            for x, y in pts:
                cv.parts.append(f'<circle cx="{_num(cv.sx(x))}" cy="{_num(cv.sy(y))}" '
                                f'r="2" fill="{color}"/>')
    cv.legend([(n, _PALETTE[i % len(_PALETTE)]) for i, n in enumerate(names)])
    return cv.finish()


_MARKERS = ("circle", "square", "triangle")


def _marker(cv: _Canvas, shape: str, x: float, y: float, color: str) -> str:
    px, py = cv.sx(x), cv.sy(y)
    if shape == "circle":
        return f'<circle cx="{_num(px)}" cy="{_num(py)}" r="2.5" fill="{color}" fill-opacity="0.7"/>'
    if shape == "square":
        return (f'<rect x="{_num(px - 2.2)}" y="{_num(py - 2.2)}" width="4.4" height="4.4" '
                f'fill="{color}" fill-opacity="0.7"/>')
    return (f'<path d="M {_num(px)} {_num(py - 3)} L {_num(px - 2.6)} {_num(py + 2.2)} '
            f'L {_num(px + 2.6)} {_num(py + 2.2)} Z" fill="{color}" fill-opacity="0.7"/>')


def _scatter_svg(datasets: Mapping[str, DomainDataset]) -> str:
    if not datasets:
        raise ValidationError("scatter plot needs at least one dataset")
    names = list(datasets)
    dims = {datasets[n].dim for n in names}
    if len(dims) != 1:
        raise ValidationError(f"scatter datasets disagree on dimension: {sorted(dims)}")
    if dims.pop() < 2:
        raise ValidationError("scatter plot needs at least two feature dimensions")
    stacked = np.concatenate([datasets[n].features for n in names], axis=0)
    coords = project_2d(stacked)
    splits = np.cumsum([datasets[n].n for n in names])[:-1]
    groups = np.split(coords, splits)
    cv = _Canvas("component 1", "component 2",
                 (float(coords[:, 0].min()), float(coords[:, 0].max())),
                 (float(coords[:, 1].min()), float(coords[:, 1].max())))
    for i, (name, pts) in enumerate(zip(names, groups)):
        color = _PALETTE[i % len(_PALETTE)]
        shape = _MARKERS[i % len(_MARKERS)]
        cv.parts.append(f'<g data-domain="{name}">')
        for x, y in pts:
            cv.parts.append(_marker(cv, shape, float(x), float(y), color))
        cv.parts.append('</g>')
    x0, y0 = cv.x1 - 150, cv.y0 + 12
    for i, name in enumerate(names):
        color = _PALETTE[i % len(_PALETTE)]
        yy = y0 + 14 * i
        cv.parts.append(_legend_marker(_MARKERS[i % len(_MARKERS)], x0 + 6, yy - 3, color))
        cv.parts.append(f'<text x="{x0 + 16}" y="{yy}" font-size="10" '
                        f'font-family="sans-serif">{name}</text>')
    return cv.finish()


def _legend_marker(shape: str, px: float, py: float, color: str) -> str:
    if shape == "circle":
        return f'<circle cx="{px}" cy="{py}" r="3" fill="{color}"/>'
    if shape == "square":
        return f'<rect x="{px - 2.6}" y="{py - 2.6}" width="5.2" height="5.2" fill="{color}"/>'
    return (f'<path d="M {px} {py - 3.4} L {px - 3} {py + 2.6} '
            f'L {px + 3} {py + 2.6} Z" fill="{color}"/>')


_METRIC_LABEL = {"adist": "proxy A-distance", "mmd": "MMD&#178;"}


def _bars_svg(reports: Sequence[DistanceReport], metric: str) -> str:
    if not reports:
        raise ValidationError("distance bar chart needs at least one report")
    if metric not in _METRIC_LABEL:
        raise ValidationError(f"unknown metric for distance bars: {metric!r}")
    values = [float(r.value(metric)) for r in reports]
    labels = [f"{r.pair[0]}-{r.pair[1]}" for r in reports]
    top = max(max(values), 0.0)
    cv = _Canvas("pair", _METRIC_LABEL[metric], (0.0, float(len(values))), (0.0, top))
    slot = (cv.x1 - cv.x0) / len(values)
    for i, (label, value) in enumerate(zip(labels, values)):
        color = _PALETTE[i % len(_PALETTE)]
        bx = cv.x0 + slot * (i + 0.2)
        by = cv.sy(value)
        cv.parts.append(f'<rect x="{_num(bx)}" y="{_num(by)}" width="{_num(slot * 0.6)}" '
                        f'height="{_num(cv.y1 - by)}" fill="{color}" '
                        f'data-label="{label}" data-metric="{metric}" '
                        f'data-value="{_exact(value)}"/>')
        cv.parts.append(f'<text x="{_num(bx + slot * 0.3)}" y="{cv.y1 + 16}" font-size="10" '
                        f'text-anchor="middle" font-family="sans-serif">{label}</text>')
        cv.parts.append(f'<text x="{_num(bx + slot * 0.3)}" y="{_num(by - 4)}" font-size="10" '
                        f'text-anchor="middle" font-family="sans-serif">{_num(value)}</text>')
    return cv.finish()


def emit_plot(payload, kind: str, path, metric: str = "adist") -> None:
    """Write one SVG figure.

    kind "curves" takes a sequence of metric records, "scatter2d" a
    mapping of domain name to dataset, "distance_bars" a sequence of
    distance reports (heights follow `metric`). Identical inputs produce
    byte-identical files.
    """
    if kind == "curves":
        text = _curves_svg(payload)
    elif kind == "scatter2d":
        text = _scatter_svg(payload)
    elif kind == "distance_bars":
        text = _bars_svg(payload, metric)
    else:
        raise ValidationError(f"unknown plot kind: {kind!r}")
    with open(path, "wb") as fh:
        fh.write(text.encode("utf-8"))
