"""Planar primitives: axis-aligned windows, convex polygon clipping, grid boxes.

Everything is 2-D and numpy-based. Polygons are (k, 2) float arrays with CCW
vertex order; windows are axis-aligned rectangles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle [lo, hi] with positive area."""

    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if lo.shape != (2,) or hi.shape != (2,):
            raise ParameterError("window corners must be 2-vectors")
        if not np.all(lo < hi):
            raise ParameterError(f"window must satisfy lo < hi componentwise, got {lo} .. {hi}")
        object.__setattr__(self, "lo", (float(lo[0]), float(lo[1])))
        object.__setattr__(self, "hi", (float(hi[0]), float(hi[1])))

    @property
    def sides(self) -> tuple[float, float]:
        return (self.hi[0] - self.lo[0], self.hi[1] - self.lo[1])

    @property
    def area(self) -> float:
        w, h = self.sides
        return w * h

    @property
    def diagonal(self) -> float:
        w, h = self.sides
        return float(np.hypot(w, h))

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2.0

    def expand(self, margin: float) -> "Window":
        return Window((self.lo[0] - margin, self.lo[1] - margin),
                      (self.hi[0] + margin, self.hi[1] + margin))

    def scaled(self, t: float, about=(0.0, 0.0)) -> "Window":
        """Scale by t about a point (default: the global origin)."""
        a = np.asarray(about, float)
        lo = a + t * (np.asarray(self.lo) - a)
        hi = a + t * (np.asarray(self.hi) - a)
        return Window(tuple(lo), tuple(hi))

    def shifted(self, offset) -> "Window":
        off = np.asarray(offset, float)
        return Window(tuple(np.asarray(self.lo) + off), tuple(np.asarray(self.hi) + off))

    def contains_points(self, pts: np.ndarray, closed: bool = True) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if closed:
            return ((pts[:, 0] >= self.lo[0]) & (pts[:, 0] <= self.hi[0])
                    & (pts[:, 1] >= self.lo[1]) & (pts[:, 1] <= self.hi[1]))
        return ((pts[:, 0] >= self.lo[0]) & (pts[:, 0] < self.hi[0])
                & (pts[:, 1] >= self.lo[1]) & (pts[:, 1] < self.hi[1]))

    def contains_window(self, other: "Window", tol: float = 0.0) -> bool:
        return (other.lo[0] >= self.lo[0] - tol and other.lo[1] >= self.lo[1] - tol
                and other.hi[0] <= self.hi[0] + tol and other.hi[1] <= self.hi[1] + tol)

    def intersects(self, other: "Window") -> bool:
        return not (other.hi[0] < self.lo[0] or other.lo[0] > self.hi[0]
                    or other.hi[1] < self.lo[1] or other.lo[1] > self.hi[1])

    def as_polygon(self) -> np.ndarray:
        x0, y0 = self.lo
        x1, y1 = self.hi
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], float)

    def to_json(self):
        return [list(self.lo), list(self.hi)]

    @staticmethod
    def from_json(obj) -> "Window":
        return Window(tuple(obj[0]), tuple(obj[1]))

    @staticmethod
    def hull(windows) -> "Window":
        los = np.array([w.lo for w in windows])
        his = np.array([w.hi for w in windows])
        return Window(tuple(los.min(axis=0)), tuple(his.max(axis=0)))


def polygon_area(poly: np.ndarray) -> float:
    """Signed area (positive for CCW orientation)."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def ensure_ccw(poly: np.ndarray) -> np.ndarray:
    if polygon_area(poly) < 0:
        return poly[::-1].copy()
    return poly


def polygon_diameter(poly: np.ndarray) -> float:
    """Max pairwise vertex distance; exact for convex polygons."""
    d = poly[:, None, :] - poly[None, :, :]
    return float(np.sqrt((d ** 2).sum(axis=2)).max())


def polygon_centroid(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-300:
        return poly.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def clip_polygon_halfplane(poly: np.ndarray, normal, offset: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon to {x : <normal, x> <= offset}.

    Returns an empty (0, 2) array when nothing survives.
    """
    if len(poly) == 0:
        return poly
    n = np.asarray(normal, float)
    dist = poly @ n - offset
    inside = dist <= 0.0
    if inside.all():
        return poly
    if not inside.any():
        return np.empty((0, 2))
    out = []
    k = len(poly)
    for i in range(k):
        j = (i + 1) % k
        pi, pj = poly[i], poly[j]
        di, dj = dist[i], dist[j]
        if di <= 0.0:
            out.append(pi)
            if dj > 0.0:
                t = di / (di - dj)
                out.append(pi + t * (pj - pi))
        elif dj <= 0.0:
            t = di / (di - dj)
            out.append(pi + t * (pj - pi))
    return np.array(out)


def clip_polygon_to_window(poly: np.ndarray, win: Window) -> np.ndarray:
    out = poly
    out = clip_polygon_halfplane(out, (-1.0, 0.0), -win.lo[0])
    out = clip_polygon_halfplane(out, (1.0, 0.0), win.hi[0])
    out = clip_polygon_halfplane(out, (0.0, -1.0), -win.lo[1])
    out = clip_polygon_halfplane(out, (0.0, 1.0), win.hi[1])
    return out


def point_in_convex_polygon(point, poly: np.ndarray, tol: float = 0.0) -> bool:
    """Membership test for a CCW convex polygon, boundary counts within tol."""
    p = np.asarray(point, float)
    a = poly
    b = np.roll(poly, -1, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])
    return bool(np.all(cross >= -tol))


def clip_segments_to_rect(a: np.ndarray, b: np.ndarray, rect: Window):
    """Liang-Barsky clip of many segments a[i]->b[i] to a rectangle, vectorized.

    Returns (inside, lengths): a boolean mask of segments whose intersection
    with the rectangle is non-empty, and the clipped lengths (0 for point
    contacts and for segments entirely outside).
    """
    a = np.atleast_2d(a).astype(float)
    b = np.atleast_2d(b).astype(float)
    d = b - a
    t0 = np.zeros(len(a))
    t1 = np.ones(len(a))
    ok = np.ones(len(a), bool)
    for axis, (lo, hi) in enumerate(((rect.lo[0], rect.hi[0]), (rect.lo[1], rect.hi[1]))):
        p = d[:, axis]
        par = p == 0.0
        ok &= ~(par & ((a[:, axis] < lo) | (a[:, axis] > hi)))
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo = (lo - a[:, axis]) / p
            t_hi = (hi - a[:, axis]) / p
        enter = np.minimum(t_lo, t_hi)
        leave = np.maximum(t_lo, t_hi)
        t0 = np.where(par, t0, np.maximum(t0, enter))
        t1 = np.where(par, t1, np.minimum(t1, leave))
    ok &= t0 <= t1 + 1e-15
    seg_len = np.linalg.norm(d, axis=1) * np.clip(t1 - t0, 0.0, None)
    seg_len = np.where(ok, seg_len, 0.0)
    return ok, seg_len


@dataclass(frozen=True)
class GridRegion:
    """Union of axis-aligned grid boxes delta*(k + [-1/2, 1/2]^2), k integer."""

    delta: float
    boxes: tuple

    def __post_init__(self):
        if self.delta <= 0:
            raise ParameterError("grid delta must be positive")
        object.__setattr__(self, "boxes", tuple((int(i), int(j)) for i, j in self.boxes))

    @property
    def area(self) -> float:
        return len(self.boxes) * self.delta ** 2

    def bounding_window(self) -> Window:
        idx = np.array(self.boxes, float)
        lo = (idx.min(axis=0) - 0.5) * self.delta
        hi = (idx.max(axis=0) + 0.5) * self.delta
        return Window(tuple(lo), tuple(hi))

    def count_points(self, pts: np.ndarray) -> int:
        """Number of points in the union of boxes (half-open boxes)."""
        if len(pts) == 0:
            return 0
        idx = np.floor(pts / self.delta + 0.5).astype(int)
        box_set = set(self.boxes)
        return int(sum((int(i), int(j)) in box_set for i, j in idx))

    @staticmethod
    def rectangle(delta: float, ni: int, nj: int, anchor=(0, 0)) -> "GridRegion":
        boxes = [(anchor[0] + i, anchor[1] + j) for i in range(ni) for j in range(nj)]
        return GridRegion(delta, tuple(boxes))
