"""Bernoulli cell coloring, cluster labeling and rectangle crossing events.

Colorings store one uniform per cell and a threshold, so re-thresholding at a
different p reuses the same randomness (monotone coupling across p).
Crossing connectivity inside a rectangle is geometric: face edges count only
where the shared boundary segment clipped to the rectangle has positive
length; star mode additionally accepts corner contacts inside the rectangle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .geometry import Window, clip_polygon_to_window, clip_segments_to_rect
from .tessellation import AdjacencyGraph, Tessellation


@dataclass
class Coloring:
    uniforms: np.ndarray
    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ParameterError("p must lie in [0, 1]")

    @property
    def black(self) -> np.ndarray:
        return self.uniforms < self.p

    def at_p(self, p: float) -> "Coloring":
        """Same uniforms, new threshold (the coupling across p)."""
        return Coloring(self.uniforms, p)

    def mask(self, color: str) -> np.ndarray:
        if color == "black":
            return self.black
        if color == "white":
            return ~self.black
        raise ParameterError(f"unknown color {color!r}")


def color(tess: Tessellation, p: float, rng: np.random.Generator) -> Coloring:
    """Draw one uniform per cell (by cell id) and threshold at p."""
    return Coloring(rng.random(len(tess.cells)), p)


class UnionFind:
    """Array union-find with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


@dataclass(frozen=True)
class CrossingQuery:
    rect: Window
    direction: str = "horizontal"
    color: str = "black"
    adjacency: str = "face"

    def __post_init__(self):
        if self.direction not in ("horizontal", "vertical"):
            raise ParameterError("direction must be horizontal or vertical")
        if self.color not in ("black", "white"):
            raise ParameterError("color must be black or white")
        if self.adjacency not in ("face", "star"):
            raise ParameterError("adjacency must be face or star")


@dataclass
class RectComponents:
    """Connected components of active cells inside a rectangle."""

    ids: list
    labels: dict
    touches: dict  # cell id -> (L, R, B, T) bools


def _rect_components(tess: Tessellation, active: np.ndarray, rect: Window,
                     adjacency: str) -> RectComponents:
    tol = tess.tol
    cand = tess.cells_meeting(rect)
    ids = []
    touches = {}
    for i in cand:
        if not active[i]:
            continue
        clipped = clip_polygon_to_window(tess.cells[i].polygon, rect)
        if len(clipped) == 0:
            continue
        xmin, ymin = clipped.min(axis=0)
        xmax, ymax = clipped.max(axis=0)
        ids.append(int(i))
        touches[int(i)] = (xmin <= rect.lo[0] + tol, xmax >= rect.hi[0] - tol,
                           ymin <= rect.lo[1] + tol, ymax >= rect.hi[1] - tol)
    in_rect = np.zeros(len(tess.cells), bool)
    in_rect[ids] = True
    pos = {cid: k for k, cid in enumerate(ids)}
    uf = UnionFind(len(ids))

    fp = tess.face_pairs
    if len(fp):
        both = in_rect[fp[:, 0]] & in_rect[fp[:, 1]]
        if both.any():
            seg = tess.face_segments[both]
            ok, lengths = clip_segments_to_rect(seg[:, 0, :], seg[:, 1, :], rect)
            if adjacency == "face":
                passing = ok & (lengths > tol)
            else:
                passing = ok
            for (i, j) in fp[both][passing]:
                uf.union(pos[int(i)], pos[int(j)])
    if adjacency == "star" and len(tess.star_pairs):
        sp = tess.star_pairs
        both = in_rect[sp[:, 0]] & in_rect[sp[:, 1]]
        if both.any():
            pts = tess.star_points[both]
            inside = ((pts[:, 0] >= rect.lo[0] - tol) & (pts[:, 0] <= rect.hi[0] + tol)
                      & (pts[:, 1] >= rect.lo[1] - tol) & (pts[:, 1] <= rect.hi[1] + tol))
            for (i, j) in sp[both][inside]:
                uf.union(pos[int(i)], pos[int(j)])
    labels = {cid: uf.find(pos[cid]) for cid in ids}
    return RectComponents(ids=ids, labels=labels, touches=touches)


def crossing(tess: Tessellation, coloring: Coloring, query: CrossingQuery) -> bool:
    """True iff some monochromatic component joins the rectangle's start and
    end sides through interiors and shared boundary pieces inside the rect."""
    if not tess.core_window.contains_window(query.rect, tol=tess.tol):
        raise ParameterError("crossing rectangle must lie inside the core window")
    comps = _rect_components(tess, coloring.mask(query.color), query.rect, query.adjacency)
    if query.direction == "horizontal":
        start = {comps.labels[i] for i in comps.ids if comps.touches[i][0]}
        end = {comps.labels[i] for i in comps.ids if comps.touches[i][1]}
    else:
        start = {comps.labels[i] for i in comps.ids if comps.touches[i][2]}
        end = {comps.labels[i] for i in comps.ids if comps.touches[i][3]}
    return bool(start & end)


def spanning_cluster_count(tess: Tessellation, coloring: Coloring, rect: Window,
                           adjacency: str = "face", direction: str = "horizontal",
                           color_name: str = "black") -> int:
    """Number of distinct components joining the rect's opposite sides."""
    comps = _rect_components(tess, coloring.mask(color_name), rect, adjacency)
    if direction == "horizontal":
        start = {comps.labels[i] for i in comps.ids if comps.touches[i][0]}
        end = {comps.labels[i] for i in comps.ids if comps.touches[i][1]}
    else:
        start = {comps.labels[i] for i in comps.ids if comps.touches[i][2]}
        end = {comps.labels[i] for i in comps.ids if comps.touches[i][3]}
    return len(start & end)


@dataclass
class ClusterInfo:
    label: int
    size: int
    bbox: tuple
    touches: tuple  # (L, R, B, T) of the reference rectangle


@dataclass
class ClusterLabeling:
    labels: dict
    clusters: dict = field(default_factory=dict)

    def label_of(self, cell_id: int):
        return self.labels.get(cell_id)


def black_clusters(tess: Tessellation, graph: AdjacencyGraph, coloring: Coloring,
                   rect: Window) -> ClusterLabeling:
    """Union-find labeling of black cells meeting rect, using graph adjacency.

    Side-touch flags per cluster come from the cells' intersections with the
    rectangle's four sides.
    """
    black = coloring.black
    tol = tess.tol
    cand = tess.cells_meeting(rect)
    ids = []
    touches = {}
    bboxes = {}
    for i in cand:
        if not black[i]:
            continue
        clipped = clip_polygon_to_window(tess.cells[i].polygon, rect)
        if len(clipped) == 0:
            continue
        xmin, ymin = clipped.min(axis=0)
        xmax, ymax = clipped.max(axis=0)
        ids.append(int(i))
        touches[int(i)] = (xmin <= rect.lo[0] + tol, xmax >= rect.hi[0] - tol,
                           ymin <= rect.lo[1] + tol, ymax >= rect.hi[1] - tol)
        bboxes[int(i)] = (xmin, ymin, xmax, ymax)
    id_set = set(ids)
    pos = {cid: k for k, cid in enumerate(ids)}
    uf = UnionFind(len(ids))
    for cid in ids:
        for w in graph.neighbors[cid]:
            if w in id_set and w > cid:
                uf.union(pos[cid], pos[w])
    labels = {cid: uf.find(pos[cid]) for cid in ids}
    clusters = {}
    for cid in ids:
        lab = labels[cid]
        info = clusters.get(lab)
        b = bboxes[cid]
        t = touches[cid]
        if info is None:
            clusters[lab] = ClusterInfo(label=lab, size=1, bbox=b, touches=t)
        else:
            info.size += 1
            ib = info.bbox
            info.bbox = (min(ib[0], b[0]), min(ib[1], b[1]), max(ib[2], b[2]), max(ib[3], b[3]))
            info.touches = tuple(a or b2 for a, b2 in zip(info.touches, t))
    return ClusterLabeling(labels=labels, clusters=clusters)


def cluster_reach(tess: Tessellation, graph: AdjacencyGraph, coloring: Coloring,
                  root: int) -> float:
    """Max Euclidean distance from the origin reached by the root's black cluster.

    Returns 0.0 when the root cell is white (empty cluster).
    """
    black = coloring.black
    if not black[root]:
        return 0.0
    best = 0.0
    seen = {root}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        poly = tess.cells[v].polygon
        best = max(best, float(np.sqrt((poly ** 2).sum(axis=1)).max()))
        for w in graph.neighbors[v]:
            if w not in seen and black[w]:
                seen.add(w)
                queue.append(w)
    return best
