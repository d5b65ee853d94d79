"""Grid box fields over a tessellation and greedy-animal maximization.

Y counts cell centers per delta-box; U marks boxes from which a single cell
reaches boxes at l-infinity index distance >= 2 (the large-cell indicator).
greedy_animal_max finds connected n-box sets maximizing the field average,
exactly (duplicate-free enumeration) or by randomized local search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .geometry import Window
from .tessellation import Tessellation


@dataclass
class GridField:
    """Per-box values on an origin-aligned integer index rectangle.

    Box (i, j) is delta * ((i, j) + [-1/2, 1/2]^2); values[i - i0, j - j0]
    holds its statistic.
    """

    delta: float
    i0: int
    j0: int
    values: np.ndarray

    @property
    def shape(self):
        return self.values.shape

    def contains_index(self, i: int, j: int) -> bool:
        ni, nj = self.values.shape
        return self.i0 <= i < self.i0 + ni and self.j0 <= j < self.j0 + nj

    def value(self, i: int, j: int) -> float:
        return float(self.values[i - self.i0, j - self.j0])

    def box_window(self, i: int, j: int) -> Window:
        d = self.delta
        return Window(((i - 0.5) * d, (j - 0.5) * d), ((i + 0.5) * d, (j + 0.5) * d))

    def total(self) -> float:
        return float(self.values.sum())

    def indices(self):
        ni, nj = self.values.shape
        for a in range(ni):
            for b in range(nj):
                yield (self.i0 + a, self.j0 + b)


def region_index_range(region: Window, delta: float):
    """Indices of boxes fully contained in the region (with float slack)."""
    eps = 1e-9 * delta
    i0 = math.ceil(region.lo[0] / delta + 0.5 - eps)
    i1 = math.floor(region.hi[0] / delta - 0.5 + eps)
    j0 = math.ceil(region.lo[1] / delta + 0.5 - eps)
    j1 = math.floor(region.hi[1] / delta - 0.5 + eps)
    if i1 < i0 or j1 < j0:
        raise ParameterError("region holds no complete grid box at this delta")
    return i0, i1, j0, j1


def compute_Y_field(tess: Tessellation, delta: float, region: Window) -> GridField:
    """Per-box count of cell centers; boxes are half-open so no double counting."""
    if delta <= 0:
        raise ParameterError("delta must be positive")
    if not tess.core_window.contains_window(region, tol=tess.tol):
        raise ParameterError("region must lie inside the core window")
    i0, i1, j0, j1 = region_index_range(region, delta)
    values = np.zeros((i1 - i0 + 1, j1 - j0 + 1), int)
    centers = tess.centers
    idx = np.floor(centers / delta + 0.5).astype(int)
    for (ci, cj) in idx:
        if i0 <= ci <= i1 and j0 <= cj <= j1:
            values[ci - i0, cj - j0] += 1
    return GridField(delta=delta, i0=i0, j0=j0, values=values)


def _poly_box_overlaps(poly: np.ndarray, normals: np.ndarray, offsets: np.ndarray,
                       lo, hi, tol: float) -> bool:
    """Positive-area convex-polygon/axis-box intersection via separating axes.

    Boundary-only contact does not count: a cell coinciding with a box must
    not register against the box's neighbors.
    """
    if poly[:, 0].min() >= hi[0] - tol or poly[:, 0].max() <= lo[0] + tol:
        return False
    if poly[:, 1].min() >= hi[1] - tol or poly[:, 1].max() <= lo[1] + tol:
        return False
    mins = (np.where(normals[:, 0] > 0, lo[0], hi[0]) * normals[:, 0]
            + np.where(normals[:, 1] > 0, lo[1], hi[1]) * normals[:, 1])
    return bool(np.all(mins < offsets - tol))


def _edge_normals(poly: np.ndarray):
    edges = np.roll(poly, -1, axis=0) - poly
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])  # outward for CCW
    lens = np.linalg.norm(normals, axis=1)
    good = lens > 0
    normals = normals[good] / lens[good][:, None]
    offsets = (normals * poly[good]).sum(axis=1)
    return normals, offsets


def compute_U_field(tess: Tessellation, delta: float, region: Window) -> GridField:
    """Indicator per box: some single cell meets it and a box at index
    distance >= 2 (in l-infinity)."""
    if delta <= 0:
        raise ParameterError("delta must be positive")
    if not tess.core_window.contains_window(region, tol=tess.tol):
        raise ParameterError("region must lie inside the core window")
    i0, i1, j0, j1 = region_index_range(region, delta)
    values = np.zeros((i1 - i0 + 1, j1 - j0 + 1), np.int8)
    tol = tess.tol
    bb = tess.bboxes
    # cells whose bbox meets the region are the only ones that can set U
    cand = np.nonzero((bb[:, 0] <= (i1 + 0.5) * delta + tol)
                      & (bb[:, 2] >= (i0 - 0.5) * delta - tol)
                      & (bb[:, 1] <= (j1 + 0.5) * delta + tol)
                      & (bb[:, 3] >= (j0 - 0.5) * delta - tol))[0]
    for c in cand:
        poly = tess.cells[c].polygon
        normals, offsets = _edge_normals(poly)
        a0 = math.ceil(bb[c, 0] / delta - 0.5 - 1e-12)
        a1 = math.floor(bb[c, 2] / delta + 0.5 + 1e-12)
        b0 = math.ceil(bb[c, 1] / delta - 0.5 - 1e-12)
        b1 = math.floor(bb[c, 3] / delta + 0.5 + 1e-12)
        boxes = []
        for a in range(a0, a1 + 1):
            for b in range(b0, b1 + 1):
                lo = ((a - 0.5) * delta, (b - 0.5) * delta)
                hi = ((a + 0.5) * delta, (b + 0.5) * delta)
                if _poly_box_overlaps(poly, normals, offsets, lo, hi, tol):
                    boxes.append((a, b))
        if not boxes:
            continue
        arr = np.array(boxes)
        amin, bmin = arr.min(axis=0)
        amax, bmax = arr.max(axis=0)
        for (a, b) in boxes:
            if i0 <= a <= i1 and j0 <= b <= j1:
                if max(amax - a, a - amin, bmax - b, b - bmin) >= 2:
                    values[a - i0, b - j0] = 1
    return GridField(delta=delta, i0=i0, j0=j0, values=values)


@dataclass
class AnimalSearchResult:
    n: int
    best_value: float
    best_animal: list
    method: str
    exact_flag: bool


def _grid_neighbors(ni: int, nj: int):
    def nbrs(k: int):
        i, j = divmod(k, nj)
        out = []
        if i > 0:
            out.append(k - nj)
        if i < ni - 1:
            out.append(k + nj)
        if j > 0:
            out.append(k - 1)
        if j < nj - 1:
            out.append(k + 1)
        return out
    return nbrs


def _exact_max(values: np.ndarray, n: int, anchor_id: int | None, budget: int):
    """Best sum over connected n-box sets (duplicate-free DFS growth).

    anchor_id fixes a box the animal must contain; otherwise every animal is
    generated once, rooted at its minimum linear index.
    """
    ni, nj = values.shape
    flat = values.ravel()
    nbrs = _grid_neighbors(ni, nj)
    state = {"nodes": 0, "complete": True, "best": -math.inf, "animal": None}

    def grow(candidates, chosen, total, seen, min_id):
        if state["nodes"] >= budget:
            state["complete"] = False
            return
        while candidates:
            if state["nodes"] >= budget:
                state["complete"] = False
                return
            v = candidates.pop()
            state["nodes"] += 1
            chosen.append(v)
            total += flat[v]
            if len(chosen) == n:
                if total > state["best"]:
                    state["best"] = total
                    state["animal"] = list(chosen)
            else:
                new = [w for w in nbrs(v) if w not in seen and w >= min_id]
                seen.update(new)
                grow(candidates + new, chosen, total, seen, min_id)
                seen.difference_update(new)
                if not state["complete"]:
                    chosen.pop()
                    return
            chosen.pop()
            total -= flat[v]

    if anchor_id is not None:
        seen = {anchor_id}
        grow([anchor_id], [], 0.0, seen, 0)
    else:
        for root in range(ni * nj):
            seen = {root}
            grow([root], [], 0.0, seen, root)
            if not state["complete"]:
                break
    return state["best"], state["animal"], state["complete"]


def _connected_after_swap(animal: set, drop: int, add: int, nbrs) -> bool:
    new_set = (animal - {drop}) | {add}
    start = next(iter(new_set))
    stack = [start]
    seen = {start}
    while stack:
        v = stack.pop()
        for w in nbrs(v):
            if w in new_set and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(new_set)


def _local_search_max(values: np.ndarray, n: int, anchor_id: int | None,
                      rng: np.random.Generator, starts: int = 32, patience: int = 200,
                      kicks: int = 4):
    ni, nj = values.shape
    flat = values.ravel().astype(float)
    nbrs = _grid_neighbors(ni, nj)
    n_boxes = ni * nj

    def boundary_of(animal):
        out = set()
        for v in animal:
            out.update(x for x in nbrs(v) if x not in animal)
        return out

    def grow(animal, eps):
        boundary = boundary_of(animal)
        while len(animal) < n:
            cand = list(boundary)
            if rng.random() < eps:
                pick = cand[int(rng.integers(len(cand)))]
            else:
                vals = flat[cand]
                top = np.nonzero(vals >= vals.max())[0]
                pick = cand[int(top[rng.integers(len(top))])]
            animal.add(pick)
            boundary.discard(pick)
            boundary.update(w for w in nbrs(pick) if w not in animal)
        return animal

    def descend(animal):
        # only value-improving (add u, drop w) swaps are proposed; patience
        # bounds the connectivity rejections per improvement round
        boundary = boundary_of(animal)
        while True:
            droppable = [v for v in animal if v != anchor_id]
            if not droppable:
                break
            a_min = min(flat[a] for a in droppable)
            u_cands = [b for b in boundary if flat[b] > a_min]
            if not u_cands:
                break
            improved = False
            for _ in range(patience):
                u = u_cands[int(rng.integers(len(u_cands)))]
                w_cands = [a for a in droppable if flat[a] < flat[u]]
                w = w_cands[int(rng.integers(len(w_cands)))]
                if _connected_after_swap(animal, w, u, nbrs):
                    animal.discard(w)
                    animal.add(u)
                    boundary = boundary_of(animal)
                    improved = True
                    break
            if not improved:
                break
        return animal

    def kick(animal):
        # keep a random connected half, regrow with moderate exploration
        keep_size = max(1, (n + 1) // 2)
        seed = anchor_id if anchor_id is not None else \
            sorted(animal)[int(rng.integers(len(animal)))]
        kept = {seed}
        frontier = [seed]
        while len(kept) < keep_size and frontier:
            v = frontier[int(rng.integers(len(frontier)))]
            nxt = [w for w in nbrs(v) if w in animal and w not in kept]
            if not nxt:
                frontier.remove(v)
                continue
            w = nxt[int(rng.integers(len(nxt)))]
            kept.add(w)
            frontier.append(w)
        return grow(kept, 0.3)

    best_total = -math.inf
    best_animal = None
    ranked = list(np.argsort(-flat, kind="stable"))
    for s in range(starts):
        if anchor_id is not None:
            start = anchor_id
        elif s < max(1, starts // 2) and s < n_boxes:
            start = int(ranked[s])
        else:
            start = int(rng.integers(n_boxes))
        eps = 0.0 if s == 0 else s / starts
        animal = descend(grow({start}, eps))
        total = sum(flat[v] for v in animal)
        for _ in range(kicks):
            trial = descend(kick(set(animal)))
            t_total = sum(flat[v] for v in trial)
            if t_total > total:
                animal, total = trial, t_total
        if total > best_total:
            best_total = total
            best_animal = sorted(animal)
    return best_total, best_animal


def greedy_animal_max(field: GridField, n: int, method: str = "exact",
                      budget: int = 500_000, anchor=None,
                      rng: np.random.Generator | None = None,
                      starts: int = 32, patience: int = 200) -> AnimalSearchResult:
    """Connected n-box set maximizing the field average.

    anchor=None searches animals anywhere in the field; anchor=(i, j) pins
    the animal to contain that box (the per-site variant). Exact enumeration
    falls back to local search when its node budget is exhausted.
    """
    ni, nj = field.values.shape
    if n < 1 or n > ni * nj:
        raise ParameterError(f"animal size {n} does not fit the field")
    anchor_id = None
    if anchor is not None:
        ai, aj = int(anchor[0]), int(anchor[1])
        if not field.contains_index(ai, aj):
            raise ParameterError(f"anchor box {anchor} outside the field range")
        anchor_id = (ai - field.i0) * nj + (aj - field.j0)
    if method not in ("exact", "local_search"):
        raise ParameterError("method must be 'exact' or 'local_search'")
    if rng is None:
        rng = np.random.default_rng(0)

    used_method = method
    exact_flag = False
    if method == "exact":
        total, animal, complete = _exact_max(field.values, n, anchor_id, budget)
        if complete and animal is not None:
            exact_flag = True
        else:
            used_method = "local_search"
    if used_method == "local_search":
        total, animal = _local_search_max(field.values, n, anchor_id, rng,
                                          starts=starts, patience=patience)
    if animal is None:
        raise ParameterError("no connected n-set found (field too small)")
    abs_animal = [(field.i0 + k // nj, field.j0 + k % nj) for k in sorted(animal)]
    return AnimalSearchResult(n=n, best_value=float(total) / n, best_animal=abs_animal,
                              method=used_method, exact_flag=exact_flag)
