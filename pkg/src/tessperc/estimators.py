"""Monte Carlo estimators over tessellation percolation replicates.

Each estimator builds a fresh tessellation + coloring per replicate from
deterministic streams, counts events, and reports Wilson intervals. Build
failures (edge effects, degenerate inputs) abort the replicate and are
counted; more than 1% failures fails the whole run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import ConstructionError, EdgeEffectError, EstimatorFailure, ParameterError
from .geometry import Window
from .graphs import graph_ball, outer_boundary
from .percolation import (Coloring, CrossingQuery, UnionFind, cluster_reach,
                          crossing, spanning_cluster_count)
from .stats import PercResult, mean_ci, wilson_sigma
from .streams import stream
from .experiment import ExperimentSpec, build_tessellation, coloring_for
from .tessellation import AdjacencyGraph, Tessellation, build_adjacency, zero_cell

FAILURE_BUDGET = 0.01


def _run_replicates(fn, replicates: int, workers: int = 1):
    """Run a per-replicate closure, separating failures from results.

    Returns (ordered results, failed count); raises when the failure budget
    is exceeded.
    """
    from .experiment import parallel_map

    results = parallel_map(fn, replicates, workers=workers)
    ok = [r for r in results if r is not None]
    failed = replicates - len(ok)
    if failed > FAILURE_BUDGET * replicates:
        raise EstimatorFailure(
            f"{failed}/{replicates} replicates failed construction (> {FAILURE_BUDGET:.0%})")
    return ok, failed


def _guarded_call(fn, rep):
    try:
        return fn(rep)
    except (ConstructionError, EdgeEffectError):
        return None


def _guarded(fn):
    """Picklable wrapper mapping construction failures to None."""
    return partial(_guarded_call, fn)


def _crossing_rep(spec: ExperimentSpec, query: CrossingQuery, p: float, rep: int):
    tess = build_tessellation(spec, rep)
    col = coloring_for(spec, rep, tess, p)
    return 1 if crossing(tess, col, query) else 0


def estimate_crossing_prob(spec: ExperimentSpec, query: CrossingQuery, p: float,
                           replicates: int, workers: int = 1) -> PercResult:
    """Fraction of replicates with the requested crossing, fresh instance each."""
    if replicates < 50:
        raise ParameterError("crossing estimator needs at least 50 replicates")
    fn = _guarded(partial(_crossing_rep, spec, query, p))
    vals, failed = _run_replicates(fn, replicates, workers)
    return PercResult.from_counts(sum(vals), len(vals), failed=failed,
                                  spec_hash=spec.spec_hash())


def _theta_rep(spec: ExperimentSpec, p: float, radii: tuple, rep: int):
    tess = build_tessellation(spec, rep)
    col = coloring_for(spec, rep, tess, p)
    graph = build_adjacency(tess, spec.adjacency)
    root = zero_cell(tess)
    reach = cluster_reach(tess, graph, col, root)
    return tuple(1 if reach >= r else 0 for r in radii)


def estimate_theta(spec: ExperimentSpec, p: float, radii, replicates: int,
                   workers: int = 1) -> list[PercResult]:
    """Finite proxy of the percolation function: P[zero cell's black cluster
    reaches Euclidean distance r from the origin], per radius.

    All radii are evaluated on the same replicates, so the estimates are
    nonincreasing in r by construction.
    """
    radii = tuple(float(r) for r in radii)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ParameterError("radii must be strictly increasing")
    cw = spec.window
    half_width = min(-cw.lo[0], -cw.lo[1], cw.hi[0], cw.hi[1])
    if radii[-1] > half_width:
        raise ParameterError("max radius exceeds the core half-width")
    fn = _guarded(partial(_theta_rep, spec, p, radii))
    vals, failed = _run_replicates(fn, replicates, workers)
    out = []
    for k, r in enumerate(radii):
        hits = sum(v[k] for v in vals)
        res = PercResult.from_counts(hits, len(vals), failed=failed,
                                     spec_hash=spec.spec_hash(), radius=r)
        out.append(res)
    return out


@dataclass
class PcEstimate:
    interval: tuple
    probes: list  # (p, PercResult) in probe order
    separated: bool

    @property
    def width(self) -> float:
        return self.interval[1] - self.interval[0]


def estimate_pc(spec: ExperimentSpec, tolerance: float, replicates_per_probe: int,
                workers: int = 1) -> PcEstimate:
    """Bracket the crossing-probability crossover of the core-window square.

    Bisection on p: a probe moves an endpoint only when its Wilson interval
    is fully on one side of 1/2; a straddling probe stops the refinement and
    the current bracket is returned flagged as non-separable if it is still
    wider than the tolerance.
    """
    if tolerance < 0.01:
        raise ParameterError("tolerance must be at least 0.01")
    query = CrossingQuery(rect=spec.window, direction="horizontal", color="black",
                          adjacency=spec.adjacency)
    probes: list = []

    def probe(p: float) -> PercResult:
        probe_spec = ExperimentSpec(
            process=spec.process, window=spec.window, adjacency=spec.adjacency,
            buffer=spec.buffer, p=p, replicates=replicates_per_probe,
            master_seed=spec.master_seed + len(probes) + 1, params=dict(spec.params))
        res = estimate_crossing_prob(probe_spec, query, p, replicates_per_probe,
                                     workers=workers)
        probes.append((p, res))
        return res

    lo, hi = 0.0, 1.0
    separated = True
    while hi - lo > tolerance:
        mid = (lo + hi) / 2.0
        res = probe(mid)
        if res.ci[1] < 0.5:
            lo = mid
        elif res.ci[0] > 0.5:
            hi = mid
        else:
            # straddling probe: the crossover is statistically at mid; try to
            # certify a bracket one tolerance to either side
            lo2 = max(lo, mid - tolerance)
            hi2 = min(hi, mid + tolerance)
            if lo2 > lo and probe(lo2).ci[1] < 0.5:
                lo = lo2
            else:
                separated = False
            if hi2 < hi and probe(hi2).ci[0] > 0.5:
                hi = hi2
            else:
                separated = False
            break
    return PcEstimate(interval=(lo, hi), probes=probes, separated=separated)


@dataclass
class SpanningCounts:
    histogram: dict
    replicates: int
    failed: int
    spec_hash: str = ""

    def prob_at_least(self, k: int) -> float:
        hits = sum(v for c, v in self.histogram.items() if c >= k)
        return hits / self.replicates if self.replicates else float("nan")

    def wilson_sigma_at_least(self, k: int) -> float:
        hits = sum(v for c, v in self.histogram.items() if c >= k)
        return wilson_sigma(hits, self.replicates)


def _spanning_rep(spec: ExperimentSpec, p: float, window: Window, rep: int):
    tess = build_tessellation(spec, rep)
    col = coloring_for(spec, rep, tess, p)
    return spanning_cluster_count(tess, col, window, adjacency=spec.adjacency,
                                  direction="horizontal")


def count_spanning_clusters(spec: ExperimentSpec, p: float, window: Window,
                            replicates: int, workers: int = 1) -> SpanningCounts:
    """Histogram of the number of distinct left-right spanning black clusters."""
    if replicates < 100:
        raise ParameterError("spanning counter needs at least 100 replicates")
    if not spec.window.contains_window(window, tol=1e-9):
        raise ParameterError("analysis window must lie inside the core window")
    fn = _guarded(partial(_spanning_rep, spec, p, window))
    vals, failed = _run_replicates(fn, replicates, workers)
    hist: dict = {}
    for v in vals:
        hist[v] = hist.get(v, 0) + 1
    return SpanningCounts(histogram=dict(sorted(hist.items())), replicates=len(vals),
                          failed=failed, spec_hash=spec.spec_hash())


@dataclass
class TrifurcationResult:
    count: int
    density: float
    candidates: int
    skipped: int
    points: list = field(default_factory=list)


def _polygon_in_box(poly: np.ndarray, lo, hi, tol: float) -> bool:
    return bool((poly[:, 0] >= lo[0] - tol).all() and (poly[:, 0] <= hi[0] + tol).all()
                and (poly[:, 1] >= lo[1] - tol).all() and (poly[:, 1] <= hi[1] + tol).all())


def find_trifurcations(tess: Tessellation, coloring: Coloring, r1: int, r2: float,
                       window: Window, adjacency: str = "face") -> TrifurcationResult:
    """Count grid points of 3*r2*Z^2 in the window that are trifurcations.

    A candidate x qualifies when the graph ball B_r1 around its cell is all
    black, fits in x + [-r2, r2]^2, and after whitening the ball at least
    three distinct window-boundary-touching black clusters meet the ball's
    outer boundary ("infinite" replaced by its finite window surrogate).
    Candidates whose ball leaves the window are skipped and counted.
    """
    if r1 < 1:
        raise ParameterError("r1 must be at least 1")
    if r2 <= 0:
        raise ParameterError("r2 must be positive")
    graph = build_adjacency(tess, adjacency)
    black = coloring.black
    tol = tess.tol
    step = 3.0 * r2
    i0 = math.ceil((window.lo[0]) / step)
    i1 = math.floor((window.hi[0]) / step)
    j0 = math.ceil((window.lo[1]) / step)
    j1 = math.floor((window.hi[1]) / step)
    # cluster labels among black cells (whitened ball handled per candidate)
    count = 0
    skipped = 0
    candidates = 0
    points = []
    win_lo, win_hi = np.asarray(window.lo), np.asarray(window.hi)
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            x = np.array([i * step, j * step])
            candidates += 1
            root = tess.locate(x)
            ball = graph_ball(graph, root, r1).vertices
            if any(not _polygon_in_box(tess.cells[v].polygon, window.lo, window.hi, tol)
                   for v in ball):
                skipped += 1
                continue
            if not all(black[v] for v in ball):
                continue
            lo_box = x - r2
            hi_box = x + r2
            if not all(_polygon_in_box(tess.cells[v].polygon, lo_box, hi_box, tol)
                       for v in ball):
                continue
            # whiten the ball, relabel, count boundary-touching clusters on its rim
            active = black.copy()
            for v in ball:
                active[v] = False
            ids = [k for k in range(len(tess.cells)) if active[k]]
            pos = {cid: idx for idx, cid in enumerate(ids)}
            uf = UnionFind(len(ids))
            for cid in ids:
                for w in graph.neighbors[cid]:
                    if w > cid and active[w]:
                        uf.union(pos[cid], pos[w])
            rim = [v for v in outer_boundary(graph, ball) if active[v]]
            touching_labels = set()
            for cid in ids:
                if not _polygon_in_box(tess.cells[cid].polygon, win_lo, win_hi, -tol):
                    touching_labels.add(uf.find(pos[cid]))
            rim_labels = {uf.find(pos[v]) for v in rim}
            if len(rim_labels & touching_labels) >= 3:
                count += 1
                points.append((float(x[0]), float(x[1])))
    return TrifurcationResult(count=count, density=count / window.area,
                              candidates=candidates, skipped=skipped, points=points)


def _trifurcation_rep(spec: ExperimentSpec, p: float, r1: int, r2: float,
                      window: Window, rep: int):
    tess = build_tessellation(spec, rep)
    col = coloring_for(spec, rep, tess, p)
    res = find_trifurcations(tess, col, r1, r2, window, adjacency=spec.adjacency)
    return (res.count, res.candidates, res.skipped)


def estimate_trifurcation_density(spec: ExperimentSpec, p: float, r1: int, r2: float,
                                  window: Window, replicates: int,
                                  workers: int = 1) -> dict:
    """Mean trifurcation count and density over replicates."""
    fn = _guarded(partial(_trifurcation_rep, spec, p, r1, r2, window))
    vals, failed = _run_replicates(fn, replicates, workers)
    mean_count, ci = mean_ci([v[0] for v in vals])
    return {
        "mean_count": mean_count,
        "count_ci": ci,
        "density": mean_count / window.area,
        "candidates": vals[0][1] if vals else 0,
        "mean_skipped": float(np.mean([v[2] for v in vals])) if vals else 0.0,
        "replicates": len(vals),
        "failed": failed,
        "window_area": window.area,
    }


@dataclass
class GgrResult:
    ns: list
    ball_sizes: list
    g1_avg: list
    g1_ci: list
    g2_avg: list
    truncated: bool


def ggr_diagnostics(spec: ExperimentSpec, p: float, n_max: int, replicates: int) -> GgrResult:
    """Ball averages of the two uniqueness diagnostics on one instance.

    g1(v) is estimated over replicated colorings as the fraction in which v
    is adjacent to >= 2 distinct boundary-touching ("infinite") black
    clusters; g2(v) = |outer boundary of {v}| is deterministic.
    """
    tess = build_tessellation(spec, 0)
    graph = build_adjacency(tess, spec.adjacency)
    ball = graph_ball(graph, graph.root, n_max)
    if ball.truncated:
        raise ParameterError("n_max ball leaves the core window; enlarge the window")
    dist = ball.distances
    shells: dict = {}
    for v, d in dist.items():
        shells.setdefault(d, []).append(v)
    ball_members = [sorted(v for v, d in dist.items() if d <= n) for n in range(n_max + 1)]

    n_cells = len(tess.cells)
    per_rep_l = []
    for rep in range(replicates):
        col = coloring_for(spec, rep, tess, p)
        black = col.black
        uf = UnionFind(n_cells)
        for v in range(n_cells):
            if not black[v]:
                continue
            for w in graph.neighbors[v]:
                if w > v and black[w]:
                    uf.union(v, w)
        touching = set()
        for v in range(n_cells):
            if black[v] and graph.boundary_flags[v]:
                touching.add(uf.find(v))
        l_indicator = {}
        for v in dist:
            labels = {uf.find(w) for w in graph.neighbors[v] if black[w]}
            l_indicator[v] = 1 if len(labels & touching) >= 2 else 0
        per_rep_l.append(l_indicator)

    g1_avg, g1_ci, g2_avg, sizes = [], [], [], []
    ns = list(range(n_max + 1))
    for n in ns:
        members = ball_members[n]
        sizes.append(len(members))
        per_rep_means = [sum(l[v] for v in members) / len(members) for l in per_rep_l]
        m, ci = mean_ci(per_rep_means)
        g1_avg.append(m)
        g1_ci.append(ci)
        g2_avg.append(sum(len(graph.neighbors[v]) for v in members) / len(members))
    return GgrResult(ns=ns, ball_sizes=sizes, g1_avg=g1_avg, g1_ci=g1_ci,
                     g2_avg=g2_avg, truncated=ball.truncated)


def _recursion_rep(spec: ExperimentSpec, p: float, t: float, rep: int):
    tess = build_tessellation(spec, rep)
    col = coloring_for(spec, rep, tess, p)
    adj = spec.adjacency

    def h_fail(x0, y0, x1, y1):
        q = CrossingQuery(rect=Window((x0, y0), (x1, y1)), direction="horizontal",
                          color="black", adjacency=adj)
        return 0 if crossing(tess, col, q) else 1

    def v_fail(x0, y0, x1, y1):
        q = CrossingQuery(rect=Window((x0, y0), (x1, y1)), direction="vertical",
                          color="black", adjacency=adj)
        return 0 if crossing(tess, col, q) else 1

    out = {"lhs": h_fail(0, 0, 9 * t, 3 * t)}
    for strip, y0 in (("bottom", 0.0), ("top", 2 * t)):
        out[f"{strip}_strip"] = h_fail(0, y0, 9 * t, y0 + t)
        for k, x0 in enumerate((0, 2 * t, 4 * t, 6 * t)):
            out[f"{strip}_H{k}"] = h_fail(x0, y0, x0 + 3 * t, y0 + t)
        for k, x0 in enumerate((2 * t, 4 * t, 6 * t)):
            out[f"{strip}_V{k}"] = v_fail(x0, y0, x0 + t, y0 + t)
    out["f_H"] = out["bottom_H0"]
    out["f_V"] = v_fail(0, 0, t, 3 * t)
    return out


def verify_crossing_recursion(spec: ExperimentSpec, p: float, t: float,
                              replicates: int, workers: int = 1) -> dict:
    """Estimate both sides of the 9t x 3t crossing chain and check the
    square-renormalization inequality within Monte Carlo slack.

    lhs = P[no horizontal crossing of [0,9t]x[0,3t]] is checked against
    (7 max{P[H(3t,t) fails], P[V(t,3t) fails]})^2 plus 3x the joint CI
    width; every raw estimate is returned.
    """
    big = Window((0.0, 0.0), (9 * t, 3 * t))
    if not spec.window.contains_window(big, tol=1e-9):
        raise ParameterError("core window must contain the 9t x 3t rectangle")
    fn = _guarded(partial(_recursion_rep, spec, p, t))
    vals, failed = _run_replicates(fn, replicates, workers)
    n = len(vals)
    keys = vals[0].keys()
    counts = {k: sum(v[k] for v in vals) for k in keys}
    est = {k: counts[k] / n for k in keys}
    sig = {k: wilson_sigma(counts[k], n) for k in keys}
    max_key = "f_H" if est["f_H"] >= est["f_V"] else "f_V"
    maxf, w_max = est[max_key], sig[max_key]
    rhs = (7.0 * maxf) ** 2
    slack = 3.0 * sig["lhs"] + 49.0 * ((maxf + 3.0 * w_max) ** 2 - maxf ** 2)
    return {
        "t": t, "p": p, "replicates": n, "failed": failed,
        "lhs": est["lhs"], "lhs_sigma": sig["lhs"],
        "rhs_terms": {k: est[k] for k in sorted(keys) if k != "lhs"},
        "max_term": max_key, "max_value": maxf,
        "rhs": rhs, "slack": slack,
        "inequality_margin": rhs + slack - est["lhs"],
        "holds": est["lhs"] <= rhs + slack,
    }
