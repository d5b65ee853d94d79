"""Scale-mixing gap curves, the line-process counterexample, the lattice
mixture demo, tameness curves and the white-circuit probe."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .errors import ParameterError
from .estimators import _guarded, _run_replicates
from .experiment import ExperimentSpec, build_tessellation, coloring_for
from .geometry import Window
from .gridfield import (GridField, compute_U_field, compute_Y_field,
                        greedy_animal_max, region_index_range, _edge_normals,
                        _poly_box_overlaps)
from .percolation import CrossingQuery, crossing, spanning_cluster_count
from .point_process import ProcessSpec, sample_poisson_lines, sample_process
from .stats import PercResult, mean_ci, wilson_sigma
from .streams import stream


def gap_from_indicators(e, ep):
    """Empirical |cov| of two indicator sequences with its standard error.

    P[E and E'] - P[E] P[E'] equals the empirical covariance of the
    indicators, so the per-replicate products (e_i - mean)(ep_i - mean)
    give an SE that accounts for the replicate-level correlation.
    """
    e = np.asarray(e, float)
    ep = np.asarray(ep, float)
    n = len(e)
    if n < 2 or len(ep) != n:
        raise ParameterError("need two indicator vectors of equal length >= 2")
    pe, pep = e.mean(), ep.mean()
    w = (e - pe) * (ep - pep)
    cov = float(w.mean())
    sigma = float(w.std(ddof=1) / math.sqrt(n))
    return abs(cov), sigma, float((e * ep).mean()), float(pe), float(pep)


@dataclass
class SmpGapCurve:
    t_values: list
    p_joint: list
    p_product: list
    gap: list
    sigma: list
    replicates: int
    meta: dict = field(default_factory=dict)

    def ci(self, k: int, z: float = 1.96):
        return (max(0.0, self.gap[k] - z * self.sigma[k]), self.gap[k] + z * self.sigma[k])

    def rows(self):
        for k, t in enumerate(self.t_values):
            lo, hi = self.ci(k)
            yield {"t": t, "p_joint": self.p_joint[k], "p_product": self.p_product[k],
                   "gap": self.gap[k], "ci_lo": lo, "ci_hi": hi}


def _smp_crossing_rep(spec: ExperimentSpec, rects, rep: int):
    tess = build_tessellation(spec, rep)
    col = coloring_for(spec, rep, tess)
    out = []
    for rq, rqp in rects:
        e = crossing(tess, col, CrossingQuery(rect=rq, direction="horizontal",
                                              color="black", adjacency=spec.adjacency))
        ep = crossing(tess, col, CrossingQuery(rect=rqp, direction="horizontal",
                                               color="black", adjacency=spec.adjacency))
        out.append((1 if e else 0, 1 if ep else 0))
    return out


def _smp_void_rep(spec: ExperimentSpec, rects, rep: int):
    rng = stream(spec.master_seed, rep, "smp-void")
    config = sample_process(spec.process, spec.window, rng)
    pts = config.points
    out = []
    for rq, rqp in rects:
        e = 0 if len(pts) and rq.contains_points(pts).any() else 1
        ep = 0 if len(pts) and rqp.contains_points(pts).any() else 1
        out.append((e, ep))
    return out


def smp_gap(spec: ExperimentSpec, event_family: str, Q: Window, Qprime: Window,
            t_schedule, replicates: int, workers: int = 1) -> SmpGapCurve:
    """|P[E_t and E'_t] - P[E_t] P[E'_t]| per t for events determined by the
    rectangles tQ and tQ' (scaled about the global origin).

    crossing family: black horizontal crossings at the spec's p.
    void family: no process point in the scaled rectangle.
    """
    if Q.intersects(Qprime):
        raise ParameterError("Q and Q' must be disjoint")
    t_schedule = [float(t) for t in t_schedule]
    rects = []
    for t in t_schedule:
        rq, rqp = Q.scaled(t), Qprime.scaled(t)
        if not (spec.window.contains_window(rq, tol=1e-9)
                and spec.window.contains_window(rqp, tol=1e-9)):
            raise ParameterError(f"scaled rectangles at t={t} leave the core window")
        rects.append((rq, rqp))
    if event_family == "crossing":
        fn = _guarded(partial(_smp_crossing_rep, spec, rects))
    elif event_family == "void":
        fn = _guarded(partial(_smp_void_rep, spec, rects))
    else:
        raise ParameterError("event_family must be 'crossing' or 'void'")
    vals, failed = _run_replicates(fn, replicates, workers)
    curve = SmpGapCurve(t_values=t_schedule, p_joint=[], p_product=[], gap=[], sigma=[],
                        replicates=len(vals), meta={"family": event_family, "failed": failed})
    for k in range(len(t_schedule)):
        e = [v[k][0] for v in vals]
        ep = [v[k][1] for v in vals]
        gap, sigma, pj, pe, pep = gap_from_indicators(e, ep)
        curve.p_joint.append(pj)
        curve.p_product.append(pe * pep)
        curve.gap.append(gap)
        curve.sigma.append(sigma)
    return curve


def _line_crosses_lr(theta, r, rect: Window):
    """Mask of lines x.(cos t, sin t) = r entering rect's left side and
    leaving its right side."""
    s = np.sin(theta)
    c = np.cos(theta)
    ok = np.abs(s) > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        y_left = (r - rect.lo[0] * c) / s
        y_right = (r - rect.hi[0] * c) / s
    inside = ((y_left >= rect.lo[1]) & (y_left <= rect.hi[1])
              & (y_right >= rect.lo[1]) & (y_right <= rect.hi[1]))
    return ok & inside


LINE_SMP_Q1 = Window((-0.5, -0.5), (0.5, 0.5))
LINE_SMP_Q2 = Window((1.0, -0.5), (2.0, 0.5))


def line_process_smp_failure(line_intensity: float, t_schedule, replicates: int,
                             angle_tol: float, master_seed: int = 0) -> SmpGapCurve:
    """Gap curve for near-horizontal line crossings of two scaled squares.

    E_t: some line within angle_tol of horizontal crosses t*Q1 left to right
    (Q1 the unit square at the origin, Q2 = Q1 + (1.5, 0)). A single long
    line induces both events at every scale, so the gap stays bounded away
    from zero: the scale-mixing property fails for line processes.
    """
    t_schedule = [float(t) for t in t_schedule]
    t_max = max(t_schedule)
    corners = np.abs(np.array([LINE_SMP_Q2.hi, LINE_SMP_Q2.lo, LINE_SMP_Q1.lo]))
    disc_radius = t_max * float(np.sqrt((corners ** 2).sum(axis=1)).max()) + 1.0
    indicators = {t: [] for t in t_schedule}
    for rep in range(replicates):
        rng = stream(master_seed, rep, "lines")
        lines = sample_poisson_lines(line_intensity, disc_radius, rng)
        theta, r = (lines[:, 0], lines[:, 1]) if len(lines) else (np.empty(0), np.empty(0))
        near_horiz = np.abs(theta - np.pi / 2.0) < angle_tol
        for t in t_schedule:
            e = bool(np.any(near_horiz & _line_crosses_lr(theta, r, LINE_SMP_Q1.scaled(t))))
            ep = bool(np.any(near_horiz & _line_crosses_lr(theta, r, LINE_SMP_Q2.scaled(t))))
            indicators[t].append((1 if e else 0, 1 if ep else 0))
    curve = SmpGapCurve(t_values=t_schedule, p_joint=[], p_product=[], gap=[], sigma=[],
                        replicates=replicates,
                        meta={"family": "line", "angle_tol": angle_tol,
                              "line_intensity": line_intensity})
    for t in t_schedule:
        e = [v[0] for v in indicators[t]]
        ep = [v[1] for v in indicators[t]]
        gap, sigma, pj, pe, pep = gap_from_indicators(e, ep)
        curve.p_joint.append(pj)
        curve.p_product.append(pe * pep)
        curve.gap.append(gap)
        curve.sigma.append(sigma)
    return curve


@dataclass
class MixtureResult:
    square: PercResult
    hexagonal: PercResult
    separation: float
    pooled: float
    p: float


def _mixture_rep(spec: ExperimentSpec, p: float, window: Window, rep: int):
    tess = build_tessellation(spec, rep)
    col = coloring_for(spec, rep, tess, p)
    return 1 if spanning_cluster_count(tess, col, window, adjacency="face") >= 1 else 0


def mixture_nonergodic_demo(p: float, window: Window, replicates_per_component: int,
                            master_seed: int = 0, spacing: float = 2.0,
                            workers: int = 1) -> MixtureResult:
    """Spanning frequencies of the two mixture components (randomly shifted
    square vs hexagonal lattices) and their separation.

    The pooled value is the spanning frequency of the 50/50 mixture; between
    the two lattice thresholds it sits strictly between 0 and 1, which is the
    non-ergodicity on display.
    """
    if not (0.0 < p < 1.0):
        raise ParameterError("p must be strictly between 0 and 1")
    results = {}
    for kind, seed in (("square_lattice", master_seed), ("hexagonal_lattice", master_seed + 1)):
        spec = ExperimentSpec(
            process=ProcessSpec(kind, {"spacing": spacing, "random_shift": True}),
            window=window, adjacency="face", p=p,
            replicates=replicates_per_component, master_seed=seed)
        fn = _guarded(partial(_mixture_rep, spec, p, window))
        vals, failed = _run_replicates(fn, replicates_per_component, workers)
        results[kind] = PercResult.from_counts(sum(vals), len(vals), failed=failed,
                                               spec_hash=spec.spec_hash())
    sq, hx = results["square_lattice"], results["hexagonal_lattice"]
    pooled = (sq.successes + hx.successes) / (sq.replicates + hx.replicates)
    return MixtureResult(square=sq, hexagonal=hx,
                         separation=abs(sq.estimate - hx.estimate), pooled=pooled, p=p)


@dataclass
class TamenessReport:
    delta: float
    n_schedule: list
    replicates: int
    curves: dict          # name -> {"mean": [...], "ci": [(lo, hi), ...]}
    limsup_proxy: dict    # name -> running max of means over the top half
    t1_bounded: bool
    t2_margin: float
    failed: int
    method: str
    region: Window


def _tameness_rep(spec: ExperimentSpec, delta: float, schedule: tuple, region: Window,
                  method: str, rep: int):
    tess = build_tessellation(spec, rep)
    y_field = compute_Y_field(tess, delta, region)
    u_field = compute_U_field(tess, delta, region)
    out = {}
    for n in schedule:
        for name, fld in (("Y", y_field), ("U", u_field)):
            rng = stream(spec.master_seed, rep, f"animal:{name}:{n}")
            anchored = greedy_animal_max(fld, n, method=method, anchor=(0, 0), rng=rng)
            free = greedy_animal_max(fld, n, method=method, anchor=None, rng=rng)
            out[f"anchored_{name}:{n}"] = anchored.best_value
            out[f"free_{name}:{n}"] = free.best_value
    return out


def tameness_report(spec: ExperimentSpec, delta: float, n_schedule, replicates: int,
                    region: Window | None = None, method: str = "local_search",
                    workers: int = 1) -> TamenessReport:
    """Greedy-animal average curves for the Y and U fields.

    Curves come in anchored (animal contains the origin box, the per-site
    quantity the definitions use) and free (animal anywhere in the region)
    variants; verdicts use the anchored curves. t1_bounded checks that the
    anchored Y curve is flat or decreasing over the top half of the
    schedule; t2_margin is 1 minus the largest anchored U value.
    """
    schedule = tuple(int(n) for n in n_schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ParameterError("n_schedule must be strictly increasing")
    if region is None:
        region = spec.window.expand(-2.0 * delta)
    i0, i1, j0, j1 = region_index_range(region, delta)
    if not (i0 <= 0 <= i1 and j0 <= 0 <= j1):
        raise ParameterError("region must contain the origin box for anchored animals")
    if (i1 - i0 + 1) * (j1 - j0 + 1) < max(schedule):
        raise ParameterError("region too small for the largest animal in the schedule")
    fn = _guarded(partial(_tameness_rep, spec, delta, schedule, region, method))
    vals, failed = _run_replicates(fn, replicates, workers)
    curves = {}
    for which in ("anchored_Y", "anchored_U", "free_Y", "free_U"):
        means, cis = [], []
        for n in schedule:
            m, ci = mean_ci([v[f"{which}:{n}"] for v in vals])
            means.append(m)
            cis.append(ci)
        curves[which] = {"mean": means, "ci": cis}
    half = len(schedule) // 2
    proxies = {k: max(v["mean"][half:]) for k, v in curves.items()}
    y_mean = curves["anchored_Y"]["mean"]
    y_ci = curves["anchored_Y"]["ci"]
    slack = ((y_ci[-1][1] - y_ci[-1][0]) + (y_ci[half][1] - y_ci[half][0])) / 2.0
    t1_bounded = y_mean[-1] <= y_mean[half] + slack
    t2_margin = 1.0 - max(curves["anchored_U"]["mean"])
    return TamenessReport(delta=delta, n_schedule=list(schedule), replicates=len(vals),
                          curves=curves, limsup_proxy=proxies, t1_bounded=bool(t1_bounded),
                          t2_margin=float(t2_margin), failed=failed, method=method,
                          region=region)


@dataclass
class PeierlsResult:
    declined: bool
    reason: str
    cycle_lengths: list
    estimates: list
    sigmas: list
    bounds: list
    below_bound: list
    replicates: int


def _ring_boxes(length: int, rng: np.random.Generator):
    """A random axis-aligned box ring of the given cycle length around the origin."""
    if length < 8 or length % 2:
        raise ParameterError("cycle length must be an even number >= 8")
    semi = (length + 4) // 2  # w + h
    w_opts = [w for w in range(3, semi - 2) if semi - w >= 3]
    w = int(w_opts[rng.integers(len(w_opts))]) if w_opts else 3
    h = semi - w
    ilo = -int(rng.integers(1, w - 1))
    jlo = -int(rng.integers(1, h - 1))
    boxes = []
    for a in range(ilo, ilo + w):
        for b in (jlo, jlo + h - 1):
            boxes.append((a, b))
    for b in range(jlo + 1, jlo + h - 1):
        for a in (ilo, ilo + w - 1):
            boxes.append((a, b))
    return boxes


def peierls_probe(spec: ExperimentSpec, p: float, delta: float, window: Window,
                  replicates: int, c3: float, c4: float,
                  cycle_lengths=(8, 16, 32)) -> PeierlsResult:
    """P[every box of a random circuit meets a white cell], versus the
    all-white-circuit bound evaluated with empirically measured constants.

    c3 (< 1) and c4 come from a prior tameness report (the U and Y curve
    levels); c3 >= 1 declines the probe.
    """
    if c3 >= 1.0:
        return PeierlsResult(declined=True, reason=f"empirical c3={c3} >= 1",
                             cycle_lengths=list(cycle_lengths), estimates=[], sigmas=[],
                             bounds=[], below_bound=[], replicates=0)
    exponent = 3.0 ** 4 * c4 / (1.0 - c3)
    counts = {ln: 0 for ln in cycle_lengths}
    for rep in range(replicates):
        tess = build_tessellation(spec, rep)
        col = coloring_for(spec, rep, tess, p)
        white = ~col.black
        bb = tess.bboxes
        cache: dict = {}

        def box_white(ix, jy):
            key = (ix, jy)
            if key in cache:
                return cache[key]
            lo = ((ix - 0.5) * delta, (jy - 0.5) * delta)
            hi = ((ix + 0.5) * delta, (jy + 0.5) * delta)
            if not window.contains_window(Window(lo, hi), tol=tess.tol):
                raise ParameterError("circuit box leaves the analysis window")
            cand = np.nonzero((bb[:, 0] <= hi[0]) & (bb[:, 2] >= lo[0])
                              & (bb[:, 1] <= hi[1]) & (bb[:, 3] >= lo[1]))[0]
            hit = False
            for c in cand:
                if not white[c]:
                    continue
                normals, offsets = _edge_normals(tess.cells[c].polygon)
                if _poly_box_overlaps(tess.cells[c].polygon, normals, offsets, lo, hi,
                                      tess.tol):
                    hit = True
                    break
            cache[key] = hit
            return hit

        for ln in cycle_lengths:
            rng = stream(spec.master_seed, rep, f"cycle:{ln}")
            ring = _ring_boxes(ln, rng)
            if all(box_white(a, b) for a, b in ring):
                counts[ln] += 1
    estimates, sigmas, bounds, below = [], [], [], []
    for ln in cycle_lengths:
        est = counts[ln] / replicates
        sig = wilson_sigma(counts[ln], replicates)
        bound = (1.0 - p ** exponent) ** ((1.0 - c3) * ln / 9.0)
        estimates.append(est)
        sigmas.append(sig)
        bounds.append(bound)
        below.append(bool(est <= bound + 3.0 * sig))
    return PeierlsResult(declined=False, reason="", cycle_lengths=list(cycle_lengths),
                         estimates=estimates, sigmas=sigmas, bounds=bounds,
                         below_bound=below, replicates=replicates)
