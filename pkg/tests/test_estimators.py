import numpy as np
import pytest
from scipy import ndimage

from tessperc.errors import ParameterError
from tessperc.estimators import (count_spanning_clusters, estimate_crossing_prob,
                                 estimate_pc, estimate_theta,
                                 estimate_trifurcation_density,
                                 find_trifurcations, ggr_diagnostics,
                                 verify_crossing_recursion)
from tessperc.experiment import ExperimentSpec
from tessperc.geometry import Window
from tessperc.percolation import Coloring, CrossingQuery, color
from tessperc.point_process import ProcessSpec
from tessperc.streams import stream
from tessperc.tessellation import build_lattice_tessellation


def pv_spec(window, p, replicates, seed, gamma=1.0, adjacency="face"):
    return ExperimentSpec(process=ProcessSpec("poisson", {"gamma": gamma}),
                          window=window, adjacency=adjacency, p=p,
                          replicates=replicates, master_seed=seed)


def lattice_spec(window, p, replicates, seed, spacing=1.0):
    return ExperimentSpec(process=ProcessSpec("square_lattice", {"spacing": spacing}),
                          window=window, adjacency="face", p=p,
                          replicates=replicates, master_seed=seed)


def test_crossing_prob_trivial_endpoints():
    spec = pv_spec(Window((0, 0), (8, 8)), 1.0, 50, 1)
    q = CrossingQuery(rect=spec.window)
    assert estimate_crossing_prob(spec, q, 1.0, 50).estimate == 1.0
    assert estimate_crossing_prob(spec, q, 0.0, 50).estimate == 0.0


def test_theta_trivials_and_monotonicity():
    spec = pv_spec(Window((-8, -8), (8, 8)), 0.5, 60, 2)
    ones = estimate_theta(spec, 1.0, (2, 4), 60)
    assert [r.estimate for r in ones] == [1.0, 1.0]
    zeros = estimate_theta(spec, 0.0, (2, 4), 60)
    assert [r.estimate for r in zeros] == [0.0, 0.0]
    mid = estimate_theta(spec, 0.5, (2, 4, 6), 60)
    ests = [r.estimate for r in mid]
    assert all(b <= a for a, b in zip(ests, ests[1:]))
    with pytest.raises(ParameterError):
        estimate_theta(spec, 0.5, (2, 20), 60)  # exceeds half-width
    with pytest.raises(ParameterError):
        estimate_theta(spec, 0.5, (4, 2), 60)


def lattice_crossover_oracle(L, reps, seed, p_lo=0.5, p_hi=0.7, iters=12):
    """Direct site-percolation crossing bisection, independent of the package."""
    s = ndimage.generate_binary_structure(2, 1)
    rng = np.random.default_rng(seed)

    def crossing_prob(p):
        hits = 0
        for _ in range(reps):
            grid = rng.random((L, L)) < p
            lab, _ = ndimage.label(grid, structure=s)
            left = set(lab[:, 0][lab[:, 0] > 0])
            right = set(lab[:, -1][lab[:, -1] > 0])
            hits += bool(left & right)
        return hits / reps

    lo, hi = p_lo, p_hi
    for _ in range(iters):
        mid = (lo + hi) / 2
        if crossing_prob(mid) < 0.5:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def test_pc_square_lattice_contains_oracle_crossover():
    window = Window((0, 0), (32, 32))
    spec = lattice_spec(window, 0.5, 150, 11)
    est = estimate_pc(spec, 0.02, 150)
    oracle = lattice_crossover_oracle(32, 150, 3)
    lo, hi = est.interval
    assert lo - 0.02 <= oracle <= hi + 0.02
    assert any(abs(p - 0.5) < 0.3 for p, _ in est.probes)


def test_pc_single_row_degenerate():
    # one row of cells: crossing needs every cell black, so the crossover
    # sits near 1 (1-D behavior)
    window = Window((0, 0), (30, 1))
    spec = lattice_spec(window, 0.5, 120, 13)
    est = estimate_pc(spec, 0.05, 120)
    assert est.interval[0] >= 0.9


def test_pc_tolerance_validation():
    spec = lattice_spec(Window((0, 0), (8, 8)), 0.5, 60, 1)
    with pytest.raises(ParameterError):
        estimate_pc(spec, 0.001, 60)


def test_spanning_counts_trivials():
    spec = pv_spec(Window((0, 0), (10, 10)), 1.0, 100, 3)
    res1 = count_spanning_clusters(spec, 1.0, spec.window, 100)
    assert res1.histogram == {1: 100}
    res0 = count_spanning_clusters(spec, 0.0, spec.window, 100)
    assert res0.histogram == {0: 100}
    assert res0.prob_at_least(1) == 0.0


def cross_fixture(black_tips=("N", "E", "W")):
    """5x5 unit-cell field holding a plus-shaped configuration around the hub."""
    tess = build_lattice_tessellation("square", 1.0, (-0.5, -0.5),
                                      Window((-2.5, -2.5), (2.5, 2.5)))
    uniforms = np.ones(len(tess))
    centers = {tuple(np.round(c.center).astype(int)): i for i, c in enumerate(tess.cells)}
    black_cells = [(0, 0), (0, 1), (0, -1), (1, 0), (-1, 0)]  # hub + inner arms
    tips = {"N": (0, 2), "S": (0, -2), "E": (2, 0), "W": (-2, 0)}
    black_cells += [tips[t] for t in black_tips]
    for key in black_cells:
        uniforms[centers[key]] = 0.0
    return tess, Coloring(uniforms, 0.5)


def test_trifurcation_hand_fixture():
    tess, coloring = cross_fixture()
    res = find_trifurcations(tess, coloring, r1=1, r2=1.5, window=tess.core_window)
    assert res.candidates == 1
    assert res.count == 1
    assert res.points == [(0.0, 0.0)]
    assert res.density == pytest.approx(1 / 25)


def test_trifurcation_two_tips_insufficient():
    tess, coloring = cross_fixture(black_tips=("N", "E"))
    res = find_trifurcations(tess, coloring, r1=1, r2=1.5, window=tess.core_window)
    assert res.count == 0


def test_trifurcation_needs_black_ball():
    tess, coloring = cross_fixture()
    res = find_trifurcations(tess, coloring.at_p(0.0), r1=1, r2=1.5,
                             window=tess.core_window)
    assert res.count == 0
    with pytest.raises(ParameterError):
        find_trifurcations(tess, coloring, r1=0, r2=1.5, window=tess.core_window)


def test_trifurcation_ball_containment_r2():
    # shrinking r2 below the ball extent disqualifies the hub
    tess, coloring = cross_fixture()
    res = find_trifurcations(tess, coloring, r1=1, r2=0.4, window=tess.core_window)
    assert res.count == 0


def test_trifurcation_density_driver():
    spec = pv_spec(Window((-15, -15), (15, 15)), 0.8, 10, 21)
    out = estimate_trifurcation_density(spec, 0.8, 1, 3.0, spec.window, 10)
    assert out["replicates"] == 10
    assert out["density"] >= 0.0


def test_ggr_square_lattice_g2():
    spec = lattice_spec(Window((-10.5, -10.5), (10.5, 10.5)), 0.5, 30, 5)
    res = ggr_diagnostics(spec, 0.5, 4, 30)
    assert all(v == pytest.approx(4.0) for v in res.g2_avg)
    res0 = ggr_diagnostics(spec, 0.0, 4, 30)
    assert all(v == 0.0 for v in res0.g1_avg)


def test_ggr_ball_must_fit():
    spec = lattice_spec(Window((-3.5, -3.5), (3.5, 3.5)), 0.5, 10, 5)
    with pytest.raises(ParameterError):
        ggr_diagnostics(spec, 0.5, 10, 10)


def test_recursion_trivial_endpoints():
    spec = pv_spec(Window((0, 0), (18, 6)), 1.0, 60, 7)
    rep1 = verify_crossing_recursion(spec, 1.0, 2.0, 60)
    assert rep1["lhs"] == 0.0 and rep1["holds"]
    rep0 = verify_crossing_recursion(spec, 0.0, 2.0, 60)
    assert rep0["lhs"] == 1.0
    assert rep0["rhs"] == pytest.approx(49.0)
    assert rep0["holds"]


def test_recursion_window_validation():
    spec = pv_spec(Window((0, 0), (10, 10)), 0.7, 60, 7)
    with pytest.raises(ParameterError):
        verify_crossing_recursion(spec, 0.7, 2.0, 60)


def test_recursion_small_supercritical():
    spec = pv_spec(Window((0, 0), (36, 12)), 0.75, 80, 9)
    rep = verify_crossing_recursion(spec, 0.75, 4.0, 80)
    assert rep["holds"]
    assert set(rep["rhs_terms"]) >= {"f_H", "f_V", "bottom_H0", "top_V2"}
