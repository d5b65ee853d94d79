import math

import numpy as np
import pytest

from tessperc.errors import ParameterError
from tessperc.geometry import Window, clip_polygon_to_window, polygon_area
from tessperc.gridfield import (GridField, compute_U_field, compute_Y_field,
                                greedy_animal_max)
from tessperc.point_process import PointConfiguration, sample_matern_hardcore, sample_poisson
from tessperc.streams import stream
from tessperc.tessellation import build_lattice_tessellation, build_voronoi


def grid_voronoi(half=9, core=6.0):
    pts = np.array([[i, j] for i in range(-half, half + 1)
                    for j in range(-half, half + 1)], float)
    cfg = PointConfiguration(pts, Window((-half - 0.5, -half - 0.5), (half + 0.5, half + 0.5)))
    return build_voronoi(cfg, Window((-core, -core), (core, core)), 2.0)


def pv_tess(seed, side=16.0, gamma=1.0):
    core = Window((-side, -side), (side, side))
    cfg = sample_poisson(gamma, core.expand(5), stream(seed, 0, "tess"))
    return build_voronoi(cfg, core, 5.0)


def test_Y_unit_grid_aligned():
    tess = grid_voronoi()
    field = compute_Y_field(tess, 1.0, Window((-4.5, -4.5), (4.5, 4.5)))
    assert field.values.shape == (9, 9)
    assert (field.values == 1).all()


def test_Y_mass_conservation():
    tess = pv_tess(3)
    region = Window((-10, -10), (10, 10))
    field = compute_Y_field(tess, 2.0, region)
    idx = np.floor(tess.centers / 2.0 + 0.5).astype(int)
    manual = sum(1 for i, j in idx if field.contains_index(i, j))
    assert field.total() == manual


def test_Y_poisson_dispersion():
    # per-box counts of a unit Poisson process behave like Poisson(delta^2)
    counts = []
    for seed in range(12):
        tess = pv_tess(100 + seed, side=17.0)
        field = compute_Y_field(tess, 1.0, Window((-10, -10), (10, 10)))
        counts.extend(field.values.ravel().tolist())
    counts = np.array(counts, float)
    assert len(counts) >= 1000
    ratio = counts.var(ddof=1) / counts.mean()
    assert abs(ratio - 1.0) < 3 * math.sqrt(2.0 / len(counts)) + 0.05


def test_U_unit_squares_aligned_zero():
    tess = grid_voronoi()
    field = compute_U_field(tess, 1.0, Window((-4.5, -4.5), (4.5, 4.5)))
    assert (field.values == 0).all()


def test_U_giant_cell_all_ones():
    # spacing 40 lattice: one cell covers the whole region
    tess = build_lattice_tessellation("square", 40.0, (-20, -20), Window((-6, -6), (6, 6)))
    field = compute_U_field(tess, 1.0, Window((-4.5, -4.5), (4.5, 4.5)))
    assert (field.values == 1).all()


def test_U_definitional_recheck():
    tess = pv_tess(7)
    delta = 2.0
    field = compute_U_field(tess, delta, Window((-10, -10), (10, 10)))
    rng = np.random.default_rng(0)
    idx = list(field.indices())
    for _ in range(100):
        i, j = idx[rng.integers(len(idx))]
        if field.value(i, j) != 0:
            continue
        box = field.box_window(i, j)
        # no cell may meet both this box and the >=2 shell
        for c in tess.cells_meeting(box):
            poly = tess.cells[int(c)].polygon
            if len(clip_polygon_to_window(poly, box)) == 0:
                continue
            bb_lo = poly.min(axis=0)
            bb_hi = poly.max(axis=0)
            a0 = math.floor(bb_lo[0] / delta + 0.5)
            a1 = math.floor(bb_hi[0] / delta + 0.5)
            b0 = math.floor(bb_lo[1] / delta + 0.5)
            b1 = math.floor(bb_hi[1] / delta + 0.5)
            for a in range(a0, a1 + 1):
                for b in range(b0, b1 + 1):
                    if max(abs(a - i), abs(b - j)) < 2:
                        continue
                    other = Window(((a - 0.5) * delta, (b - 0.5) * delta),
                                   ((a + 0.5) * delta, (b + 0.5) * delta))
                    inter = clip_polygon_to_window(poly, other)
                    assert len(inter) == 0 or abs(polygon_area(inter)) < 1e-12


def test_field_region_validation():
    tess = grid_voronoi()
    with pytest.raises(ParameterError):
        compute_Y_field(tess, 1.0, Window((-20, -20), (20, 20)))
    with pytest.raises(ParameterError):
        compute_Y_field(tess, 0.0, Window((-2, -2), (2, 2)))


def test_animal_constant_field():
    field = GridField(1.0, 0, 0, np.full((6, 6), 3.0))
    for n in (1, 4, 9):
        for method in ("exact", "local_search"):
            res = greedy_animal_max(field, n, method=method)
            assert res.best_value == pytest.approx(3.0)
            assert len(res.best_animal) == n


def test_animal_single_hot_box():
    values = np.zeros((7, 7))
    values[3, 3] = 100.0
    field = GridField(1.0, 0, 0, values)
    res = greedy_animal_max(field, 3, method="exact")
    assert res.best_value == pytest.approx(100.0 / 3.0)
    assert (3, 3) in res.best_animal
    ls = greedy_animal_max(field, 3, method="local_search",
                           rng=np.random.default_rng(1))
    assert ls.best_value == pytest.approx(100.0 / 3.0)


def test_animal_local_matches_exact_100_trials():
    rng = np.random.default_rng(42)
    for trial in range(100):
        values = rng.poisson(3.0, size=(6, 6)).astype(float)
        field = GridField(1.0, 0, 0, values)
        n = int(rng.integers(2, 9))
        exact = greedy_animal_max(field, n, method="exact")
        local = greedy_animal_max(field, n, method="local_search",
                                  rng=np.random.default_rng(trial))
        assert local.best_value <= exact.best_value + 1e-9
        assert local.best_value == pytest.approx(exact.best_value)


def test_animal_dominates_adversarial_set():
    rng = np.random.default_rng(9)
    values = rng.poisson(2.0, size=(8, 8)).astype(float)
    field = GridField(1.0, 0, 0, values)
    # adversarial connected 5-set: a vertical bar through the max box
    i, j = np.unravel_index(np.argmax(values), values.shape)
    i = int(min(max(i, 0), 3))
    bar = [(i + k, int(j)) for k in range(5)]
    bar_value = sum(values[a, b] for a, b in bar) / 5
    for method in ("exact", "local_search"):
        res = greedy_animal_max(field, 5, method=method,
                                rng=np.random.default_rng(0))
        assert res.best_value >= bar_value - 1e-9


def test_animal_anchored_vs_free():
    rng = np.random.default_rng(17)
    values = rng.poisson(3.0, size=(6, 6)).astype(float)
    field = GridField(1.0, -3, -3, values)
    free = greedy_animal_max(field, 4, method="exact")
    anchored = greedy_animal_max(field, 4, method="exact", anchor=(0, 0))
    assert anchored.best_value <= free.best_value + 1e-9
    assert (0, 0) in anchored.best_animal


def test_animal_budget_fallback():
    rng = np.random.default_rng(3)
    field = GridField(1.0, 0, 0, rng.poisson(2.0, size=(12, 12)).astype(float))
    res = greedy_animal_max(field, 10, method="exact", budget=200,
                            rng=np.random.default_rng(0))
    assert res.method == "local_search"
    assert not res.exact_flag
    full = greedy_animal_max(field, 4, method="exact")
    assert full.exact_flag


def test_animal_validation():
    field = GridField(1.0, 0, 0, np.zeros((3, 3)))
    with pytest.raises(ParameterError):
        greedy_animal_max(field, 10)
    with pytest.raises(ParameterError):
        greedy_animal_max(field, 2, anchor=(5, 5))
    with pytest.raises(ParameterError):
        greedy_animal_max(field, 2, method="annealing")


def test_matern_hardcore_packing_bound():
    # deterministic packing bound on Y for a hard-core process
    delta, r_hard = 2.0, 0.5
    bound = math.ceil((delta * math.sqrt(2.0) / r_hard + 1) ** 2)
    core = Window((-10, -10), (10, 10))
    for seed in range(5):
        cfg = sample_matern_hardcore(3.0, r_hard, core.expand(4), stream(seed, 0, "m2"))
        tess = build_voronoi(cfg, core, 4.0)
        field = compute_Y_field(tess, delta, Window((-8, -8), (8, 8)))
        assert field.values.max() <= bound
        res = greedy_animal_max(field, 8, method="local_search",
                                rng=np.random.default_rng(seed))
        assert res.best_value <= bound
