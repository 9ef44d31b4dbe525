import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poissonfpp.environment import (
    BoxSpec,
    PointConfig,
    Window,
    cell_of,
    config_from_dict,
    config_to_dict,
    count_in_box,
    derive_seed,
    insert_points,
    load_config,
    rotate_config,
    sample_poisson,
    save_config,
    unit_square_counts,
)
from poissonfpp.errors import BadIntensity, BadWindow, DuplicatePoint

W = Window(-3.0, 5.0, -2.0, 4.0)


def test_window_validation():
    with pytest.raises(BadWindow):
        Window(0, 0, 0, 1)
    with pytest.raises(BadWindow):
        Window(0, 1, 2, 1)
    with pytest.raises(BadWindow):
        Window(0, math.inf, 0, 1)


def test_sampling_is_deterministic():
    a = sample_poisson(W, 1.0, 42)
    b = sample_poisson(W, 1.0, 42)
    assert a.points.tobytes() == b.points.tobytes()
    assert sample_poisson(W, 1.0, 43).points.tobytes() != a.points.tobytes()


def test_sampling_intensity_errors_and_zero():
    for bad in (-1.0, math.nan, math.inf):
        with pytest.raises(BadIntensity):
            sample_poisson(W, bad, 1)
    assert len(sample_poisson(W, 0.0, 1)) == 0


def test_unit_square_count_mean_and_variance():
    unit = Window(0, 1, 0, 1)
    counts = np.array([len(sample_poisson(unit, 1.0, derive_seed(9, r))) for r in range(100_000)])
    assert abs(counts.mean() - 1) <= 0.01
    assert abs(counts.var() - 1) <= 0.03


def test_disjoint_box_counts_uncorrelated():
    win = Window(-0.5, 1.5, -0.5, 0.5)
    a, b = BoxSpec((0, 0)), BoxSpec((1, 0))
    ca, cb = [], []
    for r in range(10_000):
        cfg = sample_poisson(win, 1.0, derive_seed(3, r))
        ca.append(count_in_box(cfg, a))
        cb.append(count_in_box(cfg, b))
    assert abs(np.corrcoef(ca, cb)[0, 1]) < 0.05


def test_points_inside_window_and_distinct():
    cfg = sample_poisson(W, 3.0, 5)
    assert np.all(W.contains(cfg.points))
    with pytest.raises(DuplicatePoint):
        PointConfig([(0, 0), (0, 0)], W)
    with pytest.raises(ValueError):
        PointConfig([(100, 0)], W)


def test_points_are_readonly():
    cfg = sample_poisson(W, 1.0, 1)
    with pytest.raises(ValueError):
        cfg.points[0, 0] = 0.0


def test_count_in_box_examples():
    empty = PointConfig(np.empty((0, 2)), W)
    assert count_in_box(empty, BoxSpec((0, 0))) == 0
    one = PointConfig([(0.1, 0.1)], W)
    assert count_in_box(one, BoxSpec((0, 0))) == 1
    edge = PointConfig([(0.5, 0.0)], W)
    assert count_in_box(edge, BoxSpec((0, 0))) == 0
    assert count_in_box(edge, BoxSpec((1, 0))) == 1
    k3 = PointConfig([(1.49, -1.5), (1.5, 0.0)], W)
    assert count_in_box(k3, BoxSpec((0, 0), 3.0)) == 1
    assert count_in_box(k3, BoxSpec((1, 0), 3.0)) == 1


@given(st.integers(0, 2**63))
def test_grid_consistency(seed):
    cfg = sample_poisson(W, 2.0, seed)
    cells = cell_of(cfg.points)
    for k, c in enumerate(map(tuple, cells.tolist())):
        assert k in cfg.grid[c]
    assert sum(len(v) for v in cfg.grid.values()) == len(cfg)
    # half-open convention: the cell contains the point
    for (i, j), idx in cfg.grid.items():
        p = cfg.points[list(idx)]
        assert np.all((p[:, 0] >= i - 0.5) & (p[:, 0] < i + 0.5) & (p[:, 1] >= j - 0.5) & (p[:, 1] < j + 0.5))


def test_insert_points_examples():
    empty = PointConfig(np.empty((0, 2)), W)
    cfg = insert_points(empty, [(1.0, 1.0), (2.0, 2.0)])
    assert cfg.points.tolist() == [[1.0, 1.0], [2.0, 2.0]]
    assert count_in_box(cfg, BoxSpec((1, 1))) == 1
    more = insert_points(cfg, [(1.2, 1.1)])
    assert count_in_box(more, BoxSpec((1, 1))) == 2
    assert len(cfg) == 2  # original unchanged
    assert more.points[:2].tolist() == cfg.points.tolist()
    with pytest.raises(DuplicatePoint):
        insert_points(cfg, [(1.0, 1.0)])
    assert more.seed_record["inserted"] == 3


@given(st.integers(0, 2**32))
def test_insert_associative(seed):
    rng = np.random.default_rng(seed)
    base = sample_poisson(W, 1.0, seed)
    A = rng.uniform([W.xmin, W.ymin], [W.xmax, W.ymax], (3, 2))
    B = rng.uniform([W.xmin, W.ymin], [W.xmax, W.ymax], (2, 2))
    one = insert_points(insert_points(base, A), B)
    two = insert_points(base, np.vstack((A, B)))
    assert one.points.tobytes() == two.points.tobytes()
    assert unit_square_counts(one).values == unit_square_counts(two).values


def test_unit_square_counts():
    empty = PointConfig(np.empty((0, 2)), Window(-0.5, 2.5, -0.5, 1.5))
    f = unit_square_counts(empty)
    assert f.total() == 0 and len(f.values) == 3 * 2 + 3 + 2 + 1  # cells meeting the closed window
    win = Window(-0.5, 2.4, -0.5, 1.4)
    ones = PointConfig([(i, j) for i in range(3) for j in range(2)], win)
    g = unit_square_counts(ones)
    assert all(g[(i, j)] == 1 for i in range(3) for j in range(2))
    cfg = sample_poisson(W, 2.5, 8)
    assert unit_square_counts(cfg).total() == len(cfg)


def test_roundtrip_file(tmp_path):
    cfg = sample_poisson(W, 1.5, 77)
    path = tmp_path / "env.json"
    save_config(path, cfg)
    back = load_config(path)
    assert back.points.tobytes() == cfg.points.tobytes()
    assert back.window == cfg.window
    doc = config_to_dict(cfg)
    assert set(doc) == {"window", "seed", "intensity", "points"}
    assert config_from_dict(doc).points.tobytes() == cfg.points.tobytes()


def test_rotate_config_keeps_points_inside():
    cfg = sample_poisson(W, 1.0, 4)
    r = rotate_config(cfg, 0.9)
    assert len(r) == len(cfg)
    assert np.allclose(np.hypot(*r.points.T), np.hypot(*cfg.points.T))


def test_derive_seed_properties():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    seeds = {derive_seed(7, t, r) for t in range(4) for r in range(200)}
    assert len(seeds) == 800
    assert derive_seed(1, 2) != derive_seed(2, 1)
