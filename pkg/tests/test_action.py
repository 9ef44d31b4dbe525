import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poissonfpp.action import (
    ActionParams,
    PathSeq,
    TimedPath,
    continuous_action,
    kinetic_energy,
    optimal_time_allocation,
    path_action,
    path_length,
)
from poissonfpp.environment import PointConfig, Window, rotate_config, sample_poisson
from poissonfpp.errors import BadIndex, BadParameter, InfiniteEnergy
from poissonfpp.geometry import rotate

W = Window(-10, 10, -10, 10)
EMPTY = PointConfig(np.empty((0, 2)), W)


def cfg(*pts):
    return PointConfig(list(pts), W)


def test_params():
    assert ActionParams.scaled(0.5, 8).s == 4
    for bad in (0.0, -1.0, math.nan, math.inf):
        with pytest.raises(BadParameter):
            ActionParams(bad)


def test_length_examples():
    assert path_length(PathSeq((0, 0), (), (3, 4)), EMPTY) == 5
    assert path_length(PathSeq((0, 0), (0,), (2, 0)), cfg((1, 1))) == pytest.approx(2 * math.sqrt(2))
    assert path_length(PathSeq((1, 1), (), (1, 1)), EMPTY) == 0
    with pytest.raises(BadIndex):
        path_length(PathSeq((0, 0), (3,), (1, 0)), cfg((1, 1)))
    with pytest.raises(BadParameter):
        PathSeq((0, 0), (0, 0), (1, 0))


def test_action_examples():
    p2 = ActionParams(2.0)
    assert path_action(PathSeq((0, 0), (), (2, 0)), EMPTY, p2) == 1
    assert path_action(PathSeq((0, 0), (0,), (2, 0)), cfg((1, 0)), p2) == 0
    assert path_action(PathSeq((0, 0), (0,), (2, 0)), cfg((1, 1)), p2) == pytest.approx(1)


def test_time_allocation_examples():
    c = cfg((3, 0))
    path = PathSeq((0, 0), (0,), (3, 4))
    tp = optimal_time_allocation(path, c, ActionParams(1.0))
    assert np.allclose(np.diff(tp.times), [3 / 7, 4 / 7])
    assert kinetic_energy(tp) == pytest.approx(49 / 2)
    one = optimal_time_allocation(PathSeq((0, 0), (), (1, 0)), EMPTY, ActionParams(2.5))
    assert one.times.tolist() == [0.0, 2.5]
    still = optimal_time_allocation(PathSeq((1, 1), (), (1, 1)), EMPTY, ActionParams(2.0))
    assert kinetic_energy(still) == 0


def test_continuous_examples():
    tp = TimedPath([(0, 0), (2, 0)], [0, 2])
    assert continuous_action(tp, EMPTY) == 1
    assert continuous_action(tp, cfg((1, 0))) == 0
    assert continuous_action(tp, cfg((1, 1e-9))) == 1
    with pytest.raises(InfiniteEnergy):
        kinetic_energy(TimedPath([(0, 0), (1, 0), (2, 0)], [0, 0, 1]))
    with pytest.raises(BadParameter):
        TimedPath([(0, 0), (1, 0)], [0.5, 1])


def _random_path(seed, n_pts=15, n_int=5):
    rng = np.random.default_rng(seed)
    c = PointConfig(rng.uniform(-8, 8, (n_pts, 2)), W)
    k = int(rng.integers(0, n_int + 1))
    interior = tuple(rng.permutation(n_pts)[:k].tolist())
    return c, PathSeq(tuple(rng.uniform(-8, 8, 2)), interior, tuple(rng.uniform(-8, 8, 2))), ActionParams(float(rng.uniform(0.5, 20)))


@given(st.integers(0, 2**32))
def test_continuous_equals_discrete(seed):
    c, path, p = _random_path(seed)
    tp = optimal_time_allocation(path, c, p)
    assert continuous_action(tp, c) == pytest.approx(path_action(path, c, p), abs=1e-9)


@given(st.integers(0, 2**32))
def test_perturbed_allocation_is_never_cheaper(seed):
    c, path, p = _random_path(seed)
    tp = optimal_time_allocation(path, c, p)
    ke = kinetic_energy(tp)
    rng = np.random.default_rng(seed)
    dt = np.diff(tp.times)
    for _ in range(50):
        w = dt * rng.uniform(0.5, 1.5, len(dt))
        w *= p.s / w.sum()
        other = TimedPath(tp.vertices, np.concatenate(([0.0], np.cumsum(w))))
        assert kinetic_energy(other) >= ke - 1e-9 * max(1.0, ke)


@given(st.integers(0, 2**32), st.floats(0.1, 10), st.floats(1.01, 5))
def test_action_decreases_in_s(seed, s, factor):
    c, path, _ = _random_path(seed)
    a1 = path_action(path, c, ActionParams(s))
    a2 = path_action(path, c, ActionParams(s * factor))
    if path_length(path, c) > 0:
        assert a2 < a1


@given(st.integers(0, 2**32), st.floats(-7, 7))
def test_action_rotation_invariant(seed, th):
    c, path, p = _random_path(seed)
    rc = rotate_config(c, th)
    rp = PathSeq(rotate(path.start, th), path.interior, rotate(path.terminal, th))
    assert path_action(rp, rc, p) == pytest.approx(path_action(path, c, p), abs=1e-9)


@given(st.integers(0, 2**32))
def test_action_lower_bound(seed):
    c, path, p = _random_path(seed)
    a = path_action(path, c, p)
    assert a >= -path.n_points
    if path_length(path, c) > 0:
        assert a > -path.n_points
