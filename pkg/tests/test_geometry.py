import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poissonfpp.errors import BadExponent, BadParameter, EmptyPath
from poissonfpp.geometry import (
    Cylinder,
    Line,
    Point2,
    Segment,
    SinglePoint,
    closest_point,
    line_target,
    make_variance_segments,
    rotate,
    rotate_target,
    target_distances,
    transversal_deviation,
    unit,
)

coords = st.floats(-1e3, 1e3, allow_nan=False)
angles = st.floats(-10, 10, allow_nan=False)


def test_point_rejects_nonfinite():
    with pytest.raises(BadParameter):
        Point2(math.nan, 0.0)
    with pytest.raises(BadParameter):
        Point2(0.0, math.inf)


def test_rotate_examples():
    p = rotate((1, 0), math.pi / 2)
    assert p.x == pytest.approx(0, abs=1e-15) and p.y == pytest.approx(1)
    assert tuple(rotate((0, 0), 1.234)) == (0.0, 0.0)
    q = rotate((1, 1), math.pi)
    assert q.x == pytest.approx(-1) and q.y == pytest.approx(-1)


@given(coords, coords, angles)
def test_rotate_roundtrip_and_norm(x, y, th):
    p = Point2(x, y)
    back = rotate(rotate(p, th), -th)
    scale = max(1.0, p.norm())
    assert abs(back.x - x) <= 1e-12 * scale and abs(back.y - y) <= 1e-12 * scale
    assert abs(rotate(p, th).norm() - p.norm()) <= 1e-12 * scale


def test_closest_point_examples():
    q, d = closest_point(Line(Point2(2, 0), Point2(0, 1)), (0, 0))
    assert (q.x, q.y, d) == (2, 0, 2)
    q, d = closest_point(Segment(Point2(2, -1), Point2(2, 0)), (1, 1))
    assert (q.x, q.y) == (2, 0) and d == pytest.approx(math.sqrt(2))
    q, d = closest_point(SinglePoint(Point2(3, 4)), (0, 0))
    assert d == 5


def test_target_validation():
    with pytest.raises(BadParameter):
        Segment(Point2(1, 1), Point2(1, 1))
    with pytest.raises(BadParameter):
        Line(Point2(0, 0), Point2(1, 1))
    with pytest.raises(BadParameter):
        Cylinder(Point2(1, 0), 0.0)


@given(coords, coords, st.integers(0, 2**32 - 1))
def test_closest_point_beats_dense_samples(x, y, seed):
    rng = np.random.default_rng(seed)
    a = Point2(*rng.uniform(-50, 50, 2))
    b = Point2(*rng.uniform(-50, 50, 2))
    seg = Segment(a, b)
    q, d = closest_point(seg, (x, y))
    u = rng.random(1000)
    samples = np.column_stack((a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)))
    assert d <= np.hypot(samples[:, 0] - x, samples[:, 1] - y).min() + 1e-9
    # and q is on the target
    assert closest_point(seg, q)[1] <= 1e-9


def test_target_distances_matches_scalar(rng):
    pts = rng.uniform(-10, 10, (50, 2))
    for tgt in (line_target(3.0), Segment(Point2(1, 2), Point2(4, -3)), SinglePoint(Point2(1, 1)), Line(Point2(0, 0), unit(1, 1))):
        vec = target_distances(tgt, pts)
        ref = [closest_point(tgt, p)[1] for p in pts]
        assert np.allclose(vec, ref, atol=1e-12)


def test_rotate_target_is_equivariant(rng):
    tgt = Segment(Point2(3, -1), Point2(3, 2))
    th = 0.7
    rt = rotate_target(tgt, th)
    for p in rng.uniform(-5, 5, (20, 2)):
        assert closest_point(rt, rotate(p, th))[1] == pytest.approx(closest_point(tgt, p)[1], abs=1e-12)


def test_transversal_deviation_examples():
    assert transversal_deviation([(0, 0), (5, 0)], (1, 0)) == 0
    assert transversal_deviation([(1, 2), (3, -7)], (1, 0)) == 7
    assert transversal_deviation([(0, 0), (1, 1)], (0, 1)) == 1
    with pytest.raises(EmptyPath):
        transversal_deviation([], (1, 0))


@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=10), angles, st.floats(-100, 100))
def test_transversal_deviation_axis_translation(pts, th, shift):
    d = unit(math.cos(th), math.sin(th))
    moved = [(x + shift * d.x, y + shift * d.y) for x, y in pts]
    assert transversal_deviation(moved, d) == pytest.approx(transversal_deviation(pts, d), abs=1e-9)


def test_cylinder_matches_deviation(rng):
    pts = rng.normal(size=(30, 2))
    w = transversal_deviation(pts, (1, 0))
    assert Cylinder(Point2(1, 0), w + 1e-12).contains(pts)
    assert not Cylinder(Point2(1, 0), w * 0.99).contains(pts)


def test_variance_segments_example():
    S, Sp, th = make_variance_segments(16, 0.6)
    w = 16**0.6
    assert th == pytest.approx(16**-0.4) and th == pytest.approx(0.32988, abs=1e-5)
    assert (S.a.x, S.a.y) == pytest.approx((16, -2.6390), abs=1e-4)
    assert (S.b.x, S.b.y) == pytest.approx((16, 7.9170), abs=1e-4)
    assert w == pytest.approx(5.27803, abs=1e-5)
    S, Sp, _ = make_variance_segments(100, 0.6)
    assert S.length == pytest.approx(31.6979, abs=1e-4) and Sp.length == pytest.approx(S.length)


def test_variance_segments_offsets():
    t, gp = 50.0, 0.6
    S, Sp, th = make_variance_segments(t, gp)
    w = t**gp
    assert (S.a.y + S.b.y) / 2 == pytest.approx(w / 2)
    mid = rotate(((Sp.a.x + Sp.b.x) / 2, (Sp.a.y + Sp.b.y) / 2), -th)
    assert mid.y == pytest.approx(-w / 2) and mid.x == pytest.approx(t)


@pytest.mark.parametrize("t", [16, 64, 256])
@pytest.mark.parametrize("gp", [0.55, 0.6, 0.7])
def test_variance_segments_hausdorff(t, gp):
    S, Sp, _ = make_variance_segments(t, gp)
    bound = 4 * t ** (2 * gp - 1)
    u = np.linspace(0, 1, 401)
    for A, B in ((S, Sp), (Sp, S)):
        pts = np.column_stack((A.a.x + u * (B.a.x * 0 + A.b.x - A.a.x), A.a.y + u * (A.b.y - A.a.y)))
        assert target_distances(B, pts).max() <= bound


def test_variance_segments_errors():
    for gp in (0.5, 1.0, 0.3, math.nan):
        with pytest.raises(BadExponent):
            make_variance_segments(10, gp)
    with pytest.raises(BadParameter):
        make_variance_segments(1.0, 0.6)
