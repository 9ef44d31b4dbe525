"""Planar primitives: points, rotations, target sets and cylinders.

Target sets are the places a path may end: a single point, a segment, or an
infinite line stored as origin plus unit direction.  Every target exposes a
scalar ``closest_point`` and a vectorized distance used by the solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Union

import numpy as np

from .errors import BadExponent, BadParameter, BadTarget, EmptyPath

TOL = 1e-12


@dataclass(frozen=True, slots=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise BadParameter(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def as_point(p) -> Point2:
    if isinstance(p, Point2):
        return p
    x, y = p
    return Point2(float(x), float(y))


@dataclass(frozen=True, slots=True)
class SinglePoint:
    p: Point2

    kind = 0

    def params(self) -> np.ndarray:
        return np.array([self.p.x, self.p.y, 0.0, 0.0])


@dataclass(frozen=True, slots=True)
class Segment:
    a: Point2
    b: Point2

    kind = 1

    def __post_init__(self):
        if math.hypot(self.a.x - self.b.x, self.a.y - self.b.y) <= TOL:
            raise BadTarget("segment endpoints coincide")

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    def params(self) -> np.ndarray:
        return np.array([self.a.x, self.a.y, self.b.x, self.b.y])


@dataclass(frozen=True, slots=True)
class Line:
    origin: Point2
    direction: Point2

    kind = 2

    def __post_init__(self):
        if abs(self.direction.norm() - 1.0) > TOL:
            raise BadTarget("line direction must be a unit vector")

    def params(self) -> np.ndarray:
        return np.array([self.origin.x, self.origin.y, self.direction.x, self.direction.y])


TargetSet = Union[SinglePoint, Segment, Line]


@dataclass(frozen=True, slots=True)
class Cylinder:
    """Strip of half-width ``half_width`` around the axis through 0 along ``direction``."""

    direction: Point2
    half_width: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise BadParameter("cylinder half-width must be positive")
        if abs(self.direction.norm() - 1.0) > TOL:
            raise BadParameter("cylinder direction must be a unit vector")

    def contains(self, points) -> bool:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        perp = -pts[:, 0] * self.direction.y + pts[:, 1] * self.direction.x
        return bool(np.all(np.abs(perp) <= self.half_width))


def unit(x: float, y: float) -> Point2:
    n = math.hypot(x, y)
    if n == 0:
        raise BadParameter("zero vector has no direction")
    return Point2(x / n, y / n)


def rotate(p, theta: float) -> Point2:
    if not math.isfinite(theta):
        raise BadParameter("rotation angle must be finite")
    p = as_point(p)
    c, s = math.cos(theta), math.sin(theta)
    return Point2(p.x * c - p.y * s, p.x * s + p.y * c)


def rotate_array(pts: np.ndarray, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    return np.column_stack((pts[:, 0] * c - pts[:, 1] * s, pts[:, 0] * s + pts[:, 1] * c))


def rotate_target(target: TargetSet, theta: float) -> TargetSet:
    if isinstance(target, SinglePoint):
        return SinglePoint(rotate(target.p, theta))
    if isinstance(target, Segment):
        return Segment(rotate(target.a, theta), rotate(target.b, theta))
    return Line(rotate(target.origin, theta), rotate(target.direction, theta))


def closest_point(target: TargetSet, p) -> tuple[Point2, float]:
    """Nearest point of ``target`` to ``p`` and the distance to it."""
    p = as_point(p)
    if isinstance(target, SinglePoint):
        q = target.p
    elif isinstance(target, Segment):
        a, b = target.a, target.b
        dx, dy = b.x - a.x, b.y - a.y
        u = ((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)
        u = min(1.0, max(0.0, u))
        q = Point2(a.x + u * dx, a.y + u * dy)
    elif isinstance(target, Line):
        o, d = target.origin, target.direction
        u = (p.x - o.x) * d.x + (p.y - o.y) * d.y
        q = Point2(o.x + u * d.x, o.y + u * d.y)
    else:
        raise BadTarget(f"unknown target {target!r}")
    return q, math.hypot(p.x - q.x, p.y - q.y)


def target_distances(target: TargetSet, pts: np.ndarray) -> np.ndarray:
    """Vectorized distance from each row of ``pts`` to ``target``."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    if isinstance(target, SinglePoint):
        return np.hypot(x - target.p.x, y - target.p.y)
    if isinstance(target, Segment):
        a, b = target.a, target.b
        dx, dy = b.x - a.x, b.y - a.y
        u = np.clip(((x - a.x) * dx + (y - a.y) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
        return np.hypot(x - a.x - u * dx, y - a.y - u * dy)
    if isinstance(target, Line):
        o, d = target.origin, target.direction
        u = (x - o.x) * d.x + (y - o.y) * d.y
        return np.hypot(x - o.x - u * d.x, y - o.y - u * d.y)
    raise BadTarget(f"unknown target {target!r}")


def perpendicular_line(z) -> Line:
    """The line through ``z`` perpendicular to the ray from 0 to ``z``."""
    z = as_point(z)
    u = unit(z.x, z.y)
    return Line(z, Point2(-u.y, u.x))


def line_target(t: float) -> Line:
    """Vertical line ``x = t``."""
    return Line(Point2(float(t), 0.0), Point2(0.0, 1.0))


def transversal_deviation(points: Iterable, direction) -> float:
    """Smallest w such that every point lies in the cylinder of half-width w along ``direction``."""
    pts = np.asarray([tuple(p) for p in points], dtype=float)
    if pts.size == 0:
        raise EmptyPath("transversal deviation of an empty point list")
    d = as_point(direction)
    return float(np.max(np.abs(-pts[:, 0] * d.y + pts[:, 1] * d.x)))


class VarianceSegments(NamedTuple):
    S: Segment
    S_prime: Segment
    theta: float


def make_variance_segments(t: float, gamma_prime: float) -> VarianceSegments:
    """The asymmetric target pair at distance ``t`` and their separation angle.

    ``S`` spans offsets ``[-t^g/2, 3t^g/2]`` along the vertical line ``x = t``;
    ``S_prime`` is the mirror-offset segment ``[-3t^g/2, t^g/2]`` rotated by
    ``theta = t^-(1-g)``, where ``g = gamma_prime``.
    """
    if not (0.5 < gamma_prime < 1.0) or not math.isfinite(gamma_prime):
        raise BadExponent(f"gamma_prime must lie in (1/2, 1), got {gamma_prime}")
    if not t > 1:
        raise BadParameter(f"t must exceed 1, got {t}")
    w = t**gamma_prime
    theta = t ** (-(1.0 - gamma_prime))
    S = Segment(Point2(t, -w / 2), Point2(t, 3 * w / 2))
    S_prime = Segment(rotate((t, -3 * w / 2), theta), rotate((t, w / 2), theta))
    return VarianceSegments(S, S_prime, theta)
