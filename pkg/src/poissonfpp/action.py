"""Path action in its discrete and time-parametrized forms.

A discrete path ``(x_0, x_1, ..., x_N, x_{N+1})`` with total length L, travelled
in time s, has action ``L^2 / (2 s) - N``: the constant-speed schedule is the
cheapest way to spend the time budget, and each distinct interior point earns
one unit.  The time-parametrized form exists to check that identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import PointConfig
from .errors import BadIndex, BadParameter, InfiniteEnergy
from .geometry import TOL, Point2, as_point

__all__ = [
    "ActionParams",
    "PathSeq",
    "TimedPath",
    "path_vertices",
    "path_length",
    "path_action",
    "optimal_time_allocation",
    "kinetic_energy",
    "continuous_action",
]


@dataclass(frozen=True)
class ActionParams:
    s: float

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s > 0):
            raise BadParameter(f"time budget must be positive, got {self.s}")

    @classmethod
    def scaled(cls, c: float, t: float) -> "ActionParams":
        if not (c > 0 and t > 0):
            raise BadParameter("c and t must be positive")
        return cls(c * t)


@dataclass(frozen=True)
class PathSeq:
    start: Point2
    interior: tuple[int, ...]
    terminal: Point2

    def __post_init__(self):
        object.__setattr__(self, "start", as_point(self.start))
        object.__setattr__(self, "terminal", as_point(self.terminal))
        object.__setattr__(self, "interior", tuple(int(k) for k in self.interior))
        if len(set(self.interior)) != len(self.interior):
            raise BadParameter("interior indices must be distinct")

    @property
    def n_points(self) -> int:
        return len(self.interior)


@dataclass(frozen=True)
class TimedPath:
    vertices: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        t = np.asarray(self.times, dtype=float).ravel()
        if len(v) != len(t) or len(v) == 0:
            raise BadParameter("vertices and times must have equal nonzero length")
        if t[0] != 0 or np.any(np.diff(t) < 0):
            raise BadParameter("times must start at 0 and be nondecreasing")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "times", t)

    @property
    def duration(self) -> float:
        return float(self.times[-1])


def path_vertices(path: PathSeq, config: PointConfig) -> np.ndarray:
    idx = np.asarray(path.interior, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= len(config)):
        raise BadIndex(f"interior index out of range for a configuration of {len(config)} points")
    mid = config.points[idx] if idx.size else np.empty((0, 2))
    return np.vstack(([tuple(path.start)], mid, [tuple(path.terminal)]))


def path_length(path: PathSeq, config: PointConfig) -> float:
    v = path_vertices(path, config)
    return float(np.sum(np.hypot(*np.diff(v, axis=0).T)))


def path_action(path: PathSeq, config: PointConfig, params: ActionParams) -> float:
    L = path_length(path, config)
    return L * L / (2.0 * params.s) - path.n_points


def optimal_time_allocation(path: PathSeq, config: PointConfig, params: ActionParams) -> TimedPath:
    """Constant-speed schedule: each segment gets time proportional to its length."""
    v = path_vertices(path, config)
    seg = np.hypot(*np.diff(v, axis=0).T)
    L = float(seg.sum())
    if L == 0:
        return TimedPath(v, np.linspace(0.0, params.s, len(v)))
    times = np.concatenate(([0.0], np.cumsum(seg) * (params.s / L)))
    times[-1] = params.s
    return TimedPath(v, times)


def kinetic_energy(path: TimedPath) -> float:
    seg = np.hypot(*np.diff(path.vertices, axis=0).T)
    dt = np.diff(path.times)
    moving = seg > 0
    if np.any(moving & (dt <= 0)):
        raise InfiniteEnergy("a segment of positive length has zero duration")
    return float(np.sum(seg[moving] ** 2 / (2.0 * dt[moving])))


def _touched(vertices: np.ndarray, config: PointConfig) -> np.ndarray:
    """Indices of configuration points within TOL of the polyline."""
    pts = config.points
    if len(pts) == 0:
        return np.empty(0, dtype=np.int64)
    hit = np.zeros(len(pts), dtype=bool)
    if len(vertices) == 1:
        hit |= np.hypot(*(pts - vertices[0]).T) <= TOL
    for a, b in zip(vertices[:-1], vertices[1:]):
        d = b - a
        dd = float(d @ d)
        if dd == 0:
            u = np.zeros(len(pts))
        else:
            u = np.clip((pts - a) @ d / dd, 0.0, 1.0)
        foot = a + u[:, None] * d
        hit |= np.hypot(*(pts - foot).T) <= TOL
    return np.flatnonzero(hit)


def continuous_action(path: TimedPath, config: PointConfig) -> float:
    """Kinetic energy of the timed polyline minus the number of configuration points it touches."""
    return kinetic_energy(path) - len(_touched(path.vertices, config))
