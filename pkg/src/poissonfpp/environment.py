"""Seeded Poisson point configurations on rectangular windows.

Unit cells follow the half-open convention ``B_(i,j) = [i-1/2, i+1/2) x [j-1/2, j+1/2)``;
boxes of side K are centered at ``(K i, K j)`` with the same convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import _jsonio
from .animals import AnimalGrid
from .errors import BadIntensity, BadParameter, BadWindow, DuplicatePoint
from .geometry import TOL, Point2, rotate_array

__all__ = [
    "Window",
    "BoxSpec",
    "PointConfig",
    "derive_seed",
    "sample_poisson",
    "count_in_box",
    "insert_points",
    "unit_square_counts",
    "cell_of",
    "rotate_config",
    "config_to_dict",
    "config_from_dict",
    "save_config",
    "load_config",
]


def derive_seed(master: int, *keys: int) -> int:
    """Counter-based child seed: a fixed mix of ``master`` and integer keys.

    The value depends only on its arguments, so replicas can run in any order
    or on any worker and still see the same randomness.
    """
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class Window:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        vals = (self.xmin, self.xmax, self.ymin, self.ymax)
        if not all(math.isfinite(v) for v in vals):
            raise BadWindow("window bounds must be finite")
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise BadWindow(f"degenerate window {vals}")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return (
            (pts[:, 0] >= self.xmin)
            & (pts[:, 0] <= self.xmax)
            & (pts[:, 1] >= self.ymin)
            & (pts[:, 1] <= self.ymax)
        )

    def as_dict(self) -> dict:
        return {"xmin": self.xmin, "xmax": self.xmax, "ymin": self.ymin, "ymax": self.ymax}


@dataclass(frozen=True)
class BoxSpec:
    center_index: tuple[int, int]
    side: float = 1.0

    def __post_init__(self):
        if not self.side > 0:
            raise BadParameter("box side must be positive")

    def bounds(self) -> tuple[float, float, float, float]:
        i, j = self.center_index
        h = self.side / 2
        return (self.side * i - h, self.side * i + h, self.side * j - h, self.side * j + h)


def cell_of(pts, side: float = 1.0) -> np.ndarray:
    """Integer (i, j) index of the half-open box of the given side containing each point."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    return np.floor(pts / side + 0.5).astype(np.int64)


@dataclass(frozen=True)
class PointConfig:
    """An immutable finite point configuration with a unit-cell index.

    Point ``k`` keeps index ``k`` for the lifetime of the configuration and of
    any configuration derived from it by :func:`insert_points`.
    """

    points: np.ndarray
    window: Window
    seed_record: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise BadParameter("configuration points must be finite")
        if not np.all(self.window.contains(pts)):
            raise BadParameter("configuration point outside its window")
        _check_distinct(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def point(self, k: int) -> Point2:
        x, y = self.points[k]
        return Point2(float(x), float(y))

    @cached_property
    def grid(self) -> dict[tuple[int, int], tuple[int, ...]]:
        cells = cell_of(self.points)
        index: dict[tuple[int, int], list[int]] = {}
        for k, (i, j) in enumerate(cells.tolist()):
            index.setdefault((i, j), []).append(k)
        return {c: tuple(v) for c, v in index.items()}

    def indices_in_cells(self, cells) -> list[int]:
        out: list[int] = []
        g = self.grid
        for c in cells:
            out.extend(g.get(tuple(c), ()))
        return sorted(out)


def _check_distinct(pts: np.ndarray) -> None:
    if len(pts) < 2:
        return
    pairs = cKDTree(pts).query_pairs(TOL)
    if pairs:
        i, j = min(pairs)
        raise DuplicatePoint(f"points {i} and {j} coincide within {TOL}")


def sample_poisson(window: Window, intensity: float, seed: int) -> PointConfig:
    """Homogeneous Poisson configuration on ``window``.

    The count is drawn first, then that many i.i.d. uniform locations, all from
    a single generator seeded with ``seed``.  Intensity 0 gives the empty
    configuration.
    """
    if not math.isfinite(intensity) or intensity < 0:
        raise BadIntensity(f"intensity must be finite and nonnegative, got {intensity}")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    n = int(rng.poisson(intensity * window.area)) if intensity > 0 else 0
    xs = rng.uniform(window.xmin, window.xmax, size=n)
    ys = rng.uniform(window.ymin, window.ymax, size=n)
    record = {"seed": int(seed), "intensity": float(intensity), "generator": "PCG64"}
    return PointConfig(np.column_stack((xs, ys)), window, record)


def count_in_box(config: PointConfig, box: BoxSpec) -> int:
    x0, x1, y0, y1 = box.bounds()
    p = config.points
    inside = (p[:, 0] >= x0) & (p[:, 0] < x1) & (p[:, 1] >= y0) & (p[:, 1] < y1)
    return int(np.count_nonzero(inside))


def insert_points(config: PointConfig, new_points: Sequence) -> PointConfig:
    """New configuration with ``new_points`` appended after the existing indices."""
    new = np.asarray([tuple(p) for p in new_points], dtype=float).reshape(-1, 2)
    if len(new) == 0:
        return config
    if not np.all(config.window.contains(new)):
        raise BadParameter("inserted point outside the window")
    if len(config):
        d, _ = cKDTree(config.points).query(new)
        if np.any(d <= TOL):
            raise DuplicatePoint("inserted point coincides with an existing point")
    record = dict(config.seed_record)
    record["inserted"] = record.get("inserted", 0) + len(new)
    return PointConfig(np.vstack((config.points, new)), config.window, record)


def unit_square_counts(config: PointConfig) -> AnimalGrid:
    """Counts per unit cell for every cell meeting the window (zeros included)."""
    w = config.window
    i0, i1 = math.floor(w.xmin + 0.5), math.floor(w.xmax + 0.5)
    j0, j1 = math.floor(w.ymin + 0.5), math.floor(w.ymax + 0.5)
    values = {(i, j): 0.0 for i in range(i0, i1 + 1) for j in range(j0, j1 + 1)}
    for c, idx in config.grid.items():
        values[c] = float(len(idx))
    return AnimalGrid(values)


def rotate_config(config: PointConfig, theta: float) -> PointConfig:
    """Rotate every point about the origin; the window becomes the bounding box of the rotated one."""
    w = config.window
    corners = rotate_array([(w.xmin, w.ymin), (w.xmin, w.ymax), (w.xmax, w.ymin), (w.xmax, w.ymax)], theta)
    lo, hi = corners.min(axis=0) - 1e-9, corners.max(axis=0) + 1e-9
    win = Window(lo[0], hi[0], lo[1], hi[1])
    record = dict(config.seed_record, rotated=float(theta))
    return PointConfig(rotate_array(config.points, theta), win, record)


def config_to_dict(config: PointConfig) -> dict:
    return {
        "window": config.window.as_dict(),
        "seed": config.seed_record.get("seed"),
        "intensity": config.seed_record.get("intensity"),
        "points": config.points.tolist(),
    }


def config_from_dict(doc: dict) -> PointConfig:
    w = doc["window"]
    window = Window(float(w["xmin"]), float(w["xmax"]), float(w["ymin"]), float(w["ymax"]))
    pts = np.asarray(doc.get("points", []), dtype=float).reshape(-1, 2)
    record = {"seed": doc.get("seed"), "intensity": doc.get("intensity")}
    return PointConfig(pts, window, record)


def save_config(path, config: PointConfig) -> None:
    _jsonio.write_json(path, config_to_dict(config))


def load_config(path) -> PointConfig:
    return config_from_dict(_jsonio.read_json(path))
