import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from poissonfpp.action import ActionParams
from poissonfpp.environment import PointConfig, Window, sample_poisson
from poissonfpp.geometry import line_target
from poissonfpp.solver import GeodesicProblem, SolverOptions

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def small_instance(seed, keep=8, side=6.0, c=0.5, options=None):
    """Unit-intensity sample on [0, side]^2 cut to its first ``keep`` points, start (0,0), line x = side."""
    win = Window(0.0, side, 0.0, side)
    cfg = sample_poisson(win, 1.0, seed)
    cfg = PointConfig(cfg.points[:keep], win, cfg.seed_record)
    return GeodesicProblem(cfg, (0.0, 0.0), line_target(side), ActionParams.scaled(c, side), options or SolverOptions())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
