import time
from functools import lru_cache

import pytest

from blowup_lab.ground_state import solve_ground_state
from blowup_lab.linops import build_pair
from blowup_lab.profile import solve_S000
from blowup_lab.radial import RadialGrid

_GS: dict = {}
_PAIRS: dict = {}
_PROFILES: dict = {}


def ground_state(dim: int, sigma: float | None = None):
    key = (dim, sigma)
    if key not in _GS:
        _GS[key] = solve_ground_state(dim, RadialGrid.default(dim, sigma=sigma))
    return _GS[key]


def pair(dim: int, sigma: float | None = None):
    key = (dim, sigma)
    if key not in _PAIRS:
        _PAIRS[key] = build_pair(ground_state(dim, sigma))
    return _PAIRS[key]


def profile(dim: int, sigma: float):
    key = (dim, sigma)
    if key not in _PROFILES:
        _PROFILES[key] = solve_S000(pair(dim, sigma), sigma)
    return _PROFILES[key]


@pytest.fixture(scope="session")
def gs1():
    return ground_state(1)


@pytest.fixture(scope="session")
def gs2():
    return ground_state(2)


@pytest.fixture(scope="session")
def pair1():
    return pair(1)


@pytest.fixture(scope="session")
def pair2():
    return pair(2)


@pytest.fixture(scope="session")
def prof1():
    return profile(1, 0.25)


@pytest.fixture(scope="session")
def prof2():
    return profile(2, 0.25)


BLOWUP_CONFIG = dict(grid_step=0.04, grad_ceiling=20.0, snapshots=40, tol=1e-6)


BLOWUP_SECONDS: list = []


@lru_cache(maxsize=None)
def blowup():
    from blowup_lab.study import BlowupConfig, run_blowup

    t0 = time.perf_counter()
    res = run_blowup(BlowupConfig(**BLOWUP_CONFIG), profile(1, 0.25))
    BLOWUP_SECONDS.append(time.perf_counter() - t0)
    return res


@pytest.fixture(scope="session")
def blowup_run():
    return blowup()
