"""Shared fixtures and a global layout-validity post-hook.

Every public function that produces a layout is wrapped at import time so
that each layout it returns is checked with ``validate_layout`` against the
config it was given.  Test modules import after this file, so direct
``from pinch_isac.x import f`` imports pick up the wrapped versions.
"""

import functools

import numpy as np
import pytest

from pinch_isac import baselines, multi_pa, single_pa
from pinch_isac.scenario import SystemConfig, TransceiverLayout, realization_rng, sample_realization, validate_layout

CHECKED = {"count": 0}


def _layouts(result):
    if isinstance(result, TransceiverLayout):
        yield result
    elif isinstance(result, (tuple, list)):
        for item in result:
            yield from _layouts(item)
    elif hasattr(result, "layout") and isinstance(result.layout, TransceiverLayout):
        yield result.layout


def _config(args, kwargs):
    for a in list(args) + list(kwargs.values()):
        if isinstance(a, SystemConfig):
            return a
    return None


def _checked(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        result = fn(*args, **kwargs)
        cfg = _config(args, kwargs)
        if cfg is not None:
            for layout in _layouts(result):
                assert validate_layout(layout, cfg), f"{fn.__name__} produced an invalid layout"
                CHECKED["count"] += 1
        return result
    return wrapper


_PRODUCERS = {
    multi_pa: ("uniform_layout", "cc_warm_start", "alg1_sensing_centric", "rate_only_ao",
               "alg2_comm_centric", "alg3_pareto_scan"),
    baselines: ("random_layout", "centered_layout"),
    single_pa: ("sc_optimal_layout",),
}
for _mod, _names in _PRODUCERS.items():
    for _name in _names:
        setattr(_mod, _name, _checked(getattr(_mod, _name)))


@pytest.fixture
def cfg():
    return SystemConfig()


@pytest.fixture
def cfg1():
    """One PA per waveguide."""
    return SystemConfig(n_tx=1, n_rx=1)


@pytest.fixture
def realization(cfg):
    return sample_realization(cfg, realization_rng(cfg.rng_seed, 0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in mod.REPORT:
            terminalreporter.write_line(line)
