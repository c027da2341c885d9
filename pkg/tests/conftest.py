import sys

import numpy as np
import pytest

from detwalk import _backend, routers
from detwalk.chain import TransitionMatrix


@pytest.fixture(params=sorted(_backend.available()))
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    mod = _backend.available()[request.param]
    monkeypatch.setattr(routers, "kernels", mod)
    return request.param


@pytest.fixture
def lazy_two_state():
    return TransitionMatrix([[0.75, 0.25], [0.25, 0.75]])


@pytest.fixture
def two_state():
    return TransitionMatrix([[0.9, 0.1], [0.3, 0.7]])


def random_row(rng, delta, irrational=False):
    w = rng.integers(1, 9, size=delta).astype(float)
    if irrational:
        w = w * np.where(rng.random(delta) < 0.5, np.sqrt(2.0), 1.0)
    return list(w / w.sum())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
