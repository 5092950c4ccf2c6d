import numpy as np
import pytest

from lagfree.model import LagState, MassGrid, ProfileSpec, init_profile, make_params

_CRITERIA_KEY = pytest.StashKey[list]()


@pytest.fixture
def params2():
    return make_params(2.0, 1.0, 2)


@pytest.fixture
def params3():
    return make_params(2.0, 1.0, 3)


def static_state(n: int = 64, dim: int = 2) -> LagState:
    """Constant-density ball of radius 1 at rest (rho = dim)."""
    p = make_params(2.0, 1.0, dim)
    return init_profile(ProfileSpec(), p, MassGrid(n))


def linear_velocity_state(n: int = 64, dim: int = 2) -> LagState:
    """Static ball with ``u(r) = r``."""
    s = static_state(n, dim)
    return LagState(s.rho, s.r.copy(), s.r, 0.0)


@pytest.fixture
def criterion_log(request):
    """Collects one pass/fail line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(_CRITERIA_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


def rel_max(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
