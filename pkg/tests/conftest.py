import numpy as np
import pytest

from mgsizing.dispatch import Design, DispatchParams, DispatchProblem


def random_problem(rng: np.random.Generator, T: int, *, E_B=None, PV=None, P_D_min=None,
                   c_rate=None, soc_frac=None, p_D=None) -> DispatchProblem:
    """Small random dispatch instance with every parameter drawn unless given."""
    load = rng.uniform(0.0, 100.0, T)
    price = rng.choice([0.08, 0.15, 0.25, 0.45], T)
    sun = rng.random(T) < 0.6
    avail = np.where(sun, rng.uniform(0.0, 1.0, T), 0.0)
    E_B = rng.uniform(0.0, 200.0) if E_B is None else E_B
    PV = rng.uniform(0.0, 150.0) if PV is None else PV
    P_D_max = rng.uniform(20.0, 120.0)
    P_D_min = rng.uniform(0.0, 0.8) * P_D_max if P_D_min is None else min(P_D_min, P_D_max)
    params = DispatchParams(p_D=rng.uniform(0.1, 0.4) if p_D is None else p_D, P_D_max=P_D_max,
                            P_D_min=P_D_min, battery_power_limit_c=c_rate)
    lo, hi = params.soc_min_frac * E_B, params.soc_max_frac * E_B
    frac = rng.uniform(0, 1) if soc_frac is None else soc_frac
    return DispatchProblem(Design(E_B, PV), params, load, price, avail, lo + frac * (hi - lo))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
