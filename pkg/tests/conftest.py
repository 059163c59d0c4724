"""Shared fixtures. Expensive objects are built once per session."""

import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from diracres import phasespace, potentials

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=15, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    """report(tag, ok, detail): record one acceptance line, print it, then assert."""

    def _report(tag: str, ok: bool, detail: str):
        line = f"{tag}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


@pytest.fixture(scope="session")
def v_gauss():
    """v2 = 0.5 exp(-r^2)."""
    return potentials.gaussian(0.5)


@pytest.fixture(scope="session")
def v_zero():
    return potentials.zero()


@pytest.fixture(scope="session")
def v_mollified(v_gauss):
    """The small mollified v1 with sup|v1| <= 1e-3."""
    R = potentials.radius_for_tail(v_gauss, 1e-3)
    return potentials.mollify_split(v_gauss, R)


@pytest.fixture(scope="session")
def mu_grid():
    return np.round(np.arange(1, 1001) * 1e-3, 12)


@pytest.fixture(scope="session")
def numu_gauss(v_zero, v_gauss, mu_grid):
    return phasespace.build_nu_mu(v_zero, v_gauss, mu_grid)


@pytest.fixture(scope="session")
def omega_gauss(v_zero, v_gauss):
    """omega on [1.05, 1.6] with h = 1e-3 (finite-difference values plus the direct pairing)."""
    E = np.round(1.05 + np.arange(0, 551) * 1e-3, 12)
    return phasespace.omega(v_zero, v_gauss, E)


@pytest.fixture(scope="session")
def numu_gauss_c1(v_zero, v_gauss):
    """mu on the criterion-1 grid (0, 0.6] with h = 1e-3."""
    return phasespace.build_nu_mu(v_zero, v_gauss, np.round(np.arange(1, 601) * 1e-3, 12))


@pytest.fixture(scope="session")
def omega_witness_samples(numu_gauss):
    """phi * mu on [1.15, 1.85] (h = 2.5e-4), the input of the probe-sequence search."""
    from diracres import fbi

    E = np.round(1.15 + np.arange(0, 2801) * 2.5e-4, 12)
    return fbi.Sampled(E, phasespace.convolve_nu(phasespace.DPHI, numu_gauss.mu, E))


@pytest.fixture(scope="session")
def trace_tf():
    """f = 1 with chi = 1 on [1.2, 1.7]."""
    from diracres import traces

    return traces.TestFunctionSpec(traces.IntervalCutoff(1.2, 1.7, 0.1))


@pytest.fixture(scope="session")
def br_table(v_mollified, v_gauss, trace_tf):
    """Operator vs phase-space trace table on hbar in {0.2, 0.1, 0.05} (a few minutes)."""
    from diracres import traces

    t0 = time.perf_counter()
    table = traces.bruneau_robert_residual(v_mollified, v_gauss, [0.2, 0.1, 0.05], trace_tf)
    table.elapsed = time.perf_counter() - t0
    return table


@pytest.fixture(scope="session")
def count_table(v_mollified, v_gauss):
    """Resonance counts N(hbar) for the lower-bound scaling check (a few minutes)."""
    from diracres import dirac

    win = dirac.Window(1.45, 1.6, -0.4, -0.005)
    t0 = time.perf_counter()
    table = dirac.count_scaling([v_mollified, v_gauss], [0.2, 0.1, 0.05], win, (0.5j, 0.6j), c=3.0)
    table.elapsed = time.perf_counter() - t0
    return table
