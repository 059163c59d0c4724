"""Operator traces, the phase-space side, the residual table and local trace comparisons."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from diracres import dirac, phasespace, potentials, traces
from diracres.errors import ConfigurationError, DomainError
from diracres.traces import ComplexWindow, GaussianProbe, IntervalCutoff, Polynomial, TestFunctionSpec

LOCAL_WINDOW = ComplexWindow(0.5, 0.15, 0.1)


# ---------------------------------------------------------------- operator side


def test_zero_pair_difference_is_zero():
    tf = TestFunctionSpec(IntervalCutoff(1.2, 1.7))
    tr = traces.trace_difference(potentials.zero(), potentials.zero(), 0.2, tf, kappa_max=4)
    assert tr.value == 0
    assert tr.converged


def test_cutoff_in_gap_gives_zero(v_zero):
    # the free operator has no spectrum in (-1, 1)
    tf = TestFunctionSpec(IntervalCutoff(-0.5, 0.5, 0.2))
    tr = traces.functional_trace(v_zero, 0.2, tf, kappa_max=4)
    assert tr.value == 0
    g = dirac.default_grid(v_zero, 0.2)
    assert traces.channel_spectrum(v_zero, 1, 0.2, (-0.99, 0.99), g).size == 0


def test_truncation_flag(v_gauss, trace_tf):
    tr = traces.functional_trace(v_gauss, 0.2, trace_tf, kappa_max=2)
    assert not tr.converged
    assert tr.remainder > traces.TRUNCATION_TOL * abs(tr.value)


def test_trace_counts_degeneracy(v_zero):
    tf = TestFunctionSpec(IntervalCutoff(1.2, 1.7))
    tr = traces.functional_trace(v_zero, 0.3, tf, kappa_max=3)
    g = dirac.default_grid(v_zero, 0.3)
    manual = sum(2 * abs(k) * np.sum(tf(traces.channel_spectrum(v_zero, k, 0.3, tf.chi.support, g)))
                 for k in (-3, -2, -1, 1, 2, 3))
    assert tr.value.real == pytest.approx(manual, rel=1e-12, abs=0)


def test_chi_locality(v_gauss):
    # f concentrated at 1.5: widening chi away from there is invisible
    f = GaussianProbe(1.5, 0.0, 500.0)
    narrow = traces.functional_trace(v_gauss, 0.2, TestFunctionSpec(IntervalCutoff(1.3, 1.7), f), kappa_max=6)
    wide = traces.functional_trace(v_gauss, 0.2, TestFunctionSpec(IntervalCutoff(1.1, 1.95), f), kappa_max=6)
    assert abs(wide.value - narrow.value) <= traces.TRUNCATION_TOL * abs(narrow.value)


def test_operator_trace_linear(v_gauss, trace_tf):
    a = 2.5 - 1.5j
    base = traces.functional_trace(v_gauss, 0.3, trace_tf, kappa_max=3)
    scaled = traces.functional_trace(v_gauss, 0.3, trace_tf.scaled(a), kappa_max=3)
    assert scaled.value == pytest.approx(a * base.value, rel=1e-12, abs=0)


def test_threads_do_not_change_trace(v_gauss, trace_tf):
    one = traces.functional_trace(v_gauss, 0.3, trace_tf, kappa_max=4, threads=1)
    four = traces.functional_trace(v_gauss, 0.3, trace_tf, kappa_max=4, threads=4)
    assert one.value == four.value


def test_config_roundtrip():
    tf = traces.test_function_from_config({"chi": {"interval": [1.2, 1.7], "edge": 0.05},
                                           "f": {"kind": "gaussian", "alpha": 1.5, "beta": 0.8, "lambda": 100}})
    assert tf.chi == IntervalCutoff(1.2, 1.7, 0.05)
    assert tf.describe()["f"]["kind"] == "gaussian"
    with pytest.raises(ConfigurationError):
        traces.test_function_from_config({"chi": {"interval": [1.2, 1.7]}, "f": {"kind": "spline"}})
    with pytest.raises(ConfigurationError):
        IntervalCutoff(1.7, 1.2)


def test_cutoff_is_one_on_interval():
    chi = IntervalCutoff(1.2, 1.7, 0.1)
    E = np.linspace(1.2, 1.7, 101)
    assert np.all(chi(E) == 1.0)
    assert chi(1.1) == 0.0 and chi(1.8) == 0.0
    assert 0 < chi(1.15) < 1


# ---------------------------------------------------------------- phase-space side


def test_phase_space_identical_is_zero(v_gauss, trace_tf):
    assert traces.phase_space_trace(v_gauss, v_gauss, 0.1, trace_tf) == 0


def test_phase_space_band_is_domain_error(v_zero, v_gauss):
    with pytest.raises(DomainError):
        traces.phase_space_trace(v_zero, v_gauss, 0.1, TestFunctionSpec(IntervalCutoff(-0.2, 0.2)))
    with pytest.raises(DomainError):
        traces.phase_space_trace(v_zero, v_gauss, 0.1, TestFunctionSpec(IntervalCutoff(0.8, 1.3)))


def test_phase_space_two_quadratures(v_zero, v_gauss, trace_tf):
    """int chi omega dE against -int chi' rho dE (rho tabulated independently)."""
    hbar = 0.1
    direct = traces.phase_space_trace(v_zero, v_gauss, hbar, trace_tf)
    x, w = np.polynomial.legendre.leggauss(24)
    total = 0.0
    for lo, hi in ((1.1, 1.2), (1.7, 1.8)):  # chi' vanishes elsewhere
        edges = np.linspace(lo, hi, 9)
        for a, b in zip(edges[:-1], edges[1:]):
            E = 0.5 * (a + b) + 0.5 * (b - a) * x
            d = 1e-6
            dchi = (trace_tf.chi(E + d) - trace_tf.chi(E - d)) / (2 * d)
            total -= np.sum(0.5 * (b - a) * w * dchi * phasespace.rho(v_zero, v_gauss, E).values)
    by_parts = traces.WEYL_CONSTANT * hbar**-3 * total
    assert direct.real == pytest.approx(by_parts, rel=1e-4, abs=0)


@given(a=st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_phase_space_linear(v_zero, v_gauss, trace_tf, phase_quad, a):
    base = traces.phase_space_trace(v_zero, v_gauss, 0.1, trace_tf, phase_quad)
    scaled = traces.phase_space_trace(v_zero, v_gauss, 0.1, trace_tf.scaled(a), phase_quad)
    assert scaled == pytest.approx(a * base, rel=1e-12, abs=0)


@pytest.fixture(scope="module")
def phase_quad(v_zero, v_gauss, trace_tf):
    return traces.omega_quadrature(v_zero, v_gauss, trace_tf.chi.support)


def test_phase_space_hbar_scaling(v_zero, v_gauss, trace_tf, phase_quad):
    a = traces.phase_space_trace(v_zero, v_gauss, 0.1, trace_tf, phase_quad)
    b = traces.phase_space_trace(v_zero, v_gauss, 0.05, trace_tf, phase_quad)
    assert b / a == pytest.approx(8.0, rel=1e-12, abs=0)


# ---------------------------------------------------------------- residual table


def test_residual_identical_pair(v_gauss, trace_tf):
    t = traces.bruneau_robert_residual(v_gauss, v_gauss, [0.4, 0.3, 0.2], trace_tf)
    assert all(r == 0 for r in t.residual)
    assert t.residual_order == -math.inf and t.passed


def test_residual_needs_three_rows(v_zero, v_gauss, trace_tf):
    with pytest.raises(ConfigurationError):
        traces.bruneau_robert_residual(v_zero, v_gauss, [0.2, 0.1], trace_tf)


@pytest.mark.slow
def test_difference_matches_phase_space_at_hbar_01(br_table):
    i = br_table.hbar.index(0.1)
    op, ps = br_table.operator[i], br_table.phase_space[i]
    assert abs(op - ps) <= 0.25 * abs(ps)
    assert br_table.converged[i]


@pytest.mark.slow
def test_residual_times_hbar2_bounded(br_table):
    # bounded: hbar^2 |residual| never exceeds 3 times its coarsest-row value
    s = [h**2 * abs(r) for h, r in zip(br_table.hbar, br_table.residual)]
    assert max(s) <= 3 * s[0]
    assert br_table.residual_order <= 2.5 and br_table.passed


@pytest.mark.slow
def test_both_sides_scale_like_hbar_minus_3(br_table):
    assert 2.7 <= br_table.operator_slope <= 3.3
    assert 2.7 <= br_table.phase_slope <= 3.3
    assert all(br_table.converged)


@pytest.mark.slow
def test_linear_f_leading_terms(v_mollified, v_gauss):
    tf = TestFunctionSpec(IntervalCutoff(1.2, 1.7), Polynomial((-1.4, 1.0)))
    op = traces.trace_difference(v_mollified, v_gauss, 0.05, tf).value
    ps = traces.phase_space_trace(v_mollified, v_gauss, 0.05, tf)
    assert abs(op - ps) <= 0.25 * abs(ps)


# ---------------------------------------------------------------- suppression


def test_suppression_center():
    w = ComplexWindow(0.5, 0.05, 0.2)
    rep = traces.suppression_check(w, GaussianProbe(w.center, 1.0, 100.0))
    assert rep.c0_real >= w.b**2 / 8


def test_suppression_edge():
    w = ComplexWindow(0.5, 0.05, 0.2)
    center = traces.suppression_check(w, GaussianProbe(w.center, 1.0, 100.0))
    edge = traces.suppression_check(w, GaussianProbe(w.W.re_hi, 1.0, 100.0))
    assert 0 < edge.c0_real < center.c0_real


def test_suppression_degenerate_ratio_warns():
    w = ComplexWindow(0.5, 0.2, 0.2)
    with pytest.warns(UserWarning, match="not small"):
        rep = traces.suppression_check(w, GaussianProbe(w.center, 1.0, 100.0))
    assert not rep.ratio_small


def test_window_geometry():
    w = ComplexWindow(0.5, 0.05, 0.2)
    O, W = w.Omega, w.W
    assert O.re_lo < W.re_lo < W.re_hi < O.re_hi and O.im_lo < W.im_lo and W.im_hi == O.im_hi
    with pytest.raises(DomainError):
        ComplexWindow(0.3, 0.05, 0.2)


# ---------------------------------------------------------------- local trace


def test_local_trace_identical(v_gauss):
    rep = traces.local_trace_experiment(v_gauss, v_gauss, 0.05, LOCAL_WINDOW, GaussianProbe(1.5, 0.8, 400.0),
                                        None, None)
    assert rep.resonance_sum == 0 and rep.phase_space == 0


def test_local_trace_empty_sets_flagged(v_zero, v_gauss):
    rep = traces.local_trace_experiment(v_zero, v_gauss, 0.05, LOCAL_WINDOW, GaussianProbe(1.5, 0.0, 100.0),
                                        None, None)
    assert not rep.consistent and "no resonances" in rep.note


@pytest.fixture(scope="module")
def local_data(v_mollified, v_gauss):
    """Resonance sets of both operators in W at hbar = 0.05, plus the omega quadrature on supp chi."""
    hbar, W = 0.05, LOCAL_WINDOW.W
    km = dirac.kappa_max_rule(hbar)
    r1 = dirac.resonances(v_mollified, hbar, 0.5j, 0.6j, W, km)
    r2 = dirac.resonances(v_gauss, hbar, 0.5j, 0.6j, W, km)
    quad = traces.omega_quadrature(v_mollified, v_gauss, (W.re_lo - LOCAL_WINDOW.b, W.re_hi + LOCAL_WINDOW.b),
                                   panels=28)
    return r1, r2, quad


@pytest.mark.slow
def test_local_trace_lower_bound(v_mollified, v_gauss, local_data):
    """Stated example; fails here: the W resonances sit at Im z ~ -0.1 to -0.25, where the
    oscillating probe is ~e^(-lam beta |Im z|) smaller than the phase-space side."""
    r1, r2, quad = local_data
    rep = traces.local_trace_experiment(v_mollified, v_gauss, 0.05, LOCAL_WINDOW, GaussianProbe(1.5, 0.8, 400.0),
                                        r1, r2, quadrature=quad)
    assert rep.resonance_sum != 0
    assert rep.bound_holds, rep


@pytest.mark.slow
def test_local_trace_probe_outside(v_mollified, v_gauss, local_data):
    r1, r2, quad = local_data
    run = lambda alpha: traces.local_trace_experiment(v_mollified, v_gauss, 0.05, LOCAL_WINDOW,
                                                      GaussianProbe(alpha, 0.0, 500.0), r1, r2, quadrature=quad)
    inside, outside = run(1.5), run(1.9)
    assert abs(outside.phase_space) <= 1e-6 * abs(inside.phase_space)
    assert abs(outside.resonance_sum) <= 1e-6 * abs(inside.resonance_sum)


@pytest.mark.slow
def test_doubled_multiplicities_fail(v_mollified, v_gauss, local_data):
    r1, r2, quad = local_data
    probe = GaussianProbe(1.5, 0.0, 100.0)
    once = traces.local_trace_experiment(v_mollified, v_gauss, 0.05, LOCAL_WINDOW, probe, r1, r2, quadrature=quad)
    twice = traces.local_trace_experiment(v_mollified, v_gauss, 0.05, LOCAL_WINDOW, probe, r1, r2,
                                          multiplicity_factor=2, quadrature=quad)
    assert twice.resonance_sum == pytest.approx(2 * once.resonance_sum, rel=1e-14, abs=0)
    assert not twice.agrees
