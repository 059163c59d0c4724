import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from diracres import phasespace as S
from diracres import potentials as P
from diracres.errors import ConfigurationError, DomainError

V1 = P.gaussian(1.0)  # e^{-|x|^2}


# kernels


@given(st.floats(-6, 6))
def test_phi_split(x):
    assert S.phi(x) == pytest.approx(S.phi_plus(x) + S.phi_minus(x), abs=1e-12)
    assert S.phi_tilde_plus(x) == pytest.approx(S.phi_plus(x + 1.0), abs=1e-12)
    assert S.phi_tilde_minus(x) == pytest.approx(S.phi_minus(x - 1.0), abs=1e-12)


@given(st.floats(-1, 1))
def test_phi_vanishes_in_gap(x):
    assert S.phi(x) == 0.0


# level sets


def test_level_set_unit_ball():
    assert S.level_set_volume(V1, math.exp(-1.0)) == pytest.approx(4 * math.pi / 3, rel=1e-10, abs=0)


def test_level_set_above_sup():
    assert S.level_set_volume(V1, 1.5) == 0.0


def test_level_set_closed_form():
    assert S.level_set_volume(V1, math.exp(-4.0)) == pytest.approx(33.5103, rel=1e-5, abs=0)


def test_level_set_divergent():
    with pytest.raises(DomainError):
        S.level_set_volume(V1, -0.1, ">=")


def test_level_set_qmc_matches_radial():
    g = P.general(lambda x: np.exp(-np.sum(x * x, axis=1)), math.inf, 1.0, 0.0, 6.0)
    vol, err = S.level_set_volume(g, math.exp(-1.0), return_error=True, seed=3)
    assert err > 0
    assert abs(vol - 4 * math.pi / 3) <= 5 * err + 1e-3


@given(st.floats(0.01, 0.95), st.floats(0.001, 0.04))
def test_level_set_volume_nonincreasing(E, dE):
    assert S.level_set_volume(V1, E + dE) <= S.level_set_volume(V1, E)


# nu, mu


def test_mu_plus_density_closed_form():
    E0 = math.exp(-1.0)
    grid = E0 + 1e-4 * np.arange(-5, 6)
    nm = S.build_nu_mu(P.zero(), V1, grid)
    assert nm.mu_plus[1].values[5] == pytest.approx(2 * math.pi * math.e, rel=1e-3, abs=0)


def test_mu_identical_pair_zero(v_gauss):
    nm = S.build_nu_mu(v_gauss, v_gauss, np.linspace(0.01, 0.6, 60))
    assert np.all(nm.mu.values == 0.0)


def test_mu_support_bound():
    nm = S.build_nu_mu(P.zero(), V1, np.linspace(0.01, 1.3, 130))
    assert nm.mu.support == (0.0, 1.0)
    assert nm.mu.outside_support_max() == 0.0


def test_mu_positive_and_nu_monotone(numu_gauss):
    mu2 = numu_gauss.mu_plus[1]
    assert mu2.values.min() >= -1e-9
    # nu_+ = -vol{v >= E} rises to 0 at sup v
    assert np.all(np.diff(numu_gauss.nu_plus[1].values) >= -1e-12)


def test_grid_must_avoid_zero(v_gauss):
    with pytest.raises(DomainError):
        S.build_nu_mu(P.zero(), v_gauss, np.linspace(-0.1, 0.1, 5))


def test_plateau_rejected():
    flat = P.table(np.linspace(0, 4, 41), np.where(np.linspace(0, 4, 41) < 2, 0.3, 0.0), 4.0)
    with pytest.raises(DomainError):
        S.build_nu_mu(P.zero(), flat, np.linspace(0.01, 0.5, 10))


def test_order_at_most_one(v_zero, v_gauss):
    r = S.order_one_ratios(v_zero, v_gauss, [0.2, 0.35], [0.2, 0.05, 0.01])
    assert np.all(np.isfinite(r))
    assert r.max() / r[:, 0].max() < 5.0


# rho, omega


def test_rho_at_one_is_zero(v_zero, v_gauss):
    assert S.rho(v_zero, v_gauss, [1.0]).values[0] == 0.0


def test_rho_identical_pair(v_gauss):
    assert np.all(S.rho(v_gauss, v_gauss, [-1.3, 1.2, 1.5]).values == 0.0)


def test_rho_layer_cake_oracle(v_zero, v_gauss):
    E = 1.25
    val = S.rho(v_zero, v_gauss, [E]).values[0]
    assert val < 0

    # rho = int_0^{sup v} d/dt[(8 pi/3)((E - t)^2 - 1)_+^{3/2}] vol{v >= t} dt
    def integrand(t):
        s = E - t
        dg = -8.0 * math.pi * s * math.sqrt(max(s * s - 1.0, 0.0))
        return dg * S.level_set_volume(v_gauss, t)

    ref, _ = integrate.quad(integrand, 0.0, 0.25, epsabs=0, epsrel=1e-10, limit=200)
    assert val == pytest.approx(ref, rel=1e-4, abs=0)


def test_rho_forbidden_band(v_zero, v_gauss):
    with pytest.raises(DomainError):
        S.rho(v_zero, P.gaussian(2.5), [1.2])


def test_rho_branch_symmetry(v_gauss):
    neg = P.gaussian(-0.5)
    up = S.rho(P.zero(), v_gauss, [1.2, 1.4]).values
    down = S.rho(P.zero(), neg, [-1.4, -1.2]).values[::-1]
    np.testing.assert_allclose(down, -up, rtol=1e-8)


def test_omega_identical_pair(v_gauss):
    om = S.omega(v_gauss, v_gauss, np.linspace(1.1, 1.5, 5))
    assert np.all(om.values == 0.0) and np.all(om.columns["direct"] == 0.0)


def test_omega_support_example(omega_gauss):
    """Literal example: omega restricted to E > 1 vanishes beyond 1.5 up to grid tolerance.

    phi * mu is not compactly supported (phi is nonzero on all of |x| > 1), so
    this is expected to fail; see the decisions ledger.
    """
    E, w = omega_gauss.grid, omega_gauss.columns["direct"]
    beyond = E > 1.5 + 1e-3
    assert np.abs(w[beyond]).max() <= 1e-6 * np.abs(w).max()


def test_omega_singular_support_in_window(omega_gauss):
    """What does hold: on [1.3, 1.6] the curvature of omega peaks at sup v + 1 = 1.5."""
    E, w = omega_gauss.grid, omega_gauss.columns["direct"]
    d2 = np.abs(np.diff(w, 2))
    mid = E[1:-1]
    sel = mid >= 1.3
    assert abs(mid[sel][np.argmax(d2[sel])] - 1.5) <= 2e-3


def test_omega_fd_vs_direct(omega_gauss):
    d = np.abs(omega_gauss.values - omega_gauss.columns["direct"]).max()
    assert d <= 1e-3 * np.abs(omega_gauss.columns["direct"]).max()


def test_omega_needs_uniform_grid(v_zero, v_gauss):
    with pytest.raises(ConfigurationError):
        S.omega(v_zero, v_gauss, [1.1, 1.2, 1.4])


# convolution identity


def test_convolution_zero_mu(v_gauss):
    E = np.linspace(1.1, 1.5, 41)
    mu = S.build_nu_mu(v_gauss, v_gauss, np.round(np.linspace(0.01, 0.6, 60), 12)).mu
    om = S.omega(v_gauss, v_gauss, E)
    rep = S.convolution_check(mu, om)
    assert rep.max_residual == 0.0


def test_convolution_identity(numu_gauss_c1, omega_gauss):
    rep = S.convolution_check(numu_gauss_c1.mu, omega_gauss)
    assert rep.relative_max <= 1e-2
    assert rep.split_max_residual <= 1e-2 * rep.max_omega
    assert rep.shift_max_deviation <= 1e-9 * rep.max_omega


def test_convolution_grid_mismatch(numu_gauss_c1, v_zero, v_gauss):
    om = S.omega(v_zero, v_gauss, np.linspace(1.1, 1.2, 7))
    with pytest.raises(ConfigurationError):
        S.convolution_check(numu_gauss_c1.mu, om)


# serialization


def test_csv_roundtrip(tmp_path, numu_gauss):
    mu = numu_gauss.mu
    mu.to_csv(tmp_path / "mu.csv")
    back = S.EnergyDistribution.from_csv(tmp_path / "mu.csv")
    np.testing.assert_array_equal(back.values, mu.values)
    np.testing.assert_array_equal(back.grid, mu.grid)
    assert back.support == mu.support and back.order == 1
