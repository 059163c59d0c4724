import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc

from diracres import fbi as F
from diracres import phasespace as S
from diracres.errors import ConfigurationError, RefinementRequired

Y = np.linspace(-12.0, 12.0, 48001)
GAUSS = F.Sampled(Y, np.exp(-Y**2 / 2))
YH = np.linspace(0.0, 12.0, 24001)
HEAVI = F.Sampled(YH, np.ones_like(YH), exact_outside=True)
SCAN_X = np.round(np.arange(0.35, 0.701, 0.01), 10)


# transform


def test_zero_input():
    assert F.fbi_transform(F.Sampled(Y, np.zeros_like(Y)), 0.0, 1.0, 100.0).value == 0


@pytest.mark.parametrize("xi", [1.0, -1.0])
def test_gaussian_closed_form(xi):
    # |T| ~ 7e-22 at lam = 100: only the high-precision path can resolve it
    v = F.fbi_transform(lambda s: mp.exp(-s * s / 2), 0.0, xi, 100.0, dps=40)
    assert v.magnitude == pytest.approx(F.gaussian_oracle(xi, 100.0), rel=1e-6, abs=0)


@pytest.mark.parametrize("lam", [10.0, 50.0])
def test_gaussian_sampled_where_resolved(lam):
    v = F.fbi_transform(GAUSS, 0.0, 1.0, lam)
    assert v.resolved
    assert v.magnitude == pytest.approx(F.gaussian_oracle(1.0, lam), rel=1e-6, abs=0)


def test_gaussian_sampled_below_floor_is_flagged():
    v = F.fbi_transform(GAUSS, 0.0, 1.0, 100.0)
    assert not v.resolved
    assert v.magnitude <= F.NOISE_FACTOR * v.noise_floor


def test_gaussian_oracle_is_independent():
    # int e^{-i lam y xi - lam y^2/2 - y^2/2} dy by mpmath quadrature
    lam, xi = 30.0, 1.0
    re = mp.quad(lambda y: mp.cos(lam * y * xi) * mp.exp(-(lam + 1) * y * y / 2), [-mp.inf, mp.inf])
    assert F.prefactor(lam) * float(re) == pytest.approx(F.gaussian_oracle(xi, lam), rel=1e-10, abs=0)


@pytest.mark.parametrize("xi", [1.0, -1.0])
@pytest.mark.parametrize("lam", [10.0, 100.0, 500.0])
def test_heaviside_erfc_form(xi, lam):
    # int_0^inf e^{-i lam y xi - lam y^2/2} dy = sqrt(pi/(2 lam)) e^{-lam xi^2/2} erfc(i xi sqrt(lam/2))
    w = complex(mp.erfc(1j * xi * math.sqrt(lam / 2)))
    ref = F.prefactor(lam) * math.sqrt(math.pi / (2 * lam)) * math.exp(-lam * xi * xi / 2) * abs(w)
    assert F.heaviside_oracle(xi, lam) == pytest.approx(ref, rel=1e-10, abs=0)
    assert F.fbi_transform(HEAVI, 0.0, xi, lam).magnitude == pytest.approx(ref, rel=1e-6, abs=0)


def test_real_erfc_limit():
    # at xi = 0 the integral is half a Gaussian: sqrt(pi/(2 lam)) erfc(0)
    lam = 50.0
    v = F.fbi_transform(HEAVI, 0.0, 0.0, lam)
    assert v.magnitude == pytest.approx(F.prefactor(lam) * math.sqrt(math.pi / (2 * lam)) * erfc(0.0), rel=1e-8, abs=0)


def test_resolution_guard():
    coarse = F.Sampled(np.linspace(-5, 5, 101), np.ones(101))
    with pytest.raises(RefinementRequired):
        F.fbi_transform(coarse, 0.0, 1.0, 100.0)


def test_high_precision_callable():
    v = F.fbi_transform(lambda s: mp.exp(-s * s / 2), 0.0, 1.0, 100.0, dps=40)
    assert v.magnitude == pytest.approx(F.gaussian_oracle(1.0, 100.0), rel=1e-10, abs=0)


# classification


def test_gaussian_exponential_decay():
    v = F.classify_point(GAUSS, F.FBIProbe(0.0, 1.0))
    assert v.classification == "exponential_decay"


def test_heaviside_subexponential():
    for xi in (1.0, -1.0):
        v = F.classify_point(HEAVI, F.FBIProbe(0.0, xi))
        assert v.classification == "subexponential"


def test_heaviside_away_from_jump():
    v = F.classify_point(HEAVI, F.FBIProbe(5.0, 1.0))
    assert v.classification == "exponential_decay"


@settings(max_examples=10)
@given(st.floats(1e-3, 1e3), st.sampled_from([1.0, -1.0]))
def test_classification_scale_invariant(c, s):
    for u in (GAUSS, HEAVI):
        a = F.classify_point(u, F.FBIProbe(0.0, 1.0)).classification
        b = F.classify_point(u.scaled(c * s), F.FBIProbe(0.0, 1.0)).classification
        assert a == b


def test_refinement_keeps_exponential_decay():
    fine = np.linspace(-12.0, 12.0, 96001)
    v = F.classify_point(F.Sampled(fine, np.exp(-fine**2 / 2)), F.FBIProbe(0.0, 1.0))
    assert v.classification == "exponential_decay"


def test_probe_validation():
    with pytest.raises(ConfigurationError):
        F.FBIProbe(0.0, 1.0, tuple(np.linspace(50, 100, 10)))
    with pytest.raises(ConfigurationError):
        F.FBIProbe(0.0, 1.0, tuple(np.geomspace(50, 500, 5)))


def test_verdict_json():
    d = F.classify_point(HEAVI, F.FBIProbe(0.0, 1.0)).to_dict()
    assert d["classification"] == "subexponential" and d["rule"]["rate_floor"] == F.RATE_FLOOR


# scans


@pytest.fixture(scope="module")
def scan_mu(numu_gauss):
    return F.singular_support_scan(numu_gauss.mu, SCAN_X)


def test_scan_flags_sup_v(scan_mu):
    assert scan_mu.flagged
    assert any(abs(c - 0.5) <= 0.01 + 1e-9 for c in scan_mu.centers)


def test_scan_smooth_input_clean():
    res = F.singular_support_scan(GAUSS, np.linspace(-3, 3, 13))
    assert res.flagged == []


def test_scan_shift_equivariant(numu_gauss, scan_mu):
    shifted = F.singular_support_scan(numu_gauss.mu.shifted(1.0), SCAN_X + 1.0)
    assert [v.classification for v in shifted.verdicts] == [v.classification for v in scan_mu.verdicts]
    np.testing.assert_allclose(np.array(shifted.centers) - 1.0, scan_mu.centers, atol=1e-9)


def test_scan_needs_margin(numu_gauss):
    with pytest.raises(ConfigurationError):
        F.singular_support_scan(numu_gauss.mu, [0.9, 0.95])


def test_hausdorff_cells():
    assert F.hausdorff_cells([0.5], [0.51], 0.01) == pytest.approx(1.0)
    assert F.hausdorff_cells([], [], 0.01) == 0.0
    assert F.hausdorff_cells([0.5], [], 0.01) == math.inf


# probe sequences


def test_witness_zero():
    E = np.linspace(1.1, 1.9, 3201)
    assert not F.probe_sequence_witness(F.Sampled(E, np.zeros_like(E)), 1.5).found


def test_witness_at_threshold(omega_witness_samples):
    w = F.probe_sequence_witness(omega_witness_samples, 1.5)
    assert w.found
    row = next(r for r in w.rows if r["lambda"] == 400.0)
    assert row["epsilon"] <= 0.05
    eps = [r["epsilon"] for r in w.rows]
    assert all(b < a for a, b in zip(eps, eps[1:]))


def test_witness_fails_without_window(omega_witness_samples):
    u = omega_witness_samples
    E = u.grid
    cut = F.Sampled(E, np.where((E >= 1.4) & (E <= 1.6), 0.0, u.values))
    assert not F.probe_sequence_witness(cut, 1.5).found


def test_elliptic_invariance(numu_gauss):
    tau = numu_gauss.mu.shifted(1.0)
    E = np.round(1.0 + np.arange(0, 1051) * 1e-3, 12)
    conv = F.Sampled(E, S.convolve_nu(S.DPHI_TILDE_PLUS, tau, E))
    a = F.singular_support_scan(tau, SCAN_X + 1.0)
    b = F.singular_support_scan(conv, SCAN_X + 1.0)
    assert F.hausdorff_cells(a.centers, b.centers, 0.01) <= 1.0 + 1e-9
