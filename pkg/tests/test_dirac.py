import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diracres import dirac as D
from diracres import potentials as P
from diracres.errors import ConfigurationError, DomainError, RefinementRequired

WIN = D.Window(1.4, 1.6, -0.3, -0.01)
PAIR = (0.5j, 0.6j)


# essential curve


def test_curve_real_at_theta_zero():
    plus, minus = D.essential_curve(0.0, np.linspace(0, 50, 101))
    assert np.all(plus.imag == 0) and np.all(np.abs(plus.real) >= 1)
    assert np.all(minus.real <= -1)


def test_curve_pinned_at_one():
    plus, minus = D.essential_curve(0.1j, [0.0])
    assert plus[0] == 1 and minus[0] == -1


def test_curve_lower_half_plane():
    plus, _ = D.essential_curve(0.1j, [1.0])
    assert plus[0].imag < 0


@given(st.floats(0.01, 0.6), st.floats(0.0, 20.0))
def test_curve_distance_zero_on_curve(t, lam):
    z = D.essential_curve(1j * t, [lam])[0][0]
    assert D.curve_distance(complex(z), 1j * t) <= 1e-7


# assembly


def test_free_spectrum_gap():
    z0 = P.zero()
    ev = D.channel_eigenvalues(D.assemble_channel(z0, -1, 0.1))
    assert np.abs(ev.real).min() >= 1 - 1e-3
    assert np.abs(ev.imag).max() == 0.0


def test_free_dilated_on_curve():
    z0 = P.zero()
    th = 0.15j
    ev = D.channel_eigenvalues(D.assemble_channel(z0, -1, 0.1, th))
    sel = (ev.real > 0) & (np.abs(ev) < 2.5)
    assert sel.sum() > 50
    assert max(D.curve_distance(z, th) for z in ev[sel]) <= 1e-8


def test_free_kappa_symmetry_example():
    """Literal example: kappa -> -kappa leaves the free eigenvalue set unchanged to 1e-8.

    In a box with a wall at r_max the channels quantise on different Bessel
    zeros (j_0 versus j_1 for kappa = -1, +1), so the sets differ by up to half
    a level spacing on every grid. Expected to fail; see the decisions ledger.
    """
    z0 = P.zero()
    g = D.default_grid(z0, 0.1).refined(2)
    a = D.channel_eigenvalues(D.assemble_channel(z0, -1, 0.1, 0j, g)).real
    b = D.channel_eigenvalues(D.assemble_channel(z0, 1, 0.1, 0j, g)).real
    a, b = a[np.abs(a) < 3], b[np.abs(b) < 3]
    d = np.abs(a[:, None] - b[None, :])
    assert max(d.min(axis=0).max(), d.min(axis=1).max()) <= 1e-8


def test_free_kappa_symmetry_continuum_limit():
    """What does hold: both channels fill [1, 3] with level spacing shrinking like 1/r_max."""
    z0 = P.zero()
    gaps = []
    for factor in (1.0, 2.0):
        g = D.GridSpec(D.max_spacing(0.1), D.max_spacing(0.1) * round(13.2 * factor / D.max_spacing(0.1)))
        a = D.channel_eigenvalues(D.assemble_channel(z0, -1, 0.1, 0j, g)).real
        b = D.channel_eigenvalues(D.assemble_channel(z0, 1, 0.1, 0j, g)).real
        a, b = a[(a > 1.2) & (a < 2)], b[(b > 1.2) & (b < 2)]
        d = np.abs(a[:, None] - b[None, :])
        gaps.append(max(d.min(axis=0).max(), d.min(axis=1).max()))
    assert gaps[1] < 0.6 * gaps[0]


def test_self_adjoint_at_theta_zero(v_gauss):
    m = D.assemble_channel(v_gauss, 2, 0.1)
    assert m.symmetry_residual() <= 1e-10
    ev = np.linalg.eigvals(m.matrix)
    assert np.abs(ev.imag).max() <= 1e-8


def test_complex_symmetric_when_dilated(v_gauss):
    assert D.assemble_channel(v_gauss, -2, 0.1, 0.5j).symmetry_residual() <= 1e-12


def test_under_resolved_grid(v_gauss):
    with pytest.raises(RefinementRequired):
        D.assemble_channel(v_gauss, 1, 0.1, 0j, D.GridSpec(0.1, 10.0))


@pytest.mark.parametrize("theta", [0.7j, -0.1j])
def test_theta_outside_domain(v_gauss, theta):
    with pytest.raises(DomainError):
        D.assemble_channel(v_gauss, 1, 0.1, theta)


def test_kappa_zero_rejected(v_gauss):
    with pytest.raises(ConfigurationError):
        D.assemble_channel(v_gauss, 0, 0.1)


def test_non_analytic_needs_exterior_scaling():
    with pytest.raises(DomainError):
        D.assemble_channel(P.bump(0.5, 1.0), 1, 0.1, 0.3j, distortion=D.DistortionMap(0.3j))
    assert D.distortion_for(P.bump(0.5, 1.0), 0.3j).kind == "exterior"


def test_small_non_analytic_uses_real_sampling(v_mollified):
    assert D.distortion_for(v_mollified, 0.5j).kind == "dilation-real"


def test_banded_storage_matches_dense(v_gauss):
    m = D.assemble_channel(v_gauss, -1, 0.2)
    from scipy import linalg
    ev = linalg.eig_banded(m.interleaved_banded(), lower=True, eigvals_only=True)
    np.testing.assert_allclose(np.sort(ev), np.sort(np.linalg.eigvalsh(m.matrix)), atol=1e-10)


# windows


def test_window_must_clear_curve():
    with pytest.raises(DomainError):
        D.check_window(D.Window(1.35, 1.6, -0.1, -1e-9), (0.1j, 0.15j))


def test_window_must_avoid_gap():
    with pytest.raises(DomainError):
        D.check_window(D.Window(0.9, 1.2, -0.1, -0.01), (0.5j,))


def test_window_half_open():
    w = D.Window(1.0, 2.0, -1.0, 0.0)
    assert w.contains(1.5 - 1j) and not w.contains(1.5 + 0j)


# resonances


@pytest.fixture(scope="module")
def gauss_set(v_gauss):
    return D.resonances(v_gauss, 0.1, *PAIR, WIN, 3, certify=True)


def test_free_has_no_resonances():
    for win in (WIN, D.Window(2.0, 2.5, -0.5, -0.05)):
        rs = D.resonances(P.zero(), 0.1, *PAIR, win, 3)
        assert rs.count == 0 and not rs.partial


def test_mollified_has_no_resonances(v_mollified):
    rs = D.resonances(v_mollified, 0.1, *PAIR, WIN, 3)
    assert rs.count == 0 and not rs.partial
    assert rs.domain_certificate["distortion"]["kind"] == "dilation-real"


def test_gaussian_resonances(gauss_set):
    assert gauss_set.count > 0 and not gauss_set.partial
    for e in gauss_set.entries:
        assert e.stability_gap <= D.STABILITY_GAP
        assert e.grid_shift <= 1e-4 and e.rmax_shift <= 1e-4
        assert e.multiplicity % (2 * abs(e.kappa)) == 0
        assert WIN.contains(e.z)


def test_window_discipline(gauss_set):
    for e in gauss_set.entries:
        for th in PAIR:
            assert D.curve_distance(e.z, th) >= D.CURVE_MARGIN
            assert D.between_real_axis_and_curve(e.z, th)


def test_theta_independence(v_gauss, gauss_set):
    other = D.resonances(v_gauss, 0.1, 0.5j, 0.65j, WIN, 3)
    assert other.count == gauss_set.count
    for a, b in zip(gauss_set.entries, other.entries):
        assert a.kappa == b.kappa
        assert abs(a.z - b.z) <= 10 * D.STABILITY_GAP


def test_threads_do_not_change_results(v_gauss, gauss_set):
    rs = D.resonances(v_gauss, 0.1, *PAIR, WIN, 3, threads=2, certify=True)
    assert rs.to_dict() == gauss_set.to_dict()


def test_dense_and_sparse_agree(v_gauss):
    a = D.resonances(v_gauss, 0.2, *PAIR, WIN, 2, solver="dense")
    b = D.resonances(v_gauss, 0.2, *PAIR, WIN, 2, solver="sparse")
    assert a.count == b.count
    for x, y in zip(a.entries, b.entries):
        assert abs(x.z - y.z) <= 1e-9


def test_compact_bump_resonance_stable_in_rmax():
    bump = P.bump(0.5, 1.0)
    rs = D.resonances(bump, 0.1, 0.3j, 0.4j, D.Window(1.4, 1.6, -0.2, -0.01), 2, certify=True)
    assert rs.count > 0
    for e in rs.entries:
        assert e.stability_gap <= D.STABILITY_GAP and e.rmax_shift <= 1e-4


def test_resonance_json_keys(gauss_set):
    d = gauss_set.to_dict()
    assert set(d["entries"][0]) >= {"z_re", "z_im", "mult", "kappa", "stability_gap"}
    assert d["count"] == sum(e["mult"] for e in d["entries"])


def test_equal_thetas_rejected(v_gauss):
    with pytest.raises(ConfigurationError):
        D.resonances(v_gauss, 0.1, 0.5j, 0.5j, WIN, 1)


# counting


def test_kappa_rule():
    assert [D.kappa_max_rule(h) for h in (0.2, 0.1, 0.05)] == [15, 30, 60]


def test_free_counts_zero():
    t = D.count_scaling(P.zero(), [0.2, 0.1], WIN, PAIR, c=1.0)
    assert t.counts == [0, 0] and math.isnan(t.slope)


def test_hbar_list_must_decrease(v_gauss):
    with pytest.raises(ConfigurationError):
        D.count_scaling(v_gauss, [0.1, 0.2], WIN, PAIR)
