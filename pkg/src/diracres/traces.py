"""Operator traces of radial Dirac operators against their phase-space prediction.

Weyl normalisation: Tr[(chi f)(D_2)] - Tr[(chi f)(D_1)] ~ (2 pi hbar)^-3 * 2 int (chi f) d rho_0,
where rho_0 counts (4 pi / 3)-balls. The ``phasespace`` omega carries twice
that prefactor, so the phase-space side is (2 pi hbar)^-3 int chi f omega dE.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from . import dirac
from .errors import ConfigurationError, DomainError
from .phasespace import omega_direct
from .potentials import ScalarPotential, thresholds

WEYL_CONSTANT = (2.0 * math.pi) ** -3
TRUNCATION_TOL = 0.01
TRACE_KAPPA_C = 5.0  # c = 3 leaves ~2% of the trace in the truncated channels
_GL = np.polynomial.legendre.leggauss(16)


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class IntervalCutoff:
    """1 on [lo, hi], 0 outside [lo - edge, hi + edge], C-infinity in between."""

    lo: float
    hi: float
    edge: float = 0.1

    def __post_init__(self):
        if not (self.lo < self.hi and self.edge > 0):
            raise ConfigurationError("cutoff needs lo < hi and edge > 0")

    @property
    def support(self) -> tuple:
        return (self.lo - self.edge, self.hi + self.edge)

    def __call__(self, E):
        E = np.asarray(E, dtype=float)
        return _smooth_step((E - self.lo + self.edge) / self.edge) * _smooth_step((self.hi + self.edge - E) / self.edge)


@dataclass(frozen=True)
class GaussianProbe:
    """f(E) = exp(i lam beta (alpha - E) - lam (alpha - E)^2 / 2)."""

    alpha: float
    beta: float
    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigurationError("probe lambda must be positive")

    def __call__(self, z):
        w = self.alpha - np.asarray(z, dtype=complex)
        return np.exp(1j * self.lam * self.beta * w - 0.5 * self.lam * w * w)


@dataclass(frozen=True)
class Polynomial:
    """f(E) = sum c_k E^k (coefficients in increasing degree)."""

    coefficients: tuple = (1.0,)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.polynomial.polynomial.polyval(z, np.asarray(self.coefficients, dtype=complex))


@dataclass(frozen=True)
class TestFunctionSpec:
    chi: IntervalCutoff
    f: object = Polynomial()
    scale: complex = 1.0

    __test__ = False  # not a pytest class

    def __call__(self, E):
        """(chi f)(E) on real energies."""
        return self.scale * self.chi(E) * self.f(E)

    def holomorphic(self, z):
        return self.scale * self.f(z)

    def scaled(self, a: complex) -> "TestFunctionSpec":
        return TestFunctionSpec(self.chi, self.f, self.scale * a)

    def describe(self) -> dict:
        f = self.f
        fd = {"kind": "gaussian", **asdict(f)} if isinstance(f, GaussianProbe) else {
            "kind": "polynomial", "coefficients": [float(np.real(c)) for c in f.coefficients]}
        return {"chi": asdict(self.chi), "f": fd, "scale": [complex(self.scale).real, complex(self.scale).imag]}


def test_function_from_config(spec: dict) -> TestFunctionSpec:
    try:
        chi = IntervalCutoff(*spec["chi"]["interval"], spec["chi"].get("edge", 0.1))
        f = spec.get("f", {"kind": "polynomial", "coefficients": [1.0]})
        if f["kind"] == "polynomial":
            fn = Polynomial(tuple(float(c) for c in f["coefficients"]))
        elif f["kind"] == "gaussian":
            fn = GaussianProbe(float(f["alpha"]), float(f["beta"]), float(f["lambda"]))
        else:
            raise ConfigurationError(f"unknown test function kind {f['kind']!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad test function spec: {exc}") from exc
    return TestFunctionSpec(chi, fn)


# --------------------------------------------------------------------------
# operator side


@dataclass
class TraceResult:
    value: complex
    per_channel: dict
    remainder: float
    kappa_max: int
    hbar: float
    converged: bool

    def to_dict(self) -> dict:
        return {"value": [self.value.real, self.value.imag], "remainder": self.remainder, "kappa_max": self.kappa_max,
                "hbar": self.hbar, "converged": self.converged,
                "per_channel": {str(k): [v.real, v.imag] for k, v in sorted(self.per_channel.items())}}


def channel_spectrum(v: ScalarPotential, kappa: int, hbar: float, window: tuple, grid: dirac.GridSpec,
                     samples=None) -> np.ndarray:
    """Real eigenvalues of the theta = 0 channel matrix inside ``window`` (banded solver)."""
    mat = dirac.assemble_channel(v, kappa, hbar, 0j, grid, dirac.DistortionMap(0j), samples=samples)
    ab = mat.interleaved_banded()
    return sla.eig_banded(ab, lower=True, eigvals_only=True, select="v", select_range=window, check_finite=False)


def _trace_grid(v1: ScalarPotential, v2: ScalarPotential, hbar: float) -> dirac.GridSpec:
    g1, g2 = dirac.default_grid(v1, hbar), dirac.default_grid(v2, hbar)
    return g1 if g1.r_max >= g2.r_max else g2


def _kappa_max(hbar: float, kappa_max: int | None) -> int:
    return dirac.kappa_max_rule(hbar, TRACE_KAPPA_C) if kappa_max is None else int(kappa_max)


def functional_trace(v: ScalarPotential, hbar: float, tf: TestFunctionSpec, kappa_max: int | None = None,
                     grid: dirac.GridSpec | None = None, threads: int = 1, reference: ScalarPotential | None = None
                     ) -> TraceResult:
    """sum_kappa 2|kappa| sum_n (chi f)(E_n) over the theta = 0 spectrum.

    With ``reference`` the result is the trace difference v minus reference,
    taken channel by channel on a common grid so the free parts cancel before
    summation. The truncation remainder is twice the contribution of the
    last channel pair (+-kappa_max).
    """
    km = _kappa_max(hbar, kappa_max)
    pots = [v] if reference is None else [v, reference]
    g = grid if grid is not None else (_trace_grid(v, reference, hbar) if reference is not None
                                       else dirac.default_grid(v, hbar))
    window = tuple(tf.chi.support)
    samples = [dirac.potential_samples(p, dirac.DistortionMap(0j), g) for p in pots]
    kappas = dirac._kappas(km)

    def one(k):
        total = 0j
        for sgn, p, s in zip((1.0, -1.0), pots, samples):
            ev = channel_spectrum(p, k, hbar, window, g, s)
            total += sgn * complex(np.sum(tf(ev)))
        return k, 2 * abs(k) * total

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = dict(ex.map(one, kappas))
    else:
        parts = dict(one(k) for k in kappas)
    value = sum(parts[k] for k in kappas)  # fixed order
    remainder = 2.0 * abs(parts[km] + parts[-km])
    converged = remainder <= TRUNCATION_TOL * abs(value) or (value == 0 and remainder == 0)
    return TraceResult(complex(value), parts, float(remainder), km, float(hbar), bool(converged))


def trace_difference(v1: ScalarPotential, v2: ScalarPotential, hbar: float, tf: TestFunctionSpec,
                     kappa_max: int | None = None, threads: int = 1) -> TraceResult:
    """Tr[(chi f)(D_2)] - Tr[(chi f)(D_1)]."""
    if v1 is v2:
        km = _kappa_max(hbar, kappa_max)
        return TraceResult(0j, {k: 0j for k in dirac._kappas(km)}, 0.0, km, float(hbar), True)
    return functional_trace(v2, hbar, tf, kappa_max, threads=threads, reference=v1)


# --------------------------------------------------------------------------
# phase-space side


def _check_band(v1, v2, support):
    t1, t2 = thresholds(v1), thresholds(v2)
    lp, lm = max(t1.l_plus, t2.l_plus), min(t1.l_minus, t2.l_minus)
    lo, hi = support
    if hi > lm and lo < lp:
        raise DomainError(f"supp(chi f) = [{lo:g}, {hi:g}] meets the forbidden band [{lm:g}, {lp:g}]")


def omega_quadrature(v1, v2, support, panels: int = 28):
    """Gauss-Legendre nodes, weights and omega values on ``support``."""
    x, w = _GL
    edges = np.linspace(support[0], support[1], panels + 1)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights, omega_direct(v1, v2, nodes)


def phase_space_trace(v1: ScalarPotential, v2: ScalarPotential, hbar: float, tf: TestFunctionSpec,
                      quadrature=None) -> complex:
    """(2 pi hbar)^-3 int (chi f)(E) omega(E) dE (omega with the 8 pi / 3 prefactor)."""
    _check_band(v1, v2, tf.chi.support)
    if v1 is v2:
        return 0j
    nodes, weights, om = quadrature if quadrature is not None else omega_quadrature(v1, v2, tf.chi.support)
    return complex(WEYL_CONSTANT * hbar**-3 * np.sum(weights * tf(nodes) * om))


# --------------------------------------------------------------------------
# residual scaling


@dataclass
class ResidualTable:
    hbar: list
    operator: list
    phase_space: list
    residual: list
    converged: list
    residual_order: float
    operator_slope: float
    phase_slope: float
    fitted_constant: float  # operator / phase-space at the smallest hbar
    passed: bool

    def to_dict(self) -> dict:
        c = lambda z: [complex(z).real, complex(z).imag]
        return {"hbar": self.hbar, "operator": [c(z) for z in self.operator],
                "phase_space": [c(z) for z in self.phase_space], "residual": [c(z) for z in self.residual],
                "converged": self.converged, "residual_order": self.residual_order,
                "operator_slope": self.operator_slope, "phase_slope": self.phase_slope,
                "fitted_constant": self.fitted_constant, "passed": self.passed}


def _slope(hbar, vals) -> float:
    a = np.abs(np.asarray(vals, dtype=complex))
    if np.any(a == 0):
        return math.nan
    return float(np.polyfit(np.log(1.0 / np.asarray(hbar)), np.log(a), 1)[0])


def bruneau_robert_residual(v1, v2, hbar_list, tf: TestFunctionSpec, kappa_c: float = TRACE_KAPPA_C,
                            threads: int = 1, max_order: float = 2.5) -> ResidualTable:
    """Operator trace difference minus phase-space term over hbar_list, with fitted orders."""
    hb = [float(h) for h in hbar_list]
    if len(hb) < 3:
        raise ConfigurationError("need at least 3 hbar values")
    quad = None if v1 is v2 else omega_quadrature(v1, v2, tf.chi.support)
    ops, phs, conv = [], [], []
    for h in hb:
        tr = trace_difference(v1, v2, h, tf, dirac.kappa_max_rule(h, kappa_c), threads)
        ops.append(tr.value)
        conv.append(tr.converged)
        phs.append(phase_space_trace(v1, v2, h, tf, quad))
    res = [o - p for o, p in zip(ops, phs)]
    if all(r == 0 for r in res):
        order = -math.inf
    else:
        order = _slope(hb, res)
    const = abs(ops[-1] / phs[-1]) if phs[-1] != 0 else math.nan
    passed = bool(order <= max_order) if not math.isnan(order) else False
    return ResidualTable(hb, ops, phs, res, conv, order, _slope(hb, ops), _slope(hb, phs), float(const), passed)


# --------------------------------------------------------------------------
# complex windows and the local trace formula


@dataclass(frozen=True)
class ComplexWindow:
    """Omega = (c - 2b, c + 2b) + i(-2a, a] and W = [c - b, c + b] + i(-a, a], c = E0 + 1."""

    E0: float
    a: float = 0.05
    b: float = 0.2

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ConfigurationError("a and b must be positive")
        if self.E0 + 1.0 - 2.0 * self.b <= 1.0:
            raise DomainError("Omega must lie in Re z > 1")

    @property
    def center(self) -> float:
        return self.E0 + 1.0

    @property
    def W(self) -> dirac.Window:
        c = self.center
        return dirac.Window(c - self.b, c + self.b, -self.a, self.a)

    @property
    def Omega(self) -> dirac.Window:
        c = self.center
        return dirac.Window(c - 2 * self.b, c + 2 * self.b, -2 * self.a, self.a)

    @property
    def ratio_small(self) -> bool:
        return self.a / self.b <= 0.5

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SuppressionReport:
    c0_real: float  # min of -log|f|/lam on the real segments of Omega \ W
    c0_region: float  # min over a mesh of all of Omega \ W
    argmin: list
    ratio_small: bool
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _outside_mesh(win: ComplexWindow, n: int = 81):
    O = win.Omega
    x = np.linspace(O.re_lo, O.re_hi, n)
    y = np.linspace(O.im_lo, O.im_hi, n)
    Z = x[None, :] + 1j * y[:, None]
    W = win.W
    inside = (Z.real >= W.re_lo) & (Z.real <= W.re_hi) & (Z.imag > W.im_lo) & (Z.imag <= W.im_hi)
    return Z[~inside]


def suppression_check(window: ComplexWindow, probe: GaussianProbe, n: int = 81) -> SuppressionReport:
    """C0 = min -log|f|/lambda on Omega \\ W; passes when the region minimum is positive.

    Close to the real axis |f(x - iy)| = exp(-lam (beta y + (x - alpha)^2/2 - y^2/2)),
    so the upper strip Im z in (0, a] of the lateral pieces needs beta a < b^2/2
    (roughly), which is where small a/b enters.
    """
    if not window.ratio_small:
        warnings.warn(f"a/b = {window.a / window.b:g} is not small", stacklevel=2)
    Z = _outside_mesh(window, n)
    c = -np.log(np.abs(probe(Z))) / probe.lam
    k = int(np.argmin(c))
    O, W = window.Omega, window.W
    xs = np.concatenate([np.linspace(O.re_lo, W.re_lo, n)[:-1], np.linspace(W.re_hi, O.re_hi, n)[1:]])
    c_real = float(np.min(-np.log(np.abs(probe(xs))) / probe.lam))
    region = float(c[k])
    return SuppressionReport(c_real, region, [Z[k].real, Z[k].imag], window.ratio_small, bool(region > 0))


@dataclass
class LocalTraceReport:
    resonance_sum: complex
    phase_space: complex
    ratio: float
    realized_epsilon: float
    bound: float
    bound_holds: bool
    n_resonances: tuple
    consistent: bool
    agrees: bool  # resonance sum within a factor 2 of the phase-space side
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["resonance_sum"] = [self.resonance_sum.real, self.resonance_sum.imag]
        d["phase_space"] = [self.phase_space.real, self.phase_space.imag]
        d["n_resonances"] = list(self.n_resonances)
        return d


def resonance_sum(res_set: dirac.ResonanceSet | None, f, W: dirac.Window, multiplicity_factor: int = 1) -> complex:
    if res_set is None:
        return 0j
    zs = [(e.z, e.multiplicity) for e in res_set.entries if W.contains(e.z)]
    return complex(sum(multiplicity_factor * m * f(z) for z, m in zs))


def local_trace_experiment(v1, v2, hbar: float, window: ComplexWindow, probe: GaussianProbe, res1, res2,
                           chi: IntervalCutoff | None = None, multiplicity_factor: int = 1,
                           quadrature=None) -> LocalTraceReport:
    """Sum of f over resonances in W (v2 minus v1, with multiplicity) against (2 pi hbar)^-3 int f chi omega.

    The realized epsilon is -log|int f chi omega dE| / lambda (the witness
    normalisation), and the bound is |resonance sum| >= (2 pi hbar)^-3 e^{-eps lam} / 2.
    """
    W = window.W
    chi = chi if chi is not None else IntervalCutoff(W.re_lo, W.re_hi, window.b)
    tf = TestFunctionSpec(chi, probe)
    if v1 is v2:
        return LocalTraceReport(0j, 0j, 1.0, math.inf, 0.0, True, (0, 0), True, True, "identical potentials")
    quad = quadrature if quadrature is not None else omega_quadrature(v1, v2, chi.support, panels=64)
    ps = phase_space_trace(v1, v2, hbar, tf, quad)
    s2 = resonance_sum(res2, probe, W, multiplicity_factor)
    s1 = resonance_sum(res1, probe, W, multiplicity_factor)
    rs = s2 - s1
    integral = abs(ps) / (WEYL_CONSTANT * hbar**-3)
    eps = -math.log(integral) / probe.lam if integral > 0 else math.inf
    bound = 0.5 * WEYL_CONSTANT * hbar**-3 * math.exp(-eps * probe.lam) if math.isfinite(eps) else 0.0
    n = tuple(sum(e.multiplicity for e in r.entries if W.contains(e.z)) if r is not None else 0 for r in (res1, res2))
    ratio = abs(rs) / abs(ps) if ps != 0 else (math.inf if rs != 0 else 1.0)
    consistent = not (n == (0, 0) and abs(ps) > 0)
    note = "" if consistent else "no resonances in W but the phase-space side is nonzero"
    agrees = 0.5 <= ratio <= 2.0
    return LocalTraceReport(rs, ps, float(ratio), float(eps), float(bound), bool(abs(rs) >= bound), n, consistent,
                            bool(agrees), note)
