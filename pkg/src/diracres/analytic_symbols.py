"""Fourier transforms of the split kernels phi~_+ and phi~_- as analytic symbols.

Convention: F u(xi) = (2 pi)^(-1/2) int u(x) e^{-i x xi} dx.

With phi~_+(x) = 8 pi (x + 1)(x + 2)^(1/2) x_+^(1/2),

    F[phi~_+](xi) = -C0 e^{i xi} K_2(i xi) / (i xi),   C0 = -8 pi / sqrt(2 pi),

from int_1^inf y (y^2 - 1)^(1/2) e^{-p y} dy = K_2(p)/p at p = i xi.

Decay: |K_2(i xi)| ~ (pi / 2 xi)^(1/2), so |F[phi~_+](xi)| ~ |xi|^(-3/2).
The order is -3/2, matching the x_+^(1/2) edge of phi~_+ (a function with an
x^(1/2) jump singularity has transform ~ xi^(-3/2)).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .bessel import bessel_k
from .errors import ConfigurationError, SingularityError
from .phasespace import phi_tilde_minus, phi_tilde_plus

SYMBOL_PREFACTOR = -8.0 * math.pi / math.sqrt(2.0 * math.pi)
SYMBOL_ORDER = -1.5
ORDER_BAND = 0.1
ELLIPTICITY_MIN = 1e-6


def _check_sign(sign: str) -> str:
    if sign not in ("+", "-"):
        raise ConfigurationError("sign must be '+' or '-'")
    return sign


def _plus_analytic(z, c0: float = SYMBOL_PREFACTOR):
    """Holomorphic continuation of F[phi~_+] off the real axis (cut along i R_+)."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise SingularityError("the symbol is singular at xi = 0")
    p = 1j * z
    return -c0 * bessel_k(2, p, scaled=True) / p


def symbol_analytic(sign: str, z, c0: float = SYMBOL_PREFACTOR):
    """Symbol at complex points; the minus symbol is a_-(z) = -a_+(-z)."""
    _check_sign(sign)
    if sign == "+":
        return _plus_analytic(z, c0)
    return -_plus_analytic(-np.asarray(z, dtype=complex), c0)


def symbol_eval(sign: str, xi, c0: float = SYMBOL_PREFACTOR):
    """F[phi~_sign](xi) for real xi != 0."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi == 0):
        raise SingularityError("the symbol is singular at xi = 0")
    out = symbol_analytic(sign, xi, c0)
    return complex(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# pairing oracle


@dataclass
class PairingResult:
    sign: str
    xi0: float
    width: float
    symbol_side: complex
    kernel_side: complex

    @property
    def relative_difference(self) -> float:
        return abs(self.symbol_side - self.kernel_side) / abs(self.kernel_side)


_GL = np.polynomial.legendre.leggauss(24)


def _panel_quad(f, lo, hi, n_panels):
    x, w = _GL
    edges = np.linspace(lo, hi, n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    return np.sum(half * w[None, :] * f(mid + half * x[None, :]))


def pairing_oracle(sign: str = "+", xi0: float = 10.0, width: float = 1.0, c0: float = SYMBOL_PREFACTOR,
                   n_panels: int = 400) -> PairingResult:
    """<F phi~, psi> against <phi~, F psi> for psi(xi) = exp(-(xi - xi0)^2 / (2 width^2)).

    The Gaussian sits away from xi = 0, where the symbol has a non-integrable
    |xi|^-3 singularity; its mass within 9 widths of 0 is below 1e-17.
    F psi(x) = width e^{-i x xi0} e^{-width^2 x^2 / 2}; the kernel side is
    integrated in u with x = +-u^2, which removes the x^(1/2) edge.
    """
    _check_sign(sign)
    if abs(xi0) < 9.0 * width:
        raise ConfigurationError("the test Gaussian must sit >= 9 widths away from xi = 0")
    s = width
    # the symbol falls off like |xi|^-3/2, so the heavy side of the window faces 0
    if xi0 > 0:
        lo, hi = max(xi0 - 9.0 * s, 0.5 * s), xi0 + 12.0 * s
    else:
        lo, hi = xi0 - 12.0 * s, min(xi0 + 9.0 * s, -0.5 * s)
    psi = lambda xi: np.exp(-0.5 * ((xi - xi0) / s) ** 2)
    lhs = _panel_quad(lambda xi: symbol_eval(sign, xi, c0) * psi(xi), lo, hi, n_panels // 4)

    kern = phi_tilde_plus if sign == "+" else phi_tilde_minus
    sgn = 1.0 if sign == "+" else -1.0
    u_max = (2.0 * 40.0) ** 0.25 / math.sqrt(s)  # e^{-s^2 u^4 / 2} < e^{-40}

    def fk(u):
        x = sgn * u * u
        return kern(x) * s * np.exp(-1j * x * xi0 - 0.5 * (s * x) ** 2) * 2.0 * u

    rhs = _panel_quad(fk, 0.0, u_max, n_panels)
    return PairingResult(sign, float(xi0), float(s), complex(lhs), complex(rhs))


def calibrate_prefactor(xi0: float = 10.0, width: float = 1.0) -> float:
    """Recover C0 from the pairing oracle: C0 = <phi~_+, F psi> / <-e^{i xi}K_2(i xi)/(i xi), psi>."""
    unit = pairing_oracle("+", xi0, width, c0=1.0)
    ratio = unit.kernel_side / unit.symbol_side
    return float(ratio.real)


# --------------------------------------------------------------------------
# certificates


@dataclass
class SymbolCertificate:
    sign: str
    order: float
    fit_slope: float
    ellipticity_floor: float
    upper_constant: float
    validity_radius: float
    residuals: float
    band: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def decay_and_ellipticity(sign: str, xi_samples, order: float = SYMBOL_ORDER, band: float = ORDER_BAND,
                          c0: float = SYMBOL_PREFACTOR) -> SymbolCertificate:
    """Fit |a(xi)| ~ |xi|^p and certify p within ``band`` of ``order``.

    The floor is min |a(xi)| (1 + |xi|)^(-order) over the samples; the
    certificate fails if p is off or the floor is below 1e-6.
    """
    _check_sign(sign)
    xi = np.abs(np.asarray(xi_samples, dtype=float))
    if xi.size < 10 or xi.min() <= 0:
        raise ConfigurationError("need >= 10 nonzero samples")
    if xi.max() / xi.min() < 100.0:
        raise ConfigurationError("samples must span at least two decades")
    mag = np.abs(symbol_eval(sign, xi, c0))
    coef = np.polyfit(np.log(xi), np.log(mag), 1)
    resid = float(np.abs(np.log(mag) - np.polyval(coef, np.log(xi))).max())
    scaled = mag * (1.0 + xi) ** (-order)
    floor = float(scaled.min())
    slope = float(coef[0])
    return SymbolCertificate(sign, order, slope, floor, float(scaled.max()), float(xi.min()), resid, band,
                             bool(abs(slope - order) <= band and floor >= ELLIPTICITY_MIN))


def cauchy_derivative(sign: str, xi: float, n: int, nodes: int = 64, c0: float = SYMBOL_PREFACTOR) -> complex:
    """D^n a(xi) by the trapezoid rule on the circle |z - xi| = (1 + |xi|)/2."""
    rad = 0.5 * (1.0 + abs(xi))
    th = 2.0 * np.pi * np.arange(nodes) / nodes
    vals = symbol_analytic(sign, xi + rad * np.exp(1j * th), c0)
    return complex(math.factorial(n) / rad**n * np.mean(vals * np.exp(-1j * n * th)))


@dataclass
class DerivativeBound:
    n: int
    constant: float  # max of |D^n a| / (2^(n+1) n! (1+|xi|)^(order - n))
    spread: float  # max/min of that ratio over the samples
    fit_slope: float

    def to_dict(self) -> dict:
        return asdict(self)


def derivative_bounds(sign: str, xi_samples, orders=(1, 2), order: float = SYMBOL_ORDER) -> list[DerivativeBound]:
    xi = np.asarray(xi_samples, dtype=float)
    out = []
    for n in orders:
        d = np.array([abs(cauchy_derivative(sign, float(x), n)) for x in xi])
        ratio = d / (2.0 ** (n + 1) * math.factorial(n) * (1.0 + np.abs(xi)) ** (order - n))
        slope = float(np.polyfit(np.log(np.abs(xi)), np.log(d), 1)[0])
        out.append(DerivativeBound(n, float(ratio.max()), float(ratio.max() / ratio.min()), slope))
    return out


def recurrence_residual(z) -> np.ndarray:
    """|K_1(z) - z K_1'(z) - z K_2(z)| / |z K_2(z)| with K_1' from a Cauchy integral.

    The derivative comes from K_1 values on a small circle, so the check
    couples the evaluation branches instead of restating the recurrence
    used to build K_2.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty(z.size)
    m = 32
    th = 2.0 * np.pi * np.arange(m) / m
    for i, zz in enumerate(z):
        rad = min(0.25 * abs(zz), 0.5)
        vals = bessel_k(1, zz + rad * np.exp(1j * th))
        d1 = np.mean(vals * np.exp(-1j * th)) / rad
        k2 = bessel_k(2, zz)
        out[i] = abs(bessel_k(1, zz) - zz * d1 - zz * k2) / abs(zz * k2)
    return out
