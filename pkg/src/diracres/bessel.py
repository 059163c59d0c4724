"""Modified Bessel functions K_0, K_1, K_2 of complex argument.

Three regimes, chosen by |z|:

* ``|z| <= SERIES_RADIUS``: ascending series with the logarithmic term
  (principal branch of log, so the imaginary axis is reached by analytic
  continuation of the real-argument series).
* ``SERIES_RADIUS < |z| < ASYMPTOTIC_RADIUS``: Steed's continued fraction
  (Temme's CF2) for K_0, K_1 followed by upward recurrence. Towards the
  negative real axis CF2 stops converging; there K grows like e^{|Re z|}, the
  series suffers no cancellation and is used instead.
* ``|z| >= ASYMPTOTIC_RADIUS``: Hankel's large-argument expansion.

The middle regime exists because the large-argument expansion, optimally
truncated, is only good to about 1e-8 at |z| = 8, while the series loses
digits to cancellation on the positive real axis (about 1e-9 at z = 8).
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalFailure, SingularityError

SERIES_RADIUS = 2.0
ASYMPTOTIC_RADIUS = 17.0
CF_MAX_ARG = 0.75 * np.pi  # only for |z| >= 5; below that CF2 is used on Re z >= 0
EULER_GAMMA = 0.57721566490153286061

_EPS = np.finfo(float).eps


def _as_complex_array(z):
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise SingularityError("K_nu is singular at z = 0")
    return z


def _digamma_int(m):
    """psi(m + 1) for integer m >= 0."""
    return -EULER_GAMMA + sum(1.0 / j for j in range(1, m + 1))


def series_k(nu: int, z):
    """Ascending series for K_nu, nu in {0, 1, 2} (A&S 9.6.11 and 9.6.13)."""
    z = _as_complex_array(z)
    q = 0.25 * z * z
    half = 0.5 * z
    log_half = np.log(half)
    # finite sum
    if nu == 0:
        finite = np.zeros_like(z)
    else:
        finite = np.zeros_like(z)
        fact = [1.0, 1.0, 2.0]
        for k in range(nu):
            finite = finite + fact[nu - k - 1] / fact[k] * (-q) ** k
        finite = 0.5 * half ** (-nu) * finite
    # I_nu and the digamma series, summed together
    term = half**nu / float(np.prod(np.arange(1, nu + 1)) if nu else 1.0)
    i_sum = np.zeros_like(z)
    psi_sum = np.zeros_like(z)
    k = 0
    while True:
        i_sum = i_sum + term
        psi_sum = psi_sum + (_digamma_int(k) + _digamma_int(nu + k)) * term
        k += 1
        term = term * q / (k * (nu + k))
        if np.all(np.abs(term) * (1.0 + np.log1p(k)) <= _EPS * np.abs(i_sum)) or k > 200:
            break
    sign = (-1.0) ** (nu + 1)
    return finite + sign * log_half * i_sum + 0.5 * (-1.0) ** nu * psi_sum


@np.errstate(over="ignore", invalid="ignore")
def steed_k01(z, scaled: bool = False):
    """K_0 and K_1 by Steed's method applied to Temme's CF2 (times e^z if scaled)."""
    z = _as_complex_array(z)
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(z)
    q2 = np.ones_like(z)
    a1 = 0.25
    q = np.full_like(z, a1)
    c = np.full_like(z, a1)
    a = -a1
    s = 1.0 + q * delh
    done = np.zeros(z.shape, dtype=bool)
    for i in range(1, 20000):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = np.where(done, h, h + delh)
        dels = q * delh
        s = np.where(done, s, s + dels)
        done |= np.abs(dels) < _EPS * np.abs(s)
        if np.all(done):
            break
    else:  # pragma: no cover - guarded by the regime choice
        raise NumericalFailure("CF2 did not converge", {"z": [str(v) for v in z[~done]]})
    h = a1 * h
    k0 = np.sqrt(np.pi / (2.0 * z)) / s
    if not scaled:
        k0 = k0 * np.exp(-z)
    k1 = k0 * (z + 0.5 - h) / z
    return k0, k1


def asymptotic_k(nu: int, z, scaled: bool = False):
    """Hankel expansion sqrt(pi/2z) e^{-z} sum a_k(nu) z^{-k}, optimally truncated."""
    z = _as_complex_array(z)
    mu = 4.0 * nu * nu
    total = np.ones_like(z)
    term = np.ones_like(z)
    prev = np.full(z.shape, np.inf)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, 80):
        nxt = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        size = np.abs(nxt)
        active &= size < prev  # stop at the smallest term
        total = np.where(active, total + nxt, total)
        prev = np.where(active, size, prev)
        term = nxt
        active &= size > _EPS * np.abs(total)
        if not active.any():
            break
    out = np.sqrt(np.pi / (2.0 * z)) * total
    return out if scaled else out * np.exp(-z)


def bessel_k(nu: int, z, scaled: bool = False):
    """K_nu(z) for nu in {0, 1, 2}; vectorised over z.

    With ``scaled`` the result is e^z K_nu(z), computed without forming e^z
    where that would overflow. Raises SingularityError at z = 0.
    """
    if nu not in (0, 1, 2):
        raise ValueError("only orders 0, 1, 2 are implemented")
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(_as_complex_array(z))
    out = np.empty_like(z)
    r = np.abs(z)
    large = r >= ASYMPTOTIC_RADIUS
    cf_arg = np.where(r >= 5.0, CF_MAX_ARG, 0.5 * np.pi)
    small = (r <= SERIES_RADIUS) | (~large & (np.abs(np.angle(z)) > cf_arg))
    mid = ~(small | large)
    if small.any():
        out[small] = series_k(nu, z[small]) * (np.exp(z[small]) if scaled else 1.0)
    if large.any():
        out[large] = asymptotic_k(nu, z[large], scaled)
    if mid.any():
        k0, k1 = steed_k01(z[mid], scaled)
        out[mid] = (k0, k1, k0 + 2.0 * k1 / z[mid])[nu]
    return out[0] if scalar else out


def bessel_k_derivative(nu: int, z):
    """K_nu'(z) from the recurrence K_nu' = -K_{nu-1} - (nu/z) K_nu (nu >= 1)."""
    if nu not in (1, 2):
        raise ValueError("derivative implemented for orders 1 and 2")
    z = np.asarray(z, dtype=complex)
    return -bessel_k(nu - 1, z) - nu / z * bessel_k(nu, z)
