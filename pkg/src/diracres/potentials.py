"""Scalar potentials, thresholds and the mollified small-potential split.

Potentials are mostly radial. A radial potential stores its profile
r -> v(r); evaluation at points of R^3 goes through |x|. Kinds that have an
analytic continuation into a complex sector (gaussian, lorentz) accept
complex radii as well, which is what the complex-dilated operator needs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, MalformedPotentialError, NumericalFailure

KERNEL_C0 = (2.0 * np.pi) ** -1.5
MOLLIFIER_REACH = 8.0  # kernel truncated at |w| <= 8, tail below 1e-14
# decay exponents beyond this are treated as "faster than any power we test"
_SUPERPOLY = 20.0


def smoothstep5(u):
    """6u^5 - 15u^4 + 10u^3 clamped to [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


def cutoff_chi(t):
    """Fixed radial cutoff: 1 for t <= 1, 0 for t >= 2, smoothstep between."""
    return 1.0 - smoothstep5(np.asarray(t, dtype=float) - 1.0)


def japanese(x):
    """<x> = (1 + |x|^2)^(1/2), with x given by its norm."""
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


@dataclass(frozen=True)
class ScalarPotential:
    """A scalar potential with the metadata of the decay/sector assumption.

    ``profile`` maps radii to values when ``radial`` is true, otherwise it maps
    an (n, 3) array of points to n values. ``tail`` returns a radius beyond
    which |v| < t; it drives every truncated quadrature downstream.
    """

    profile: Callable
    delta: float
    sup_v: float
    inf_v: float
    epsilon: float = 0.5
    r0: float = 0.0
    radial: bool = True
    complex_ok: bool = False
    tail: Callable[[float], float] | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.delta > 0):
            raise ConfigurationError("decay exponent delta must be positive")
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigurationError("sector half-aperture epsilon must lie in (0, 1)")
        if not (np.isfinite(self.sup_v) and np.isfinite(self.inf_v)):
            raise MalformedPotentialError("sup_v and inf_v must be finite")

    def __call__(self, x):
        return eval_potential(self, x)

    def radial_values(self, r):
        """Profile values at radii r (real or, if complex_ok, complex)."""
        if not self.radial:
            raise ConfigurationError("radial_values needs a radial potential")
        r = np.asarray(r)
        if np.iscomplexobj(r) and not self.complex_ok:
            raise ConfigurationError(f"potential kind {self.kind!r} has no complex evaluation")
        out = np.asarray(self.profile(r))
        if not np.all(np.isfinite(out)):
            raise MalformedPotentialError(f"non-finite value from potential {self.kind!r}")
        return out

    def radius_bound(self, t: float) -> float:
        """A radius beyond which |v| < t."""
        if self.tail is None:
            raise ConfigurationError(f"potential kind {self.kind!r} declares no tail bound")
        return float(self.tail(t))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params, "delta": _json_float(self.delta)}


def _json_float(x):
    return "inf" if x == math.inf else float(x)


@dataclass(frozen=True)
class Thresholds:
    l_plus: float
    l_minus: float


def eval_potential(p: ScalarPotential, x):
    """v(x) for a point (3,) or points (n, 3)."""
    x = np.asarray(x, dtype=float)
    pts = np.atleast_2d(x)
    if pts.shape[-1] != 3:
        raise ConfigurationError("points must have three coordinates")
    if p.radial:
        vals = np.asarray(p.profile(np.linalg.norm(pts, axis=1)), dtype=float)
    else:
        vals = np.asarray(p.profile(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise MalformedPotentialError(f"non-finite value from potential {p.kind!r}")
    return float(vals[0]) if x.ndim == 1 else vals


def thresholds(p: ScalarPotential) -> Thresholds:
    return Thresholds(l_plus=max(1.0, p.sup_v - 1.0), l_minus=min(-1.0, p.inf_v + 1.0))


# --------------------------------------------------------------------------
# constructors


def zero() -> ScalarPotential:
    return ScalarPotential(
        profile=lambda r: np.zeros(np.shape(r), dtype=np.result_type(r, float)),
        delta=math.inf, sup_v=0.0, inf_v=0.0, epsilon=0.9, complex_ok=True,
        tail=lambda t: 0.0, kind="zero",
    )


def gaussian(amplitude: float = 0.5, width: float = 1.0) -> ScalarPotential:
    """A exp(-r^2 / w^2); entire, decays in the sector |Im z| < |Re z|."""
    a, w = float(amplitude), float(width)

    def tail(t):
        return 0.0 if t >= abs(a) else w * math.sqrt(math.log(abs(a) / t))

    return ScalarPotential(
        profile=lambda r: a * np.exp(-((np.asarray(r) / w) ** 2)),
        delta=math.inf, sup_v=max(a, 0.0), inf_v=min(a, 0.0), epsilon=0.9,
        complex_ok=True, tail=tail, kind="gaussian",
        params={"amplitude": a, "width": w},
    )


def lorentz(amplitude: float = 1.0, power: float = 4.0) -> ScalarPotential:
    """A <r>^(-p); the principal branch of (1 + z^2)^(-p/2) is analytic in the sector."""
    a, p = float(amplitude), float(power)

    def tail(t):
        return 0.0 if t >= abs(a) else math.sqrt((abs(a) / t) ** (2.0 / p) - 1.0)

    return ScalarPotential(
        profile=lambda r: a * (1.0 + np.asarray(r) ** 2) ** (-p / 2.0),
        delta=p, sup_v=max(a, 0.0), inf_v=min(a, 0.0), epsilon=0.9,
        complex_ok=True, tail=tail, kind="lorentz",
        params={"amplitude": a, "power": p},
    )


def bump(amplitude: float = 0.5, radius: float = 1.0) -> ScalarPotential:
    """A exp(1 - 1/(1 - (r/a)^2)) for r < a, zero outside; compactly supported."""
    amp, rad = float(amplitude), float(radius)

    def profile(r):
        u = np.asarray(r, dtype=float) / rad
        out = np.zeros_like(u)
        inside = u < 1.0
        out[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return out

    return ScalarPotential(
        profile=profile, delta=math.inf, sup_v=max(amp, 0.0), inf_v=min(amp, 0.0),
        tail=lambda t: rad, kind="bump", params={"amplitude": amp, "radius": rad},
    )


def table(r, v, delta: float, source: str = "") -> ScalarPotential:
    """Cubic-spline radial profile, zero beyond the last tabulated radius."""
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    if r.ndim != 1 or r.size < 4 or np.any(np.diff(r) <= 0):
        raise ConfigurationError("table needs >= 4 strictly increasing radii")
    if not np.all(np.isfinite(v)):
        raise MalformedPotentialError("table contains non-finite values")
    spline = CubicSpline(r, v, bc_type=((1, 0.0), "not-a-knot"))
    r_last = float(r[-1])

    def profile(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= r_last, spline(np.clip(x, r[0], r_last)), 0.0)

    fine = np.linspace(r[0], r_last, 20 * r.size)
    vals = spline(fine)
    return ScalarPotential(
        profile=profile, delta=float(delta), sup_v=float(vals.max()), inf_v=float(vals.min()),
        tail=lambda t: r_last, kind="table", params={"path": source},
    )


def table_from_csv(path, delta: float) -> ScalarPotential:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"potential table not found: {path}")
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].lstrip().startswith("#")]
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]] if not _is_number(rows[0][0])
                        else [[float(a), float(b)] for a, b in rows])
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(f"malformed table {path}: {exc}") from exc
    return table(data[:, 0], data[:, 1], delta, source=str(path))


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def general(fn, delta: float, sup_v: float, inf_v: float, extent: float) -> ScalarPotential:
    """Non-radial potential given on points of R^3; |v| is negligible beyond ``extent``."""
    return ScalarPotential(
        profile=fn, delta=delta, sup_v=sup_v, inf_v=inf_v, radial=False,
        tail=lambda t: extent, kind="general", params={"extent": extent},
    )


# --------------------------------------------------------------------------
# decay verification


@dataclass
class SampleSpec:
    radii: tuple
    directions: np.ndarray | None = None
    sector_fraction: float = 0.5  # epsilon' = fraction * epsilon

    def unit_directions(self):
        if self.directions is None:
            d = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [1, -1, 1], [-1, 2, 2], [0, -3, 4]],
                         dtype=float)
        else:
            d = np.atleast_2d(np.asarray(self.directions, dtype=float))
        return d / np.linalg.norm(d, axis=1, keepdims=True)


@dataclass
class AssumptionReport:
    radii: list
    exponent_v1: float
    exponent_v2: float
    exponent_diff: float
    delta_v1: float
    delta_v2: float
    fit_tolerance: float
    passed_v1: bool
    passed_v2: bool
    passed_diff: bool
    sector: dict

    @property
    def passed(self) -> bool:
        return self.passed_v1 and self.passed_v2 and self.passed_diff

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        for k in ("exponent_v1", "exponent_v2", "exponent_diff", "delta_v1", "delta_v2"):
            out[k] = _json_float(out[k])
        out["passed"] = self.passed
        return out


def fit_decay_exponent(radii, values) -> float:
    """Least-squares d in |f| ~ <r>^(-d).

    Returns inf when f vanishes identically or underflows to zero at a radius
    beyond nonzero samples (decay faster than any power at double precision).
    """
    radii = np.asarray(radii, dtype=float)
    mag = np.abs(np.asarray(values))
    nz = mag > 0
    if not nz.any():
        return math.inf
    if not nz.all() and nz.argmin() > 0 and not nz[nz.argmin():].any():
        return math.inf
    if nz.sum() < 2:
        return math.inf
    slope = np.polyfit(np.log(japanese(radii[nz])), np.log(mag[nz]), 1)[0]
    return float(-slope)


def _envelope(p: ScalarPotential, radii, dirs, other: ScalarPotential | None = None):
    pts = radii[:, None, None] * dirs[None, :, :]
    flat = pts.reshape(-1, 3)
    vals = eval_potential(p, flat)
    if other is not None:
        vals = vals - eval_potential(other, flat)
    return np.abs(vals).reshape(len(radii), -1).max(axis=1)


def verify_assumption(p1: ScalarPotential, p2: ScalarPotential, sample_spec: SampleSpec,
                      fit_tolerance: float = 0.2) -> AssumptionReport:
    radii = np.asarray(sample_spec.radii, dtype=float)
    if radii.size < 3:
        raise ConfigurationError("decay fit needs at least 3 radii")
    dirs = sample_spec.unit_directions()
    e1 = fit_decay_exponent(radii, _envelope(p1, radii, dirs))
    e2 = fit_decay_exponent(radii, _envelope(p2, radii, dirs))
    ed = fit_decay_exponent(radii, _envelope(p2, radii, dirs, other=p1))

    def ok(e, d):
        return e >= min(d, _SUPERPOLY) - fit_tolerance

    sector = {}
    for name, p in (("v1", p1), ("v2", p2)):
        if p.radial and p.complex_ok:
            eps_p = sample_spec.sector_fraction * p.epsilon
            vals = []
            for s in (1.0, -1.0):
                z = radii * (1.0 + 1j * eps_p * s)
                vals.append(np.abs(p.radial_values(z)))
            env = np.maximum(*vals)
            e = fit_decay_exponent(radii, env)
            sector[name] = {"status": "checked", "epsilon_prime": eps_p,
                            "exponent": _json_float(e), "passed": bool(np.all(np.isfinite(env)) and ok(e, p.delta))}
        else:
            sector[name] = {"status": "declared, unchecked"}
    return AssumptionReport(
        radii=[float(r) for r in radii], exponent_v1=e1, exponent_v2=e2, exponent_diff=ed,
        delta_v1=p1.delta, delta_v2=p2.delta, fit_tolerance=fit_tolerance,
        passed_v1=ok(e1, p1.delta), passed_v2=ok(e2, p2.delta), passed_diff=ed > 3.0, sector=sector,
    )


# --------------------------------------------------------------------------
# mollified split


def kernel_mass(tol: float = 1e-12) -> float:
    """Integral of K(y) = C0 exp(-|y|^2/2) over R^3, by radial quadrature."""
    val, _ = integrate.quad(lambda r: 4.0 * np.pi * r * r * KERNEL_C0 * np.exp(-0.5 * r * r),
                            0.0, np.inf, epsabs=tol, epsrel=tol)
    return val


def mollifier_width(r, R: float):
    """lambda_R(x) = <x/R>^(-4)."""
    return japanese(np.asarray(r, dtype=float) / R) ** -4


def peetre_ratio(x, w, lam: float, delta: float) -> float:
    """<x + lam w>^(-d) / (2^(d/2) <x>^(-d) <w>^d); <= 1 whenever 0 < lam <= 1."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    lhs = japanese(np.linalg.norm(x + lam * w)) ** -delta
    rhs = 2.0 ** (delta / 2.0) * japanese(np.linalg.norm(x)) ** -delta * japanese(np.linalg.norm(w)) ** delta
    return float(lhs / rhs)


_GL_FINE = np.polynomial.legendre.leggauss(20)
_GL_COARSE = np.polynomial.legendre.leggauss(14)


def _panel_sum(f, edges, rule):
    x, w = rule
    a, b = edges[:-1, None], edges[1:, None]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = mid + half * x[None, :]
    return float(np.sum(half * w[None, :] * f(nodes)))


class _MollifiedProfile:
    """v1(r) = (2 pi)^(-1/2)/(lam r) int s h(s) [e^{-(r-s)^2/2lam^2} - e^{-(r+s)^2/2lam^2}] ds.

    Exact angular reduction of the 3-D convolution for radial v2, with
    h(s) = (1 - chi(s/R)) v2(s). Panels of width <= lam between breakpoints
    R, 2R; 20-point Gauss-Legendre per panel, 14-point rule as error estimate.
    """

    def __init__(self, v2: ScalarPotential, R: float, rtol: float, atol: float):
        self.v2, self.R, self.rtol, self.atol = v2, float(R), rtol, atol
        self.s_max = v2.radius_bound(1e-300)
        self._cache: dict = {}
        self.max_error = 0.0

    def h(self, s):
        return (1.0 - cutoff_chi(s / self.R)) * self.v2.radial_values(s)

    def _one(self, r: float) -> float:
        lam = float(mollifier_width(r, self.R))
        lo = max(self.R, r - MOLLIFIER_REACH * lam)
        hi = min(self.s_max, r + MOLLIFIER_REACH * lam)
        if hi <= lo:
            return 0.0
        # work in u = (s - r)/lam so the Gaussian nodes carry no rounding from r
        u_lo, u_hi = (lo - r) / lam, (hi - r) / lam
        edges = np.linspace(u_lo, u_hi, max(2, int(math.ceil(u_hi - u_lo))) + 1)
        kink = (2.0 * self.R - r) / lam
        if u_lo < kink < u_hi:
            edges = np.unique(np.append(edges, kink))

        def f(u):
            s = r + lam * u
            if r > 0.0:
                ang = (s / r) * (-np.expm1(-2.0 * r * s / (lam * lam)))
            else:
                ang = 2.0 * s * s / (lam * lam)
            return self.h(s) * np.exp(-0.5 * u * u) * ang

        pref = 1.0 / math.sqrt(2.0 * math.pi)
        fine = pref * _panel_sum(f, edges, _GL_FINE)
        coarse = pref * _panel_sum(f, edges, _GL_COARSE)
        err = abs(fine - coarse)
        self.max_error = max(self.max_error, err / max(abs(fine), 1e-300))
        if err > self.rtol * abs(fine) + self.atol:
            raise NumericalFailure("mollifier quadrature did not reach tolerance",
                                   {"r": r, "estimate": fine, "error": err, "R": self.R})
        return fine

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        key = (r.shape, r.tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            return hit.copy()
        flat = np.abs(r.ravel())
        out = np.array([self._one(float(x)) for x in flat]).reshape(r.shape)
        if len(self._cache) < 64:
            self._cache[key] = out
        return out.copy()


def mollify_split(v2: ScalarPotential, R: float, rtol: float = 1e-8, atol: float = 1e-300) -> ScalarPotential:
    """The small potential v1 = K_R * ((1 - chi(./R)) v2) of the construction.

    Raises NumericalFailure when the quadrature error estimate exceeds
    rtol*|v1| + atol at some radius.
    """
    if not v2.radial:
        raise ConfigurationError("mollify_split is implemented for radial potentials")
    if R <= 0:
        raise ConfigurationError("R must be positive")
    # |v1| <= sup_{|y| > R} |v2| plus the truncated Gaussian tail
    reach = v2.radius_bound(1e-300)
    tail_sup = _sup_abs_beyond(v2, R, reach)
    params = {"base": v2.describe(), "R": float(R)}
    if reach <= R:
        z = zero()
        return ScalarPotential(profile=z.profile, delta=math.inf, sup_v=0.0, inf_v=0.0, epsilon=0.9,
                               tail=lambda t: 0.0, kind="mollified", params=params)
    prof = _MollifiedProfile(v2, R, rtol, atol)
    r_s = _radial_samples(0.0, reach + MOLLIFIER_REACH, R)
    vals = prof(r_s)
    return ScalarPotential(
        profile=prof, delta=v2.delta,
        sup_v=max(float(vals.max()), 0.0), inf_v=min(float(vals.min()), 0.0), epsilon=v2.epsilon,
        tail=lambda t: v2.radius_bound(t) + MOLLIFIER_REACH, kind="mollified",
        params={**params, "sup_tail_bound": tail_sup},
    )


def _sup_abs_beyond(v2: ScalarPotential, R: float, reach: float) -> float:
    if reach <= R:
        return 0.0
    return float(np.abs(v2.radial_values(_radial_samples(R, reach, R, n=4000))).max())


def _radial_samples(lo: float, hi: float, scale: float, n: int = 400):
    """Dense on [lo, lo + 4 scale], geometric beyond (capped at 1e6 scale)."""
    hi = min(hi, lo + 1e6 * scale)
    near = np.linspace(lo, min(hi, lo + 4.0 * scale), n)
    if hi <= lo + 4.0 * scale:
        return near
    return np.concatenate([near, np.geomspace(lo + 4.0 * scale, hi, n // 4)[1:]])


def radius_for_tail(v2: ScalarPotential, eps0: float) -> float:
    """Smallest R (per the declared tail bound) with sup_{|y|>R} |v2| <= eps0."""
    return v2.radius_bound(eps0)


# --------------------------------------------------------------------------
# config


def potential_from_config(spec: dict, base_dir: Path | str = ".") -> ScalarPotential:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError("potential declaration needs a 'kind'")
    kind = spec["kind"]
    try:
        if kind == "zero":
            return zero()
        if kind == "gaussian":
            return gaussian(spec.get("amplitude", 0.5), spec.get("width", 1.0))
        if kind == "lorentz":
            return lorentz(spec.get("amplitude", 1.0), spec.get("power", 4.0))
        if kind == "bump":
            return bump(spec.get("amplitude", 0.5), spec.get("radius", 1.0))
        if kind == "table":
            return table_from_csv(Path(base_dir) / spec["path"], spec["delta"])
        if kind == "mollified":
            base = potential_from_config(spec["base"], base_dir)
            if "R" in spec:
                R = float(spec["R"])
            elif "eps0" in spec:
                R = radius_for_tail(base, float(spec["eps0"]))
            else:
                raise ConfigurationError("mollified potential needs 'R' or 'eps0'")
            return mollify_split(base, R)
    except KeyError as exc:
        raise ConfigurationError(f"potential {kind!r} missing key {exc}") from exc
    raise ConfigurationError(f"unknown potential kind {kind!r}")
