"""Energy distributions of a pair of potentials.

nu(t) = -vol{v2 >= t} + vol{v1 >= t} for t > 0 and vol{v2 <= t} - vol{v1 <= t}
for t < 0; mu = nu' as distributions. rho and omega = rho' are built from the
symbol eigenvalues v + <xi>, v - <xi>; omega = +-phi * mu with
phi(x) = 8 pi x (x^2 - 1)_+^(1/2).

Normalisation: rho and omega carry the 8 pi / 3 prefactor of the polar-
coordinate formula, i.e. twice the phase-space volume of the xi-ball. That
keeps omega = +-phi * mu exact with the 8 pi kernel; phase_space_trace in
``traces`` divides it back out.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, optimize
from scipy.stats import qmc

from .errors import ConfigurationError, DomainError, NumericalFailure
from .potentials import ScalarPotential, thresholds

RHO_PREFACTOR = 8.0 * np.pi / 3.0
PLATEAU_SLOPE = 1e-12
_QUAD = dict(epsabs=0.0, epsrel=1e-11, limit=400)


# --------------------------------------------------------------------------
# kernels


def phi(x):
    """8 pi x (x^2 - 1)_+^(1/2)."""
    x = np.asarray(x, dtype=float)
    return 8.0 * np.pi * x * np.sqrt(np.maximum(x * x - 1.0, 0.0))


def phi_plus(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 1.0, phi(x), 0.0)


def phi_minus(x):
    x = np.asarray(x, dtype=float)
    return np.where(x < -1.0, phi(x), 0.0)


def phi_tilde_plus(x):
    """phi_+(x + 1) = 8 pi (x + 1)(x + 2)^(1/2) x_+^(1/2)."""
    return phi_plus(np.asarray(x, dtype=float) + 1.0)


def phi_tilde_minus(x):
    return phi_minus(np.asarray(x, dtype=float) - 1.0)


def phi_antiderivative(x):
    """Phi with Phi' = phi, Phi = (8 pi / 3)(x^2 - 1)_+^(3/2) (zero on [-1, 1])."""
    x = np.asarray(x, dtype=float)
    return RHO_PREFACTOR * np.maximum(x * x - 1.0, 0.0) ** 1.5


def phi_second_antiderivative(x):
    """Psi with Psi' = Phi, odd-symmetric continuation, zero on [-1, 1]."""
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    s = np.sqrt(np.maximum(a * a - 1.0, 0.0))
    val = a * (2.0 * a * a - 5.0) * s / 8.0 + 3.0 / 8.0 * np.log(a + s)
    return RHO_PREFACTOR * np.sign(x) * np.where(a > 1.0, val, 0.0)


def phi_derivative(x):
    """phi'(x) = 8 pi (2x^2 - 1)/(x^2 - 1)^(1/2) on |x| > 1, zero inside."""
    x = np.asarray(x, dtype=float)
    d = x * x - 1.0
    out = np.zeros_like(x)
    m = d > 0
    out[m] = 8.0 * np.pi * (2.0 * x[m] ** 2 - 1.0) / np.sqrt(d[m])
    return out


@dataclass(frozen=True)
class ConvolutionKernel:
    """K together with its first two antiderivatives (needed for product integration)."""

    name: str
    k: object
    k1: object
    k2: object
    shift: float = 0.0  # K(x) = base(x + shift)
    support: str = "all"  # "plus": base restricted to x > 1, "minus": x < -1

    def _mask(self, y):
        if self.support == "plus":
            return y > 1.0
        if self.support == "minus":
            return y < -1.0
        return np.ones_like(y, dtype=bool)

    def _eval(self, fn, x, anchor):
        y = np.asarray(x, dtype=float) + self.shift
        val = fn(y)
        if self.support == "all":
            return val
        m = self._mask(y)
        if self.support == "plus":
            return np.where(m, val, anchor(1.0))
        return np.where(m, val, anchor(-1.0))

    def __call__(self, x):
        return self._eval(self.k, x, lambda a: 0.0)

    def first(self, x):
        return self._eval(self.k1, x, lambda a: float(self.k1(np.array(a))))

    def second(self, x):
        # continuity of the second antiderivative across the cut: K2(y) = K2(c) + K1(c)(y - c)
        y = np.asarray(x, dtype=float) + self.shift
        if self.support == "all":
            return self.k2(y)
        c = 1.0 if self.support == "plus" else -1.0
        base = float(self.k2(np.array(c))) + float(self.k1(np.array(c))) * (y - c)
        return np.where(self._mask(y), self.k2(y), base)


PHI = ConvolutionKernel("phi", phi, phi_antiderivative, phi_second_antiderivative)
DPHI = ConvolutionKernel("phi'", phi_derivative, phi, phi_antiderivative)
DPHI_PLUS = ConvolutionKernel("phi_+'", phi_derivative, phi, phi_antiderivative, support="plus")
DPHI_MINUS = ConvolutionKernel("phi_-'", phi_derivative, phi, phi_antiderivative, support="minus")
DPHI_TILDE_PLUS = ConvolutionKernel("phi~_+'", phi_derivative, phi, phi_antiderivative, shift=1.0, support="plus")
DPHI_TILDE_MINUS = ConvolutionKernel("phi~_-'", phi_derivative, phi, phi_antiderivative, shift=-1.0, support="minus")


# --------------------------------------------------------------------------
# EnergyDistribution


@dataclass
class EnergyDistribution:
    """Samples of a distribution on an energy grid.

    ``kind`` is "density" (values are a density against dE) or "cumulative"
    (values are a distribution function). ``columns`` holds companion samples on
    the same grid (for instance the cumulative nu behind a density mu).
    """

    name: str
    grid: np.ndarray
    values: np.ndarray
    kind: str = "density"
    support: tuple = (-math.inf, math.inf)
    order: int = 0
    columns: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise ConfigurationError("grid and values must be 1-D of equal length")
        if self.grid.size > 1 and np.any(np.diff(self.grid) <= 0):
            raise ConfigurationError("energy grid must be strictly increasing")
        if self.kind not in ("density", "cumulative"):
            raise ConfigurationError("kind must be 'density' or 'cumulative'")
        if self.order > 1:
            raise ConfigurationError("distribution order must be <= 1")

    @property
    def spacing(self) -> float | None:
        """Common spacing when the grid is uniform (relative tolerance 1e-9), else None."""
        d = np.diff(self.grid)
        if d.size == 0:
            return None
        h = float(np.mean(d))
        return h if np.allclose(d, h, rtol=1e-9, atol=1e-12 * max(1.0, abs(self.grid).max())) else None

    def outside_support_max(self) -> float:
        lo, hi = self.support
        out = (self.grid < lo) | (self.grid > hi)
        return float(np.abs(self.values[out]).max()) if out.any() else 0.0

    def shifted(self, s: float) -> "EnergyDistribution":
        """tau_s u(t) = u(t - s): same samples on the grid moved by s."""
        meta = dict(self.meta)
        if "nu_head" in meta:
            meta["nu_head"] = {k: [v[0] + s, v[1], v[2] + s] for k, v in meta["nu_head"].items()}
        if meta.get("origin") is not None:
            meta["origin"] = meta["origin"] + s
        return EnergyDistribution(f"tau({s:g}){self.name}", self.grid + s, self.values.copy(), self.kind,
                                  (self.support[0] + s, self.support[1] + s), self.order,
                                  {k: v.copy() for k, v in self.columns.items()}, meta)

    def to_csv(self, path: Path, unit: str = "rest-mass energy") -> list[Path]:
        """Write ``path`` (CSV) and ``path.json`` (sidecar); returns both paths."""
        path = Path(path)
        names = ["E", self.name] + list(self.columns)
        cols = [self.grid, self.values] + [self.columns[k] for k in self.columns]
        with path.open("w", newline="") as fh:
            fh.write(f"# E in units of {unit}\n")
            fh.write(",".join(names) + "\n")
            for row in zip(*cols):
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        side = path.with_suffix(path.suffix + ".json")
        side.write_text(json.dumps(self.sidecar(), sort_keys=True, indent=2) + "\n")
        return [path, side]

    def sidecar(self) -> dict:
        return {"name": self.name, "kind": self.kind, "order": self.order,
                "support": [_jsonable(s) for s in self.support], "columns": list(self.columns),
                "meta": _jsonable(self.meta)}

    @classmethod
    def from_csv(cls, path: Path) -> "EnergyDistribution":
        path = Path(path)
        side = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
        header = lines[0].split(",")
        data = np.array([[complex(x.replace("i", "j")) if "j" in x or "i" in x else float(x)
                          for x in ln.split(",")] for ln in lines[1:]])
        if data.size == 0:
            data = np.zeros((0, len(header)))
        vals = data[:, 1]
        if np.all(np.imag(vals) == 0):
            vals = np.real(vals)
        cols = {name: np.real(data[:, i + 2]) for i, name in enumerate(header[2:])}
        sup = tuple(float(s) for s in side["support"])
        return cls(side["name"], np.real(data[:, 0]), vals, side["kind"], sup, side["order"], cols, side["meta"])


def _fmt(v) -> str:
    if isinstance(v, complex) or np.iscomplexobj(v):
        v = complex(v)
        return f"{v.real!r}{v.imag:+.17g}j"
    return repr(float(v))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


# --------------------------------------------------------------------------
# radial helpers


def _crossings(v: ScalarPotential, level: float, r_hi: float, n: int = 4097) -> list[float]:
    """Radii in (0, r_hi) where v(r) - level changes sign."""
    if r_hi <= 0:
        return []
    r = np.linspace(0.0, r_hi, n)
    g = v.radial_values(r) - level
    out = []
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        out.append(optimize.brentq(lambda x: float(v.radial_values(np.array([x]))[0]) - level,
                                   r[i], r[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    for i in np.nonzero(g[1:-1] == 0)[0]:
        out.append(float(r[i + 1]))
    return sorted(out)


def _reach(v: ScalarPotential, t: float) -> float:
    return v.radius_bound(t) * (1.0 + 1e-9) + 1e-12 if v.radius_bound(t) > 0 else 0.0


def _radial_integral(fn, breaks, pots) -> float:
    """4 pi int_0^inf r^2 fn(r) dr with breakpoints; algebraic tails handled by a semi-infinite piece."""
    far = max([_reach(p, 1e-300) for p in pots] + [0.0])
    cut = min(far, 200.0)
    pts = sorted(b for b in set(breaks) if 0.0 < b < cut)
    f = lambda r: 4.0 * np.pi * r * r * float(fn(np.array([r]))[0])
    total, err = 0.0, 0.0
    edges = [0.0] + pts + [cut]
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            val, e = integrate.quad(f, a, b, **_QUAD)
            total, err = total + val, err + e
    if far > cut:
        val, e = integrate.quad(f, cut, np.inf, **_QUAD)
        total, err = total + val, err + e
    if not np.isfinite(total):
        raise NumericalFailure("radial quadrature returned a non-finite value", {"breaks": pts})
    return total


# --------------------------------------------------------------------------
# level sets


def level_set_volume(v: ScalarPotential, E: float, side: str = ">=", seed: int = 0,
                     return_error: bool = False):
    """vol{x : v(x) >= E} (side '>=') or vol{x : v(x) <= E} (side '<=')."""
    if side not in (">=", "<="):
        raise ConfigurationError("side must be '>=' or '<='")
    if (side == ">=" and E <= 0) or (side == "<=" and E >= 0):
        raise DomainError(f"vol{{v {side} {E}}} is infinite for a decaying potential")
    if v.radial:
        vol, err = _radial_level_volume(v, E, side), 0.0
    else:
        vol, err = _qmc_level_volume(v, E, side, seed)
    return (vol, err) if return_error else vol


def _radial_level_volume(v: ScalarPotential, E: float, side: str) -> float:
    r_hi = _reach(v, abs(E))
    if r_hi == 0.0:
        return 0.0
    roots = _crossings(v, E, r_hi)
    edges = [0.0] + roots + [r_hi]
    vol = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid = float(v.radial_values(np.array([0.5 * (a + b)]))[0])
        inside = mid >= E if side == ">=" else mid <= E
        if inside:
            vol += 4.0 * np.pi / 3.0 * (b**3 - a**3)
    return vol


def _qmc_level_volume(v: ScalarPotential, E: float, side: str, seed: int, m: int = 14, reps: int = 8):
    r_hi = _reach(v, abs(E))
    if r_hi == 0.0:
        return 0.0, 0.0
    box = (2.0 * r_hi) ** 3
    est = []
    for k in range(reps):
        pts = (qmc.Sobol(3, scramble=True, seed=seed + k).random_base2(m) * 2.0 - 1.0) * r_hi
        vals = np.asarray(v.profile(pts), dtype=float)
        hit = vals >= E if side == ">=" else vals <= E
        est.append(box * hit.mean())
    est = np.array(est)
    return float(est.mean()), float(est.std(ddof=1) / math.sqrt(reps))


def detect_plateau(v: ScalarPotential, r_hi: float, n: int = 20001) -> list[tuple]:
    """Radial intervals where v is flat (|v'| < 1e-12) at a nonzero level."""
    if not v.radial or r_hi <= 0:
        return []
    r = np.linspace(0.0, r_hi, n)
    f = v.radial_values(r)
    slope = np.abs(np.diff(f)) / np.diff(r)
    flat = (slope < PLATEAU_SLOPE) & (np.abs(f[:-1]) > 1e-12) & (r[:-1] > 0.05 * r_hi)
    runs, start = [], None
    for i, fl in enumerate(flat):
        if fl and start is None:
            start = i
        if not fl and start is not None:
            if i - start >= 3:
                runs.append((float(r[start]), float(r[i]), float(f[start])))
            start = None
    if start is not None and len(flat) - start >= 3:
        runs.append((float(r[start]), float(r[-1]), float(f[start])))
    return runs


# --------------------------------------------------------------------------
# nu, mu


@dataclass
class NuMu:
    nu_plus: tuple  # (nu_{+,1}, nu_{+,2})
    nu_minus: tuple
    mu_plus: tuple
    mu_minus: tuple
    mu: EnergyDistribution  # density, with the cumulative nu in columns["nu"]

    def all_distributions(self):
        out = []
        for name, pair in (("nu_plus", self.nu_plus), ("nu_minus", self.nu_minus),
                           ("mu_plus", self.mu_plus), ("mu_minus", self.mu_minus)):
            out.extend(pair)
        return out + [self.mu]


def _head_integral(v: ScalarPotential, a: float, positive: bool) -> float:
    """int min(v_+, a) dx (positive) or int min(v_-, a) dx: the layer-cake form of int_0^a vol{v >= t} dt."""
    sgn = 1.0 if positive else -1.0
    if (v.sup_v if positive else -v.inf_v) <= 0:
        return 0.0
    roots = _crossings(v, sgn * a, _reach(v, a))
    fn = lambda r: np.minimum(np.maximum(sgn * v.radial_values(r), 0.0), a)
    return _radial_integral(fn, roots, [v])


def build_nu_mu(v1: ScalarPotential, v2: ScalarPotential, grid, seed: int = 0) -> NuMu:
    grid = np.asarray(grid, dtype=float)
    if np.any(grid == 0.0):
        raise DomainError("energy grid must avoid E = 0")
    if grid.size < 3 or np.any(np.diff(grid) <= 0):
        raise ConfigurationError("energy grid must be strictly increasing with >= 3 points")
    for p in (v1, v2):
        if p.radial:
            runs = detect_plateau(p, _reach(p, 1e-12))
            if runs:
                raise DomainError(f"potential {p.kind!r} has a flat plateau (atom in mu): {runs[0]}")
    pos, neg = grid > 0, grid < 0
    nu_p = [np.zeros(grid.size) for _ in range(2)]
    nu_m = [np.zeros(grid.size) for _ in range(2)]
    for j, p in enumerate((v1, v2)):
        for i in np.nonzero(pos)[0]:
            nu_p[j][i] = -level_set_volume(p, grid[i], ">=", seed)
        for i in np.nonzero(neg)[0]:
            nu_m[j][i] = level_set_volume(p, grid[i], "<=", seed)

    def deriv(values, mask):
        out = np.zeros(grid.size)
        if mask.sum() >= 3:
            out[mask] = np.gradient(values[mask], grid[mask], edge_order=2)
        elif mask.sum() == 2:
            out[mask] = np.diff(values[mask])[0] / np.diff(grid[mask])[0]
        return out

    mu_p = [deriv(nu_p[j], pos) for j in range(2)]
    mu_m = [deriv(nu_m[j], neg) for j in range(2)]
    mu_vals = np.where(pos, mu_p[1] - mu_p[0], mu_m[1] - mu_m[0])
    nu_vals = np.where(pos, nu_p[1] - nu_p[0], nu_m[1] - nu_m[0])

    head = {}
    if pos.any():
        t0 = float(grid[pos][0])
        i0 = -_head_integral(v2, t0, True) + _head_integral(v1, t0, True) if v1.radial and v2.radial else 0.0
        head["pos"] = [0.0, i0, t0]
    if neg.any():
        t1 = float(grid[neg][-1])
        i1 = _head_integral(v2, -t1, False) - _head_integral(v1, -t1, False) if v1.radial and v2.radial else 0.0
        head["neg"] = [t1, i1, 0.0]

    lo = min(v1.inf_v, v2.inf_v)
    hi = max(v1.sup_v, v2.sup_v)

    def dist(name, vals, kind, sup, order=0):
        return EnergyDistribution(name, grid, vals, kind, sup, order)

    sup_p = [(0.0, p.sup_v) for p in (v1, v2)]
    sup_m = [(p.inf_v, 0.0) for p in (v1, v2)]
    mu = EnergyDistribution("mu", grid, mu_vals, "density", (lo, hi), 1, {"nu": nu_vals},
                            {"nu_head": head, "origin": 0.0, "pair": [v1.describe(), v2.describe()]})
    return NuMu(
        nu_plus=tuple(dist(f"nu_plus_{j + 1}", nu_p[j], "cumulative", sup_p[j]) for j in range(2)),
        nu_minus=tuple(dist(f"nu_minus_{j + 1}", nu_m[j], "cumulative", sup_m[j]) for j in range(2)),
        mu_plus=tuple(dist(f"mu_plus_{j + 1}", mu_p[j], "density", sup_p[j], 1) for j in range(2)),
        mu_minus=tuple(dist(f"mu_minus_{j + 1}", mu_m[j], "density", sup_m[j], 1) for j in range(2)),
        mu=mu,
    )


# --------------------------------------------------------------------------
# rho and omega


def _branch_sign(v1, v2, E) -> float:
    t1, t2 = thresholds(v1), thresholds(v2)
    # the band is open: at E = l_+ (or l_-) the formulas still hold
    if E >= max(t1.l_plus, t2.l_plus):
        return 1.0
    if E <= min(t1.l_minus, t2.l_minus):
        return -1.0
    raise DomainError(f"E = {E} lies between thresholds [{min(t1.l_minus, t2.l_minus)}, "
                      f"{max(t1.l_plus, t2.l_plus)}]")


def _stable_diff(fa, a, b, dv):
    """f(a) - f(b) for f in {g, phi} with a - b = dv, avoiding cancellation."""
    A = np.sqrt(np.maximum(a * a - 1.0, 0.0))
    B = np.sqrt(np.maximum(b * b - 1.0, 0.0))
    both = (np.abs(a) > 1.0) & (np.abs(b) > 1.0) & (np.sign(a) == np.sign(b))
    dA = np.where(both, dv * (a + b) / np.where(both, A + B, 1.0), 0.0)
    if fa == "g":
        direct = RHO_PREFACTOR * (A**3 - B**3)
        stable = RHO_PREFACTOR * dA * (A * A + A * B + B * B)
    else:
        direct = 8.0 * np.pi * (a * A - b * B)
        stable = 8.0 * np.pi * (dv * A + b * dA)
    return np.where(both, stable, direct)


def _pair_radial(v1, v2, E, which):
    sgn = _branch_sign(v1, v2, E)
    if v1.is_zero and v2.is_zero:
        return 0.0
    breaks = []
    for p in (v1, v2):
        for lvl in (E - 1.0, E + 1.0):
            if p.inf_v <= lvl <= p.sup_v and lvl != 0.0:
                breaks += _crossings(p, lvl, _reach(p, abs(lvl)))

    def fn(r):
        a = E - v2.radial_values(r)
        b = E - v1.radial_values(r)
        return _stable_diff(which, a, b, v1.radial_values(r) - v2.radial_values(r))

    return sgn * _radial_integral(fn, breaks, [v1, v2])


def _pair_qmc(v1, v2, E, which, seed, m=15, reps=8):
    sgn = _branch_sign(v1, v2, E)
    r_hi = max(_reach(v1, 1e-14), _reach(v2, 1e-14))
    box = (2.0 * r_hi) ** 3
    est = []
    for k in range(reps):
        pts = (qmc.Sobol(3, scramble=True, seed=seed + k).random_base2(m) * 2.0 - 1.0) * r_hi
        a = E - np.asarray(v2.profile(pts)) if not v2.radial else E - v2.radial_values(np.linalg.norm(pts, axis=1))
        b = E - np.asarray(v1.profile(pts)) if not v1.radial else E - v1.radial_values(np.linalg.norm(pts, axis=1))
        est.append(box * np.mean(_stable_diff(which, a, b, b - a)))
    return sgn * float(np.mean(est))


def _pair(v1, v2, E, which, seed=0):
    if v1.radial and v2.radial:
        return _pair_radial(v1, v2, E, which)
    return _pair_qmc(v1, v2, E, which, seed)


def rho(v1: ScalarPotential, v2: ScalarPotential, E_grid, seed: int = 0) -> EnergyDistribution:
    """rho(E) = +-(8 pi/3) int [((E - v2)^2 - 1)_+^(3/2) - ((E - v1)^2 - 1)_+^(3/2)] dx."""
    E_grid = np.asarray(E_grid, dtype=float)
    vals = np.array([_pair(v1, v2, float(E), "g", seed) for E in E_grid])
    return EnergyDistribution("rho", E_grid, vals, "cumulative", (-math.inf, math.inf), 0,
                              meta={"prefactor": "8pi/3"})


def omega(v1: ScalarPotential, v2: ScalarPotential, E_grid, seed: int = 0) -> EnergyDistribution:
    """omega = d rho / dE by central differences; the direct pairing is in columns['direct']."""
    E_grid = np.asarray(E_grid, dtype=float)
    r = rho(v1, v2, E_grid, seed)
    if E_grid.size < 3:
        raise ConfigurationError("omega needs at least 3 grid points")
    if r.spacing is None:
        raise ConfigurationError("omega needs a uniform energy grid")
    fd = np.gradient(r.values, E_grid, edge_order=2)
    direct = np.array([_pair(v1, v2, float(E), "phi", seed) for E in E_grid])
    lo = min(v1.inf_v, v2.inf_v) + 1.0
    hi = max(v1.sup_v, v2.sup_v) + 1.0
    return EnergyDistribution("omega", E_grid, fd, "density", (lo, hi) if E_grid[0] > 0 else (lo - 2, hi - 2),
                              1, {"direct": direct, "rho": r.values})


def omega_direct(v1, v2, E_grid, seed: int = 0) -> np.ndarray:
    """omega(E) = +-int [phi(E - v2) - phi(E - v1)] dx, without differentiating rho."""
    return np.array([_pair(v1, v2, float(E), "phi", seed) for E in np.asarray(E_grid, dtype=float)])


# --------------------------------------------------------------------------
# convolutions against mu through its cumulative nu


_GL4 = np.polynomial.legendre.leggauss(4)


def convolve_nu(kernel: ConvolutionKernel, mu: EnergyDistribution, E_grid) -> np.ndarray:
    """int kernel(E - t) nu(t) dt with nu piecewise linear between samples.

    With kernel = phi' this is phi * mu. Cells within two widths of a kernel
    singularity (E - t = +-1 after the shift) are integrated exactly through
    the kernel's antiderivatives; elsewhere a 4-point Gauss rule is used, which
    avoids the cancellation the antiderivative form suffers on tiny cells.
    The cells adjacent to t = 0, where nu has an integrable log-type blow-up,
    use the stored head integrals int nu dt.
    """
    if "nu" not in mu.columns:
        raise ConfigurationError("convolution needs the cumulative nu column")
    t, nu = mu.grid, mu.columns["nu"]
    E_all = np.asarray(E_grid, dtype=float)
    out = np.zeros(E_all.size)
    head = mu.meta.get("nu_head", {})
    origin = mu.meta.get("origin")
    sing = (1.0 - kernel.shift, -1.0 - kernel.shift)
    xq, wq = _GL4
    # linear interpolation of nu never bridges the origin
    segments = [np.ones(t.size, dtype=bool)] if origin is None else [t > origin, t < origin]
    for seg in segments:
        ts, ns = t[seg], nu[seg]
        if ts.size < 2:
            continue
        a, b = ts[:-1], ts[1:]
        na = ns[:-1]
        slope = (ns[1:] - na) / (b - a)
        half = 0.5 * (b - a)
        nodes = a[:, None] + half[:, None] * (1.0 + xq[None, :])
        nu_nodes = na[:, None] + slope[:, None] * (nodes - a[:, None])
        for i, E in enumerate(E_all):
            ua, ub = E - a, E - b
            near = np.zeros(a.size, dtype=bool)
            for c in sing:
                dist = np.minimum(np.abs(ua - c), np.abs(ub - c))
                near |= ((ua - c) * (ub - c) <= 0) | (dist < 4.0 * half)
            far = ~near
            total = np.sum(half[far, None] * wq[None, :] * kernel(E - nodes[far]) * nu_nodes[far])
            if near.any():
                uan, ubn = ua[near], ub[near]
                K1a, K1b = kernel.first(uan), kernel.first(ubn)
                Ja = uan * K1a - kernel.second(uan)
                Jb = ubn * K1b - kernel.second(ubn)
                total += np.sum(na[near] * (K1a - K1b) + slope[near] * (uan * (K1a - K1b) - (Ja - Jb)))
            out[i] += total
    for key in ("pos", "neg"):
        if key in head:
            lo, integral, hi = head[key]
            out += kernel(E_all - 0.5 * (lo + hi)) * integral
    return out


@dataclass
class ConvolutionReport:
    max_residual: float
    l1_residual: float
    max_omega: float
    relative_max: float
    split_max_residual: float
    shift_max_deviation: float
    grid_spacing: float
    convolution: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "convolution"}
        return _jsonable(d)


def _check_common_grid(mu: EnergyDistribution, om: EnergyDistribution) -> float:
    hm, ho = mu.spacing, om.spacing
    if hm is None or ho is None:
        raise ConfigurationError("convolution_check needs uniform grids")
    if abs(hm - ho) > 1e-9 * ho:
        raise ConfigurationError(f"grid mismatch: spacing {hm} vs {ho}")
    off = (om.grid[0] - mu.grid[0]) / ho
    if abs(off - round(off)) > 1e-6:
        raise ConfigurationError("grid mismatch: offsets are not a multiple of the spacing")
    return ho


def convolution_check(mu: EnergyDistribution, om: EnergyDistribution, sign: float | None = None) -> ConvolutionReport:
    """Residuals of omega = +-phi * mu and of the split form with phi~_+ and phi~_-."""
    h = _check_common_grid(mu, om)
    if sign is None:
        sign = 1.0 if om.grid[0] > 0 else -1.0
    target = om.columns.get("direct", om.values)
    conv = sign * convolve_nu(DPHI, mu, om.grid)
    res = target - conv
    split = sign * (convolve_nu(DPHI_TILDE_PLUS, mu.shifted(1.0), om.grid)
                    + convolve_nu(DPHI_TILDE_MINUS, mu.shifted(-1.0), om.grid))
    plus_direct = convolve_nu(DPHI_PLUS, mu, om.grid)
    plus_shift = convolve_nu(DPHI_TILDE_PLUS, mu.shifted(1.0), om.grid)
    m = float(np.abs(target).max()) if target.size else 0.0
    return ConvolutionReport(
        max_residual=float(np.abs(res).max()) if res.size else 0.0,
        l1_residual=float(np.sum(np.abs(res)) * h),
        max_omega=m,
        relative_max=float(np.abs(res).max() / m) if m > 0 else 0.0,
        split_max_residual=float(np.abs(target - split).max()) if res.size else 0.0,
        shift_max_deviation=float(np.abs(plus_direct - plus_shift).max()) if res.size else 0.0,
        grid_spacing=h,
        convolution=conv,
    )


def mu_pairing(v1: ScalarPotential, v2: ScalarPotential, psi) -> float:
    """<mu, psi> = int (psi(v2(x)) - psi(v1(x))) dx by radial quadrature."""
    fn = lambda r: psi(v2.radial_values(r)) - psi(v1.radial_values(r))
    return _radial_integral(fn, [], [v1, v2])


def order_one_ratios(v1, v2, centers, widths) -> np.ndarray:
    """|<mu, psi>| / sup|psi'| for bumps psi(t) = b((t - c)/s); bounded iff order <= 1 (on this family)."""
    out = np.zeros((len(centers), len(widths)))
    for i, c in enumerate(centers):
        for k, s in enumerate(widths):
            def psi(t, c=c, s=s):
                u = (np.asarray(t) - c) / s
                inside = np.abs(u) < 1
                val = np.zeros_like(u, dtype=float)
                val[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
                return val
            uu = np.linspace(-0.999999, 0.999999, 20001)
            bump = np.exp(1.0 - 1.0 / (1.0 - uu**2))
            dsup = np.abs(np.gradient(bump, uu)).max() / s
            out[i, k] = abs(mu_pairing(v1, v2, psi)) / dsup
    return out
