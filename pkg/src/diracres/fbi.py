"""FBI transform of 1-D distributions and an exponential-decay classifier.

    T_lam u(x, xi) = 2^(-1/2) (lam/pi)^(3/4) int e^{i lam (x-y) xi - lam (x-y)^2 / 2} chi(y) u(y) dy

Sampled inputs are integrated by product integration: chi*u is replaced by its
piecewise-linear interpolant and each cell is integrated exactly against the
Gaussian kernel (Faddeeva function). This is the trapezoidal rule's
interpolant, but the kernel's oscillation is handled exactly, so the
rule stays accurate when lam*h is not small. Samples outside the grid count as zero.

Double-precision sums of O(1) terms cannot resolve |T| below roughly
eps * sum|terms|. Each transform therefore reports a noise floor, and the
classifier censors values under ten times that floor. Callables can be passed
with ``dps`` for an mpmath evaluation when a value below the floor is needed
(closed-form oracles).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import wofz

from .errors import ConfigurationError, RefinementRequired
from .phasespace import EnergyDistribution
from .potentials import smoothstep5

RESOLUTION_GUARD = 0.1  # lam * h^2 <= this
NOISE_FACTOR = 10.0
UNDERFLOW = 1e-300
RATE_FLOOR = 1e-2
R2_MIN = 0.9
_EPS = np.finfo(float).eps


def prefactor(lam: float) -> float:
    return 2.0 ** -0.5 * (lam / math.pi) ** 0.75


# --------------------------------------------------------------------------
# inputs


@dataclass(frozen=True)
class Cutoff:
    """chi = 1 on |y - center| <= plateau, 0 beyond ``support``, quintic smoothstep between."""

    center: float
    plateau: float = 0.2
    support: float = 0.3

    def __post_init__(self):
        if not 0.0 < self.plateau < self.support:
            raise ConfigurationError("cutoff needs 0 < plateau < support")

    def __call__(self, y):
        d = np.abs(np.asarray(y, dtype=float) - self.center)
        return 1.0 - smoothstep5((d - self.plateau) / (self.support - self.plateau))

    def mp(self, y):
        import mpmath as mp

        d = abs(y - self.center)
        if d <= self.plateau:
            return mp.mpf(1)
        if d >= self.support:
            return mp.mpf(0)
        u = (d - self.plateau) / (self.support - self.plateau)
        return 1 - u**3 * (u * (6 * u - 15) + 10)

    @property
    def interval(self) -> tuple[float, float]:
        return self.center - self.support, self.center + self.support


@dataclass
class Sampled:
    """u on a strictly increasing grid; u = 0 off the grid.

    ``exact_outside`` states that u really vanishes off the grid (a Heaviside
    cut at the grid start, say). Without it, scans demand a margin.
    """

    grid: np.ndarray
    values: np.ndarray
    exact_outside: bool = False

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape or self.grid.size < 2:
            raise ConfigurationError("sampled input needs matching 1-D grid and values (>= 2 points)")
        if np.any(np.diff(self.grid) <= 0):
            raise ConfigurationError("grid must be strictly increasing")

    @classmethod
    def coerce(cls, u) -> "Sampled":
        if isinstance(u, Sampled):
            return u
        if isinstance(u, EnergyDistribution):
            return cls(u.grid, u.values)
        if isinstance(u, tuple) and len(u) == 2:
            return cls(*u)
        raise ConfigurationError(f"cannot use {type(u).__name__} as a sampled distribution")

    def shifted(self, s: float) -> "Sampled":
        return Sampled(self.grid + s, self.values.copy(), self.exact_outside)

    def scaled(self, c) -> "Sampled":
        return Sampled(self.grid, c * self.values, self.exact_outside)


# --------------------------------------------------------------------------
# transform


@dataclass
class FBIValue:
    value: complex
    noise_floor: float

    @property
    def magnitude(self) -> float:
        return abs(self.value)

    @property
    def resolved(self) -> bool:
        return abs(self.value) > NOISE_FACTOR * self.noise_floor


def _primitive(t, xi, lam):
    """Antiderivatives of K(t) = exp(-lam t^2/2 - i lam xi t) and of t K(t), up to constants."""
    s = math.sqrt(0.5 * lam)
    K = np.exp(-0.5 * lam * t * t - 1j * lam * xi * t)
    z = s * (t + 1j * xi)
    pos = t >= 0
    # erf(z) = 1 - e^{-z^2} w(iz) for Re z >= 0, -1 + e^{-z^2} w(-iz) otherwise; e^{-s^2 xi^2 - z^2} = K
    c = math.exp(-s * s * xi * xi) if s * s * xi * xi < 745 else 0.0
    w = np.where(pos, wofz(np.where(pos, 1j * z, 0)), wofz(np.where(pos, 0, -1j * z)))
    P = math.sqrt(math.pi) / (2.0 * s) * np.where(pos, c - K * w, -c + K * w)
    Q = -K / lam - 1j * xi * P
    return P, Q, K


def _cells(u: Sampled, x: float, lam: float, chi):
    y = u.grid
    keep_lo, keep_hi = 0, y.size
    span = math.sqrt(2.0 * 745.0 / lam)  # the kernel underflows beyond this
    lo, hi = x - span, x + span
    if chi is not None:
        lo, hi = max(lo, chi.interval[0]), min(hi, chi.interval[1])
    keep_lo = max(int(np.searchsorted(y, lo)) - 1, 0)
    keep_hi = min(int(np.searchsorted(y, hi)) + 1, y.size)
    return keep_lo, keep_hi


def fbi_transform(u, x: float, xi: float, lam: float, chi: Cutoff | None = None, dps: int | None = None,
                  breakpoints=()) -> FBIValue:
    """T_lam u(x, xi) for a sampled distribution, or for a callable when ``dps`` is given.

    ``chi=None`` means chi = 1. Raises RefinementRequired if lam * h^2 exceeds
    the resolution guard on the cells that matter.
    """
    if lam <= 0:
        raise ConfigurationError("lambda must be positive")
    if callable(u) and not isinstance(u, (Sampled, EnergyDistribution)):
        if dps is None:
            raise ConfigurationError("callable input needs dps (high-precision path)")
        return _fbi_mp(u, x, xi, lam, chi, dps, breakpoints)
    u = Sampled.coerce(u)
    a, b = _cells(u, x, lam, chi)
    y = u.grid[a:b]
    if y.size < 2:
        return FBIValue(0j, 0.0)
    h = np.diff(y)
    if lam * float(h.max()) ** 2 > RESOLUTION_GUARD:
        raise RefinementRequired("grid too coarse for this lambda",
                                 {"lambda": lam, "h_max": float(h.max()), "guard": RESOLUTION_GUARD})
    f = u.values[a:b] * (chi(y) if chi is not None else 1.0)
    t = y - x
    P, Q, K = _primitive(t, xi, lam)
    I0 = P[1:] - P[:-1]
    I1 = -(K[1:] - K[:-1]) / lam - (1j * xi + t[:-1]) * I0
    m = (f[1:] - f[:-1]) / h
    terms = f[:-1] * I0 + m * I1
    total = terms.sum()
    c = prefactor(lam)
    floor = 64.0 * _EPS * float(np.abs(f[:-1] * I0).sum() + np.abs(m * I1).sum()) * c
    return FBIValue(complex(c * total), floor)


def _fbi_mp(u, x, xi, lam, chi, dps, breakpoints):
    import mpmath as mp

    with mp.workdps(dps):
        lam_m, x_m, xi_m = mp.mpf(lam), mp.mpf(x), mp.mpf(xi)
        width = 1 / mp.sqrt(lam_m)
        reach = mp.sqrt(2 * (dps * mp.log(10) + 10) / lam_m)
        lo, hi = x_m - reach, x_m + reach
        if chi is not None:
            lo, hi = max(lo, mp.mpf(chi.interval[0])), min(hi, mp.mpf(chi.interval[1]))
            extra = [chi.center - chi.support, chi.center - chi.plateau, chi.center + chi.plateau,
                     chi.center + chi.support]
        else:
            extra = []
        pts = sorted({mp.mpf(p) for p in list(breakpoints) + extra if lo < p < hi} | {lo, hi})
        nodes = []
        for p, q in zip(pts[:-1], pts[1:]):
            n = max(1, int(mp.ceil((q - p) / width)))
            nodes.extend(p + (q - p) * k / n for k in range(n))
        nodes.append(pts[-1])

        def integrand(y):
            d = x_m - y
            val = mp.exp(1j * lam_m * d * xi_m - lam_m * d * d / 2) * u(y)
            return val * chi.mp(y) if chi is not None else val

        total = mp.quad(integrand, nodes)
        c = mp.mpf(2) ** mp.mpf(-0.5) * (lam_m / mp.pi) ** mp.mpf(0.75)
        return FBIValue(complex(c * total), 0.0)


# closed forms used as oracles (chi = 1, x = 0)


def gaussian_oracle(xi: float, lam: float) -> float:
    """|T_lam e^{-y^2/2}(0, xi)| = c(lam) sqrt(2 pi/(lam+1)) exp(-lam^2 xi^2 / (2(lam+1)))."""
    return prefactor(lam) * math.sqrt(2.0 * math.pi / (lam + 1.0)) * math.exp(-lam * lam * xi * xi / (2.0 * (lam + 1.0)))


def heaviside_oracle(xi: float, lam: float) -> float:
    """|T_lam H(0, xi)| = c(lam) (1/2) sqrt(2 pi / lam) |w(-xi sqrt(lam/2))|."""
    return prefactor(lam) * 0.5 * math.sqrt(2.0 * math.pi / lam) * abs(complex(wofz(-xi * math.sqrt(0.5 * lam))))


# --------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class FBIProbe:
    x0: float
    xi0: float = 1.0
    lambda_seq: tuple = tuple(np.geomspace(50.0, 500.0, 10))
    plateau: float = 0.2
    support: float = 0.3

    def __post_init__(self):
        lam = np.asarray(self.lambda_seq, dtype=float)
        if lam.size < 10:
            raise ConfigurationError("lambda_seq needs >= 10 entries")
        if np.any(np.diff(lam) <= 0) or lam[0] <= 0:
            raise ConfigurationError("lambda_seq must be positive and strictly increasing")
        if lam[-1] / lam[0] < 10.0 * (1 - 1e-12):
            raise ConfigurationError("lambda_seq must span a decade")

    @property
    def cutoff(self) -> Cutoff:
        return Cutoff(self.x0, self.plateau, self.support)


@dataclass
class WavefrontVerdict:
    classification: str  # "exponential_decay" | "subexponential"
    fitted_rate: float
    confidence: float  # R^2 of the linear fit
    power_exponent: float
    aic_linear: float
    aic_power: float
    n_used: int
    n_censored: int
    x0: float
    xi0: float
    rule: dict = field(default_factory=dict)
    lambdas: list = field(default_factory=list)
    log_abs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("fitted_rate", "power_exponent", "aic_linear", "aic_power"):
            v = d[k]
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = "-inf" if v < 0 else ("inf" if v > 0 else "nan")
        d["log_abs"] = [v if math.isfinite(v) else "-inf" for v in d["log_abs"]]
        return d


def _fit(xs, ys):
    A = np.vstack([xs, np.ones_like(xs)]).T
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    rss = float(np.sum((ys - A @ coef) ** 2))
    tss = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    n = xs.size
    aic = n * math.log(rss / n + 1e-300) + 4.0
    return float(coef[0]), r2, aic


def classify_point(u, probe: FBIProbe, rate_floor: float = RATE_FLOOR, r2_min: float = R2_MIN,
                   dps: int | None = None) -> WavefrontVerdict:
    """Fit log|T_lam| against lam (exponential) and log lam (power) and pick by AIC.

    exponential_decay iff the linear slope is <= -rate_floor, its R^2 >= r2_min and
    its AIC beats the power fit. Values under the noise floor are censored; when
    nothing is left to fit, decay faster than resolvable counts as exponential.
    """
    lams = np.asarray(probe.lambda_seq, dtype=float)
    chi = probe.cutoff
    vals = [fbi_transform(u, probe.x0, probe.xi0, float(l), chi, dps=dps) for l in lams]
    mags = np.array([v.magnitude for v in vals])
    ok = np.array([v.resolved and v.magnitude > UNDERFLOW for v in vals])
    logs = [math.log(m) if m > 0 else -math.inf for m in mags]
    rule = {"rate_floor": rate_floor, "r2_min": r2_min, "selection": "AIC", "noise_factor": NOISE_FACTOR}
    base = dict(x0=probe.x0, xi0=probe.xi0, rule=rule, lambdas=lams.tolist(), log_abs=logs,
                n_used=int(ok.sum()), n_censored=int((~ok).sum()))
    if ok.sum() < 3:
        if ok.sum() == 0 or not ok[-1]:
            return WavefrontVerdict("exponential_decay", -math.inf, 1.0, -math.inf, -math.inf, math.inf, **base)
        raise_msg = "too few resolved FBI values and no censoring at large lambda"
        return WavefrontVerdict("subexponential", math.nan, 0.0, math.nan, math.nan, math.nan,
                                **{**base, "rule": {**rule, "note": raise_msg}})
    x, y = lams[ok], np.log(mags[ok])
    slope, r2, aic_lin = _fit(x, y)
    p, _, aic_pow = _fit(np.log(x), y)
    censored_tail = bool((~ok).any() and not ok[-1])
    exp_decay = (slope <= -rate_floor and r2 >= r2_min and aic_lin < aic_pow) or (censored_tail and slope <= -rate_floor)
    return WavefrontVerdict("exponential_decay" if exp_decay else "subexponential", slope, r2, p, aic_lin, aic_pow,
                            **base)


# --------------------------------------------------------------------------
# scans


@dataclass
class ScanResult:
    points: list
    verdicts: list
    flagged: list
    clusters: list  # runs of adjacent flagged points
    centers: list  # point of each run where |T| peaks at the largest lambda

    def to_dict(self) -> dict:
        return {"points": self.points, "flagged": self.flagged, "clusters": self.clusters, "centers": self.centers,
                "verdicts": [v.to_dict() for v in self.verdicts]}

    def heatmap_rows(self):
        """(x, lambda, log|T|) rows for plotting."""
        for v in self.verdicts:
            for l, g in zip(v.lambdas, v.log_abs):
                yield v.x0, l, g


def _peak_key(v: WavefrontVerdict) -> float:
    g = v.log_abs[-1]
    return g if math.isfinite(g) else -math.inf


def singular_support_scan(u, x_grid, xi0: float = 1.0, lambda_seq=None, plateau: float = 0.2, support: float = 0.3,
                          threads: int = 1, rate_floor: float = RATE_FLOOR) -> ScanResult:
    """classify_point over x_grid; returns the subexponential points, grouped into runs.

    A singular germ at x_s gives |T_lam(x)| ~ e^{-lam (x - x_s)^2 / 2}, so each
    run is summarised by the point where |T| peaks at the largest lambda. The
    runs themselves are about (2 rate_floor)^(1/2) wide on either side.
    """
    u = Sampled.coerce(u)
    xs = [float(x) for x in np.asarray(x_grid, dtype=float)]
    if not xs:
        return ScanResult([], [], [], [], [])
    if not u.exact_outside and (u.grid[0] > xs[0] - support + 1e-12 or u.grid[-1] < xs[-1] + support - 1e-12):
        raise ConfigurationError("u must be sampled beyond the scan grid by the cutoff support")
    lam = tuple(np.geomspace(50.0, 500.0, 10)) if lambda_seq is None else tuple(lambda_seq)
    probes = [FBIProbe(x, xi0, lam, plateau, support) for x in xs]
    job = lambda p: classify_point(u, p, rate_floor)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            verdicts = list(ex.map(job, probes))
    else:
        verdicts = [job(p) for p in probes]
    flags = [v.classification == "subexponential" for v in verdicts]
    flagged = [x for x, f in zip(xs, flags) if f]
    clusters, centers, run = [], [], []
    for i, f in enumerate(flags + [False]):
        if f:
            run.append(i)
        elif run:
            clusters.append([xs[j] for j in run])
            best = max(run, key=lambda j: _peak_key(verdicts[j]))
            centers.append(xs[best])
            run = []
    return ScanResult(xs, verdicts, flagged, clusters, centers)


def hausdorff_cells(a, b, h: float) -> float:
    """Hausdorff distance between two point sets, in units of h (inf if exactly one is empty)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.size == 0 and b.size == 0:
        return 0.0
    if a.size == 0 or b.size == 0:
        return math.inf
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()) / h)


# --------------------------------------------------------------------------
# probe sequences


@dataclass
class Witness:
    found: bool
    E0: float
    rows: list  # {alpha, lambda, epsilon, beta, abs_integral}
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


WITNESS_LAMBDAS = (400.0, 800.0, 1600.0, 3200.0, 6400.0)
WITNESS_RATE_FLOOR = 1e-3


def probe_sequence_witness(omega, E0: float, lambda_seq=WITNESS_LAMBDAS, alpha_radius: float = 0.02,
                           beta_range=(0.8, 1.2), n_alpha: int = 9, n_beta: int = 9, plateau: float = 0.2,
                           support: float = 0.3, rate_floor: float = WITNESS_RATE_FLOOR) -> Witness:
    """Lower bounds |I_j| >= e^{-epsilon_j lambda_j} for the Gaussian probe integrals at E0.

    I_j = int e^{i lam beta (alpha - E) - lam (alpha - E)^2 / 2} chi(E) omega(E) dE, maximised over
    alpha within alpha_radius of E0 and beta in beta_range; epsilon_j = -log|I_j| / lambda_j.
    A witness needs every |I_j| above the noise floor, epsilon_j strictly
    decreasing, and log|I_j| not exponentially decaying (slope in lambda above
    -rate_floor, or the power law winning by AIC). Finite lambda cannot show
    epsilon_j -> 0; the last condition separates a germ at E0 from an analytic
    germ whose nearest singularity sits a distance d away (rate ~ d^2/2).
    """
    u = Sampled.coerce(omega)
    chi = Cutoff(E0, plateau, support)
    lo, hi = E0 - alpha_radius - support, E0 + alpha_radius + support
    if not u.exact_outside and (u.grid[0] > lo + 1e-12 or u.grid[-1] < hi - 1e-12):
        raise ConfigurationError(f"omega must be sampled on [{lo:g}, {hi:g}] at least")
    alphas = np.linspace(E0 - alpha_radius, E0 + alpha_radius, n_alpha)
    betas = np.linspace(beta_range[0], beta_range[1], n_beta)
    rows = []
    for lam in lambda_seq:
        best = None
        for a in alphas:
            for b in betas:
                v = fbi_transform(u, float(a), float(b), float(lam), chi)
                if v.resolved and (best is None or v.magnitude > best[0]):
                    best = (v.magnitude, float(a), float(b))
        if best is None:
            return Witness(False, E0, rows, f"no resolved value at lambda={lam:g}")
        mag, a, b = best
        mag /= prefactor(lam)
        rows.append({"alpha": a, "lambda": float(lam), "epsilon": -math.log(mag) / lam, "beta": b, "abs_integral": mag})
    eps = [r["epsilon"] for r in rows]
    if any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
        return Witness(False, E0, rows, "epsilon_j not decreasing")
    lam = np.array([r["lambda"] for r in rows])
    logs = np.log([r["abs_integral"] for r in rows])
    slope, r2, aic_lin = _fit(lam, logs)
    _, _, aic_pow = _fit(np.log(lam), logs)
    if slope <= -rate_floor and aic_lin < aic_pow:
        return Witness(False, E0, rows, f"|I_j| decays exponentially (rate {-slope:.3g})")
    return Witness(True, E0, rows)
