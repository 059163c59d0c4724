"""Complex-distorted radial Dirac operators and their resonances.

A radial potential reduces the Dirac operator to 2x2 systems, one per
kappa in Z \\ {0}, each with degeneracy 2|kappa|:

    E G = (V + 1) G + hbar (-d/dr + kappa/r) F
    E F = hbar (d/dr + kappa/r) G + (V - 1) F

Discretisation: staggered grid, G at r_i = i h and F at (i - 1/2) h, fourth
order differences [1, -27, 27, -1]/(24h) and midpoint averages
[-1, 9, 9, -1]/16. Ghost values across r = 0 follow the parity of G near the
origin, and a Dirichlet wall sits at r_max. With B the F-row block the
matrix is [[V_G + 1, B^T], [B, V_F - 1]], complex symmetric for every theta.

Distortion r -> z(r) = r + theta g(r). The default is g(r) = r (global
dilation). Potentials with no complex evaluation get exterior scaling,
g' = smoothstep((r - r0)/w), with r0 beyond the numerical support of v.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import optimize

from .errors import ConfigurationError, DomainError, NumericalFailure, RefinementRequired
from .potentials import ScalarPotential, smoothstep5

POINTS_PER_WAVELENGTH = 20
REFERENCE_MOMENTUM = math.sqrt(3.0)  # |p| at E = 2
ABSORPTION_DEPTH = 25.0  # outgoing waves damped by e^{-25} before the wall
ABSORPTION_ENERGY = 1.3
SUPPORT_RTOL = 1e-15
STABILITY_GAP = 1e-4
CLUSTER_TOL = 1e-6
CURVE_MARGIN = 1e-3
# non-analytic potentials with sup|v| below this ride along a global dilation on the real axis
PERTURBATIVE_SUP = 1e-4
DENSE_LIMIT = 200  # windowed solves on larger matrices use shift-invert
ARPACK_SEED = 0

_D4 = np.array([1.0, -27.0, 27.0, -1.0]) / 24.0
_M4 = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0


# --------------------------------------------------------------------------
# distortion


def theta_bound(epsilon: float) -> float:
    return epsilon / math.sqrt(1.0 + epsilon * epsilon)


def check_theta(theta: complex, epsilon: float) -> complex:
    theta = complex(theta)
    if theta.imag < 0 or abs(theta) > theta_bound(epsilon) + 1e-15:
        raise DomainError(f"theta={theta} outside D_eps^+ (eps={epsilon}, bound {theta_bound(epsilon):.4g})")
    if theta == -1:
        raise DomainError("1 + theta must be nonzero")
    return theta


@dataclass(frozen=True)
class DistortionMap:
    theta: complex
    kind: str = "dilation"  # "dilation" (g = r), "dilation-real" (g = r, v sampled on R) or "exterior"
    r0: float = 0.0
    width: float = 1.0

    def z(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind != "exterior":
            return (1.0 + self.theta) * r
        u = np.clip((r - self.r0) / self.width, 0.0, 1.0)
        ramp = self.width * u**4 * (u * (u - 3.0) + 2.5)  # int_0^u smoothstep5 = u^6 - 3u^5 + 5u^4/2
        g = np.where(r > self.r0 + self.width, 0.5 * self.width + (r - self.r0 - self.width), ramp)
        return r + self.theta * g

    def dz(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind != "exterior":
            return np.full(r.shape, 1.0 + self.theta)
        return 1.0 + self.theta * smoothstep5((r - self.r0) / self.width)

    def to_dict(self) -> dict:
        return {"theta": [self.theta.real, self.theta.imag], "kind": self.kind, "r0": self.r0, "width": self.width}


def support_radius(v: ScalarPotential, rtol: float = SUPPORT_RTOL) -> float:
    """Radius beyond which |v| <= rtol * max|v| on a sampled profile (0 for v = 0)."""
    if v.is_zero or (v.sup_v == 0 and v.inf_v == 0):
        return 0.0
    hi = v.radius_bound(rtol * max(abs(v.sup_v), abs(v.inf_v)))
    r = np.linspace(0.0, hi, 2001)
    vals = np.abs(v.radial_values(r))
    big = np.nonzero(vals > rtol * vals.max())[0]
    return float(r[min(big[-1] + 1, r.size - 1)]) if big.size else 0.0


def distortion_for(v: ScalarPotential, theta: complex, width: float = 1.0) -> DistortionMap:
    """Global dilation when v continues analytically, exterior scaling otherwise.

    A small non-analytic v (sup|v| <= PERTURBATIVE_SUP) is sampled on the real
    axis under a global dilation of the kinetic part. The dilated free
    resolvent is bounded by C/dist(z, Gamma_theta), so such a v can only put
    eigenvalues within O(sup|v|) of Gamma_theta, where the curve margin
    discards them. Exterior scaling would instead leave an unscaled cavity
    [0, r0] whose quasi-modes (Im z ~ hbar log|reflection| / r0) pollute the
    window at small hbar.
    """
    theta = check_theta(theta, v.epsilon)
    if v.complex_ok or v.is_zero or theta == 0:
        return DistortionMap(theta)
    if max(abs(v.sup_v), abs(v.inf_v)) <= PERTURBATIVE_SUP:
        return DistortionMap(theta, "dilation-real")
    return DistortionMap(theta, "exterior", support_radius(v), width)


# --------------------------------------------------------------------------
# essential spectrum


def essential_curve(theta: complex, lambda_grid) -> tuple[np.ndarray, np.ndarray]:
    """Gamma_theta: z = +-(lambda / (1 + theta)^2 + 1)^(1/2), both branches."""
    theta = complex(theta)
    if theta == -1:
        raise DomainError("1 + theta must be nonzero")
    lam = np.asarray(lambda_grid, dtype=float)
    z = np.sqrt(lam / (1.0 + theta) ** 2 + 1.0 + 0j)
    return z, -z


def curve_distance(z: complex, theta: complex) -> float:
    """Distance from z to Gamma_theta (branch chosen by the sign of Re z)."""
    theta = complex(theta)
    sgn = 1.0 if z.real >= 0 else -1.0
    f = lambda lam: abs(z - sgn * cmath.sqrt(lam / (1.0 + theta) ** 2 + 1.0))
    guess = max(((z * z - 1.0) * (1.0 + theta) ** 2).real, 0.0)
    hi = max(4.0 * guess, 4.0 * abs(z) ** 2 + 4.0)
    grid = np.concatenate([[0.0], np.linspace(0.0, hi, 401)[1:], [guess]])
    k = int(np.argmin([f(x) for x in grid]))
    x0 = grid[k]
    step = hi / 400
    res = optimize.minimize_scalar(f, bounds=(max(0.0, x0 - step), x0 + step), method="bounded",
                                   options={"xatol": 1e-12})
    return float(min(res.fun, f(x0)))


def between_real_axis_and_curve(z: complex, theta: complex) -> bool:
    """z lies in the sector swept between R and Gamma_theta (the region uncovered by theta)."""
    theta = complex(theta)
    if abs(z.real) <= 1.0:
        return False
    w = z if z.real > 0 else -z
    arg = cmath.phase((w * w - 1.0) * (1.0 + theta) ** 2)
    top = 2.0 * cmath.phase(1.0 + theta)
    return 0.0 < arg < top and w.imag < 0


# --------------------------------------------------------------------------
# grids and assembly


@dataclass(frozen=True)
class GridSpec:
    h: float
    r_max: float

    @property
    def n(self) -> int:
        return int(round(self.r_max / self.h))

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.h / factor, self.r_max)

    def extended(self, factor: float = 1.25) -> "GridSpec":
        return GridSpec(self.h, self.h * round(self.r_max * factor / self.h))


def max_spacing(hbar: float) -> float:
    return 2.0 * math.pi * hbar / (POINTS_PER_WAVELENGTH * REFERENCE_MOMENTUM)


def default_grid(v: ScalarPotential, hbar: float, theta: complex = 0j, density: float = 1.0) -> GridSpec:
    """h from the resolution rule; r_max = max(12 (1 + hbar)/min(1, delta), absorption length).

    The absorption length is ABSORPTION_DEPTH * hbar / (Im theta * p), p the
    momentum at ABSORPTION_ENERGY: outgoing waves have decayed by e^{-25}
    before they reach the wall. Exterior scaling adds the unscaled core.
    """
    h = max_spacing(hbar) / density
    base = 12.0 * (1.0 + hbar) / min(1.0, v.delta)
    theta = complex(theta)
    extra = 0.0
    if theta.imag > 0:
        p = math.sqrt(ABSORPTION_ENERGY**2 - 1.0)
        extra = ABSORPTION_DEPTH * hbar / (theta.imag * p)
        dmap = distortion_for(v, theta)
        if dmap.kind == "exterior":
            # box states of an unscaled core of length r0 + w rotate only by
            # arg(r0 + w + (1 + theta) L); a scaled length L >= 3 (r0 + w) keeps them low
            core = dmap.r0 + dmap.width
            extra = core + max(extra, 3.0 * core)
    r_max = max(base, extra)
    return GridSpec(h, h * math.ceil(r_max / h))


def g_parity(kappa: int) -> int:
    """G(-r) = s G(r) for the regular solution: G ~ r^(l+1), l = -kappa - 1 (kappa < 0) or kappa."""
    return (-1) ** abs(kappa) if kappa < 0 else (-1) ** (kappa + 1)


def _stencils(n: int, kappa: int):
    """Sparse D (derivative) and M (average) mapping G samples to F points."""
    s = g_parity(kappa)
    rows, cols, dv, mv = [], [], [], []
    for off, cd, cm in zip((-2, -1, 0, 1), _D4, _M4):
        i = np.arange(1, n + 1)
        j = i + off
        keep = (j != 0) & (j <= n)
        i, j = i[keep], j[keep]
        sign = np.where(j < 0, s, 1.0)
        j = np.abs(j)
        rows.append(i - 1)
        cols.append(j - 1)
        dv.append(sign * cd)
        mv.append(sign * cm)
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    D = sp.coo_matrix((np.concatenate(dv), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((np.concatenate(mv), (rows, cols)), shape=(n, n)).tocsr()
    return D, M


@dataclass
class DistortedChannelMatrix:
    kappa: int
    hbar: float
    theta: complex
    grid: GridSpec
    distortion: DistortionMap
    sparse: sp.csr_matrix = field(repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return self.sparse.toarray()

    @property
    def size(self) -> int:
        return self.sparse.shape[0]

    def symmetry_residual(self) -> float:
        """max |H - H^T| / max |H| (complex symmetry); at theta = 0 with real v also the Hermitian residual."""
        A = self.sparse
        d = abs(A - A.T).max()
        if self.theta == 0:
            d = max(d, abs(A - A.conj().T).max())
        return float(d / abs(A).max())

    def interleaved_banded(self) -> np.ndarray:
        """Lower banded storage (bandwidth 5) of the real symmetric theta = 0 matrix in (G1, F1, G2, ...) order."""
        if self.theta != 0:
            raise ConfigurationError("banded storage is for the self-adjoint theta = 0 matrix")
        n = self.grid.n
        perm = np.empty(2 * n, dtype=int)
        perm[0::2] = np.arange(n)
        perm[1::2] = n + np.arange(n)
        A = self.sparse[perm][:, perm].tocoo()
        bw = 5
        ab = np.zeros((bw + 1, 2 * n))
        low = A.row >= A.col
        r, c, v = A.row[low], A.col[low], A.data[low].real
        if np.any(r - c > bw):
            raise NumericalFailure("unexpected bandwidth", {"max": int((r - c).max())})
        np.add.at(ab, (r - c, c), v)
        return ab


def _potential_on(v: ScalarPotential, dmap: DistortionMap, r):
    if v.is_zero:
        return np.zeros(r.shape)
    if dmap.kind == "dilation" and dmap.theta != 0:
        return v.radial_values(dmap.z(r))
    return v.radial_values(r)


def potential_samples(v: ScalarPotential, dmap: DistortionMap, grid: GridSpec):
    n, h = grid.n, grid.h
    return (_potential_on(v, dmap, h * np.arange(1, n + 1)), _potential_on(v, dmap, h * (np.arange(1, n + 1) - 0.5)))


def assemble_channel(v: ScalarPotential, kappa: int, hbar: float, theta: complex = 0j, grid: GridSpec | None = None,
                     distortion: DistortionMap | None = None, enforce_resolution: bool = True,
                     samples: tuple | None = None) -> DistortedChannelMatrix:
    """Sparse 2N x 2N matrix of the distorted channel operator.

    ``samples`` = (V at G points, V at F points) skips re-evaluating an
    expensive profile when many channels share one grid.
    """
    if not v.radial:
        raise ConfigurationError("operator eigensolves need a radial potential")
    if kappa == 0 or int(kappa) != kappa:
        raise ConfigurationError("kappa must be a nonzero integer")
    if hbar <= 0:
        raise ConfigurationError("hbar must be positive")
    kappa = int(kappa)
    dmap = distortion if distortion is not None else distortion_for(v, theta)
    check_theta(dmap.theta, v.epsilon)
    if dmap.kind == "dilation" and dmap.theta != 0 and not (v.complex_ok or v.is_zero):
        raise DomainError(f"potential kind {v.kind!r} cannot be dilated globally; use exterior scaling")
    if dmap.kind == "dilation-real" and max(abs(v.sup_v), abs(v.inf_v)) > PERTURBATIVE_SUP:
        raise DomainError("real-axis sampling under dilation needs sup|v| <= PERTURBATIVE_SUP")
    grid = grid if grid is not None else default_grid(v, hbar, dmap.theta)
    if enforce_resolution and grid.h > max_spacing(hbar) * (1 + 1e-12):
        raise RefinementRequired("grid does not resolve the hbar-wavelength",
                                 {"h": grid.h, "h_max": max_spacing(hbar), "hbar": hbar})
    n = grid.n
    h = grid.h
    rG = h * np.arange(1, n + 1)
    rF = h * (np.arange(1, n + 1) - 0.5)
    D, M = _stencils(n, kappa)
    D = D / h
    zF, zG = dmap.z(rF), dmap.z(rG)
    if dmap.kind != "exterior":
        B = hbar * (D / (1.0 + dmap.theta) + kappa * sp.diags(1.0 / zF) @ M)
    else:
        sF = sp.diags(dmap.dz(rF) ** -0.5)
        sG = sp.diags(dmap.dz(rG) ** -0.5)
        B = hbar * (sF @ D @ sG + kappa * sp.diags(1.0 / zF) @ M)
    VG, VF = samples if samples is not None else potential_samples(v, dmap, grid)
    H = sp.bmat([[sp.diags(VG + 1.0), B.T], [B, sp.diags(VF - 1.0)]], format="csr")
    if dmap.theta == 0 and not np.iscomplexobj(VG):
        H = H.real.tocsr()
    return DistortedChannelMatrix(kappa, float(hbar), complex(dmap.theta), grid, dmap, H)


# --------------------------------------------------------------------------
# eigenvalues in a window


@dataclass(frozen=True)
class Window:
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    def __post_init__(self):
        if not (self.re_lo < self.re_hi and self.im_lo < self.im_hi):
            raise ConfigurationError("window bounds must be increasing")

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        return (z.real >= self.re_lo) & (z.real <= self.re_hi) & (z.imag >= self.im_lo) & (z.imag < self.im_hi)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_lo + self.re_hi), 0.5 * (self.im_lo + self.im_hi))

    def corners(self):
        return [complex(a, b) for a in (self.re_lo, self.re_hi) for b in (self.im_lo, self.im_hi)]

    def boundary(self, n: int = 50):
        t = np.linspace(0.0, 1.0, n)
        a, b, c, d = self.re_lo, self.re_hi, self.im_lo, self.im_hi
        return np.concatenate([a + (b - a) * t + 1j * c, b + 1j * (c + (d - c) * t),
                               b - (b - a) * t + 1j * d, a + 1j * (d - (d - c) * t)])

    def to_dict(self) -> dict:
        return asdict(self)


def check_window(window: Window, thetas, margin: float = 0.0) -> None:
    """Assumption on Omega: inside |Re z| > 1 and clear of Gamma_theta for every theta given."""
    if not (window.re_lo > 1.0 or window.re_hi < -1.0):
        raise DomainError("window must lie in |Re z| > 1")
    far = max(abs(c) for c in window.corners())
    for th in thetas:
        th = complex(th)
        if th == 0:
            if window.im_lo <= 0 <= window.im_hi:
                raise DomainError("window meets the real axis, which is Gamma_0")
            continue
        lam = np.linspace(0.0, 4.0 * (far * far + 1.0) * abs(1.0 + th) ** 2, 20001)
        pts = np.concatenate(essential_curve(th, lam))
        grown = Window(window.re_lo - margin, window.re_hi + margin, window.im_lo - margin, window.im_hi + margin)
        if np.any(grown.contains(pts)):
            raise DomainError(f"window meets Gamma_theta for theta={th}")


def _dense_eigs(H: sp.spmatrix) -> np.ndarray:
    return sla.eigvals(H.toarray(), check_finite=False, overwrite_a=True)


def _sparse_window_eigs(H: sp.spmatrix, window: Window, k0: int = 60, k_max: int = 960) -> np.ndarray:
    """Shift-invert Arnoldi about the window centre, enlarging k until the returned
    eigenvalues reach beyond the window's farthest corner."""
    sigma = window.center
    need = max(abs(c - sigma) for c in window.corners())
    n = H.shape[0]
    k = min(k0, n - 2)
    A = H.tocsc().astype(complex)
    # ARPACK's own start vector is drawn afresh per call; a fixed one keeps runs bit-identical
    rng = np.random.default_rng(ARPACK_SEED)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    while True:
        vals = spla.eigs(A, k=k, sigma=sigma, which="LM", return_eigenvectors=False, tol=1e-12, v0=v0)
        if np.abs(vals - sigma).max() > need * 1.05:
            return vals
        if k >= min(k_max, n - 2):
            raise NumericalFailure("shift-invert did not cover the window", {"k": k, "radius": need})
        k = min(2 * k, n - 2)


def channel_eigenvalues(mat: DistortedChannelMatrix, window: Window | None = None, solver: str = "auto") -> np.ndarray:
    """Eigenvalues of one channel (all, or those in ``window``)."""
    use_dense = solver == "dense" or (solver == "auto" and (window is None or mat.size <= DENSE_LIMIT))
    if use_dense:
        vals = _dense_eigs(mat.sparse)
    else:
        try:
            vals = _sparse_window_eigs(mat.sparse, window)
        except (NumericalFailure, spla.ArpackNoConvergence, RuntimeError):
            if solver == "sparse":
                raise
            vals = _dense_eigs(mat.sparse)
    if window is not None:
        vals = vals[window.contains(vals)]
    return np.sort_complex(vals)


# --------------------------------------------------------------------------
# resonances


@dataclass
class ResonanceEntry:
    z: complex
    multiplicity: int
    kappa: int
    theta_pair: tuple
    stability_gap: float
    grid_shift: float | None = None
    rmax_shift: float | None = None

    def to_dict(self) -> dict:
        return {"z_re": self.z.real, "z_im": self.z.imag, "mult": self.multiplicity, "kappa": self.kappa,
                "theta_pair": [[t.real, t.imag] for t in self.theta_pair], "stability_gap": self.stability_gap,
                "grid_shift": self.grid_shift, "rmax_shift": self.rmax_shift}


@dataclass
class ResonanceSet:
    entries: list
    window: Window
    domain_certificate: dict
    failures: list = field(default_factory=list)
    unstable: list = field(default_factory=list)  # (kappa, z) in the window but not matched across theta

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    @property
    def count(self) -> int:
        return int(sum(e.multiplicity for e in self.entries))

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries], "window": self.window.to_dict(),
                "domain_certificate": self.domain_certificate, "failures": self.failures,
                "partial": self.partial, "count": self.count,
                "unstable": [{"kappa": k, "z_re": z.real, "z_im": z.imag} for k, z in self.unstable]}


def _clusters(vals: np.ndarray, tol: float):
    vals = np.sort_complex(vals)
    out, used = [], np.zeros(vals.size, dtype=bool)
    for i in range(vals.size):
        if used[i]:
            continue
        members = np.nonzero((~used) & (np.abs(vals - vals[i]) <= tol))[0]
        used[members] = True
        out.append((complex(vals[members].mean()), int(members.size)))
    return out


def _admissible(vals, theta, margin):
    keep = [z for z in vals if between_real_axis_and_curve(complex(z), theta) and curve_distance(complex(z), theta) > margin]
    return np.array(keep, dtype=complex)


def _match(z1, z2, gap):
    """Pairs (cluster of z1, nearest z2) within gap."""
    out, unstable = [], []
    for z, m in _clusters(z1, CLUSTER_TOL):
        if z2.size == 0:
            unstable.append(z)
            continue
        d = np.abs(z2 - z)
        j = int(np.argmin(d))
        (out if d[j] <= gap else unstable).append((z, m, float(d[j])) if d[j] <= gap else z)
    return out, unstable


def _kappas(kappa_max: int):
    return [k for k in range(-kappa_max, kappa_max + 1) if k != 0]


def resonances(v: ScalarPotential, hbar: float, theta1: complex, theta2: complex, window: Window, kappa_max: int,
               grid: GridSpec | None = None, stability_gap: float = STABILITY_GAP, margin: float = CURVE_MARGIN,
               solver: str = "auto", threads: int = 1, certify: bool = False) -> ResonanceSet:
    """theta-stable eigenvalues in ``window`` over channels 0 < |kappa| <= kappa_max.

    Each (kappa, theta) eigensolve is an independent task; failures are
    recorded per channel and flag the set as partial. With ``certify`` every
    entry is recomputed on the grid with h/2 and with r_max * 1.25, and the
    shifts are stored on the entry.
    """
    theta1, theta2 = check_theta(theta1, v.epsilon), check_theta(theta2, v.epsilon)
    if theta1 == theta2:
        raise ConfigurationError("theta1 and theta2 must differ")
    if kappa_max < 1:
        raise ConfigurationError("kappa_max must be >= 1")
    check_window(window, (theta1, theta2))
    grids = {th: grid if grid is not None else default_grid(v, hbar, th) for th in (theta1, theta2)}
    # the same grid for both thetas keeps the comparison fair: take the larger box
    g = max(grids.values(), key=lambda s: s.r_max)
    tasks = [(k, th) for k in _kappas(kappa_max) for th in (theta1, theta2)]
    maps = {th: distortion_for(v, th) for th in (theta1, theta2)}
    samples = {th: potential_samples(v, maps[th], g) for th in (theta1, theta2)}

    def run(task):
        k, th = task
        try:
            mat = assemble_channel(v, k, hbar, th, g, maps[th], samples=samples[th])
            return task, channel_eigenvalues(mat, window, solver), None
        except (NumericalFailure, np.linalg.LinAlgError, spla.ArpackNoConvergence, RuntimeError) as exc:
            return task, None, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    spectra = {t: vals for t, vals, _ in results}
    failures = [{"kappa": t[0], "theta": [t[1].real, t[1].imag], "error": err} for t, _, err in results if err]
    entries, unstable = [], []
    for k in _kappas(kappa_max):
        a, b = spectra.get((k, theta1)), spectra.get((k, theta2))
        if a is None or b is None:
            continue
        a = _admissible(a, theta1, margin)
        b = _admissible(b, theta2, margin)
        matched, lost = _match(a, b, stability_gap)
        for z, m, d in matched:
            entries.append(ResonanceEntry(z, 2 * abs(k) * m, k, (theta1, theta2), d))
        unstable.extend((k, z) for z in lost)
    entries.sort(key=lambda e: (e.kappa, e.z.real, e.z.imag))
    if certify:
        for e in entries:
            e.grid_shift = _nearest_shift(v, e, hbar, theta1, g.refined(2), window, solver)
            e.rmax_shift = _nearest_shift(v, e, hbar, theta1, g.extended(1.25), window, solver)
    cert = {"theta_pair": [[t.real, t.imag] for t in (theta1, theta2)], "grid": {"h": g.h, "r_max": g.r_max},
            "curve_margin": margin, "stability_gap": stability_gap, "kappa_max": kappa_max,
            "distortion": distortion_for(v, theta1).to_dict()}
    return ResonanceSet(entries, window, cert, failures, unstable)


def _nearest_shift(v, entry, hbar, theta, grid, window, solver) -> float:
    mat = assemble_channel(v, entry.kappa, hbar, theta, grid)
    vals = channel_eigenvalues(mat, window, solver)
    return float(np.abs(vals - entry.z).min()) if vals.size else math.inf


# --------------------------------------------------------------------------
# counting


@dataclass
class CountTable:
    hbar: list
    counts: list
    kappa_max: list
    slope: float
    partial: list
    sets: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"hbar": self.hbar, "counts": self.counts, "kappa_max": self.kappa_max, "slope": self.slope,
                "partial": self.partial}


def kappa_max_rule(hbar: float, c: float = 3.0) -> int:
    return int(math.ceil(c / hbar - 1e-9))


def count_scaling(potentials, hbar_list, window: Window, theta_pair, c: float = 3.0, solver: str = "auto",
                  threads: int = 1) -> CountTable:
    """N(hbar) = sum over the potentials of resonance counts (with multiplicity) in ``window``."""
    hb = [float(h) for h in hbar_list]
    if any(b >= a for a, b in zip(hb, hb[1:])):
        raise ConfigurationError("hbar_list must be decreasing")
    if isinstance(potentials, ScalarPotential):
        potentials = [potentials]
    counts, kms, partial, sets = [], [], [], []
    for h in hb:
        km = kappa_max_rule(h, c)
        n, part = 0, False
        for v in potentials:
            rs = resonances(v, h, theta_pair[0], theta_pair[1], window, km, solver=solver, threads=threads)
            n += rs.count
            part |= rs.partial
            sets.append(rs)
        counts.append(n)
        kms.append(km)
        partial.append(part)
    pos = [(h, n) for h, n in zip(hb, counts) if n > 0]
    slope = float(np.polyfit(np.log([1 / h for h, _ in pos]), np.log([n for _, n in pos]), 1)[0]) if len(pos) >= 2 else math.nan
    return CountTable(hb, counts, kms, slope, partial, sets)
