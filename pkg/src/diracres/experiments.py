"""Experiment pipelines behind the CLI subcommands.

Each pipeline takes a validated config and an ``Outputs`` stager, writes its
artifacts and returns a summary dict for the manifest. Invariant checks used
by ``verify`` live next to the pipeline that produced the artifacts.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import analytic_symbols as sym
from . import dirac, fbi, phasespace, traces
from .errors import ConfigurationError
from .manifest import Outputs, read_csv
from .potentials import potential_from_config

# --------------------------------------------------------------------------
# config helpers


def grid_from(spec: dict) -> np.ndarray:
    start, stop = float(spec["start"]), float(spec["stop"])
    if "num" in spec:
        n = int(spec["num"])
    else:
        n = int(round((stop - start) / float(spec["step"]))) + 1
    if n < 2 or stop <= start:
        raise ConfigurationError(f"bad grid {spec}")
    if spec.get("log"):
        return np.geomspace(start, stop, n)
    return np.linspace(start, stop, n)


def theta_of(pair) -> complex:
    return complex(float(pair[0]), float(pair[1]))


def window_of(w) -> dirac.Window:
    return dirac.Window(*[float(x) for x in w])


def load_potentials(cfg: dict, base_dir: Path):
    pots = cfg["potentials"]
    v1 = potential_from_config(pots["v1"], base_dir)
    v2 = v1 if pots["v2"] == pots["v1"] else potential_from_config(pots["v2"], base_dir)
    return v1, v2


# --------------------------------------------------------------------------
# phasespace


def run_phasespace(cfg, out: Outputs, base_dir, threads, seed) -> dict:
    v1, v2 = load_potentials(cfg, base_dir)
    p = cfg["params"]
    mu_grid = grid_from(p["mu_grid"])
    nm = phasespace.build_nu_mu(v1, v2, mu_grid, seed)
    for d in nm.all_distributions():
        out.adopt(d.to_csv(out.staging / f"{d.name}.csv", unit="rest-mass energy (hbar dimensionless)"))
    summary = {"mu_support": list(nm.mu.support), "mu_outside_support_max": nm.mu.outside_support_max()}
    if "E_grid" in p:
        E = grid_from(p["E_grid"])
        om = phasespace.omega(v1, v2, E, seed)
        out.adopt(om.to_csv(out.staging / "omega.csv", unit="rest-mass energy (hbar dimensionless)"))
        if p.get("convolution_check", True):
            rep = phasespace.convolution_check(nm.mu, om)
            out.json("convolution_check.json", rep.to_dict())
            out.csv("convolution.csv", ["E", "omega_direct", "phi_conv_mu"],
                    zip(E, om.columns["direct"], rep.convolution), comment="E in rest-mass units")
            summary["convolution_relative_max"] = rep.relative_max
    return summary


def check_phasespace(out_dir: Path, files) -> list[str]:
    problems = []
    mu = phasespace.EnergyDistribution.from_csv(out_dir / "mu.csv")
    scale = max(float(np.abs(mu.values).max()), 1.0)
    if mu.outside_support_max() > 1e-9 * scale:
        problems.append("mu.csv: mass outside the declared support")
    for j in (1, 2):
        nu = phasespace.EnergyDistribution.from_csv(out_dir / f"nu_plus_{j}.csv")
        if np.any(nu.values > 1e-12):
            problems.append(f"nu_plus_{j}.csv: positive values (level-set volumes must be >= 0)")
        nm = phasespace.EnergyDistribution.from_csv(out_dir / f"nu_minus_{j}.csv")
        if np.any(nm.values < -1e-12):
            problems.append(f"nu_minus_{j}.csv: negative values")
    return problems


# --------------------------------------------------------------------------
# symbol


def run_symbol(cfg, out: Outputs, base_dir, threads, seed) -> dict:
    p = cfg["params"]
    xi = grid_from({"log": True, **p["xi"]})
    order = float(p.get("order", sym.SYMBOL_ORDER))
    summary = {}
    rows = []
    for s in p.get("signs", ["+", "-"]):
        cert = sym.decay_and_ellipticity(s, xi, order)
        vals = sym.symbol_eval(s, xi)
        rows += [(s, x, v.real, v.imag, abs(v)) for x, v in zip(xi, vals)]
        pair = sym.pairing_oracle(s, float(p.get("xi0", 10.0)) * (1 if s == "+" else -1), float(p.get("width", 1.0)))
        bounds = sym.derivative_bounds(s, xi[:: max(1, xi.size // 12)], order=order)
        out.json(f"certificate_{'plus' if s == '+' else 'minus'}.json", {
            "certificate": cert.to_dict(), "pairing_relative_difference": pair.relative_difference,
            "derivative_bounds": [b.to_dict() for b in bounds]})
        summary[s] = {"passed": cert.passed, "slope": cert.fit_slope}
    out.csv("symbol.csv", ["sign", "xi", "re", "im", "abs"], rows, comment="xi dimensionless")
    z = np.array([0.5 + 0.5j, 3.0 - 2.0j, 10.0 + 1.0j, 25.0j])
    summary["recurrence_residual_max"] = float(sym.recurrence_residual(z).max())
    return summary


def check_symbol(out_dir: Path, files) -> list[str]:
    problems = []
    header, rows = read_csv(out_dir / "symbol.csv")
    for tag, sign in (("plus", "+"), ("minus", "-")):
        path = out_dir / f"certificate_{tag}.json"
        if not path.exists():
            continue
        cert = json.loads(path.read_text())["certificate"]
        sel = [(float(r[1]), float(r[4])) for r in rows if r[0] == sign]
        x, a = np.array(sel).T
        slope = float(np.polyfit(np.log(np.abs(x)), np.log(a), 1)[0])
        if abs(slope - cert["fit_slope"]) > 1e-9:
            problems.append(f"certificate_{tag}.json: slope does not match symbol.csv")
    return problems


# --------------------------------------------------------------------------
# fbi


def _fbi_targets(v1, v2, p, seed):
    mu = phasespace.build_nu_mu(v1, v2, grid_from(p["mu_grid"]), seed).mu
    out = {"mu": mu}
    wanted = set(p.get("targets", ["mu"]))
    if wanted & {"tau_mu", "phi_tau_mu"}:
        out["tau_mu"] = mu.shifted(1.0)
    if "phi_tau_mu" in wanted:
        E = grid_from(p["conv_grid"])
        out["phi_tau_mu"] = fbi.Sampled(E, phasespace.convolve_nu(phasespace.DPHI_TILDE_PLUS, mu.shifted(1.0), E))
    return {k: v for k, v in out.items() if k in wanted}


def run_fbi(cfg, out: Outputs, base_dir, threads, seed) -> dict:
    v1, v2 = load_potentials(cfg, base_dir)
    p = cfg["params"]
    lam = tuple(grid_from({"log": True, **p["lambda"]})) if "lambda" in p else None
    summary = {}
    for name, u in _fbi_targets(v1, v2, p, seed).items():
        shift = 1.0 if name != "mu" else 0.0
        xs = grid_from(p["x_grid"]) + shift
        res = fbi.singular_support_scan(u, xs, float(p.get("xi0", 1.0)), lam, threads=threads)
        out.json(f"scan_{name}.json", res.to_dict())
        out.csv(f"heatmap_{name}.csv", ["x", "lambda", "log_abs_T"], res.heatmap_rows(),
                comment="x in rest-mass energy units")
        summary[name] = {"centers": res.centers, "n_flagged": len(res.flagged)}
    if "witness" in p:
        w = p["witness"]
        E = grid_from(w["E_grid"])
        om = fbi.Sampled(E, phasespace.convolve_nu(phasespace.DPHI, phasespace.build_nu_mu(
            v1, v2, grid_from(p["mu_grid"]), seed).mu, E))
        wit = fbi.probe_sequence_witness(om, float(w["E0"]))
        out.json("witness.json", wit.to_dict())
        summary["witness"] = wit.found
    return summary


def check_fbi(out_dir: Path, files) -> list[str]:
    problems = []
    for f in files:
        if f.startswith("scan_"):
            d = json.loads((out_dir / f).read_text())
            pts = set(d["points"])
            if not set(d["flagged"]) <= pts or not set(d["centers"]) <= set(d["flagged"]):
                problems.append(f"{f}: flagged points or centers outside the scan")
    return problems


# --------------------------------------------------------------------------
# resonances and counting


def _kappa_max(p, hbar) -> int:
    if "kappa_max" in p:
        return int(p["kappa_max"])
    return dirac.kappa_max_rule(hbar, float(p.get("kappa_c", 3.0)))


def _resonance_rows(rs: dirac.ResonanceSet, label: str):
    for e in rs.entries:
        yield (label, e.kappa, e.z.real, e.z.imag, e.multiplicity, e.stability_gap,
               "" if e.grid_shift is None else e.grid_shift, "" if e.rmax_shift is None else e.rmax_shift)


RES_HEADER = ["potential", "kappa", "z_re", "z_im", "mult", "stability_gap", "grid_shift", "rmax_shift"]


def run_resonances(cfg, out: Outputs, base_dir, threads, seed) -> dict:
    v1, v2 = load_potentials(cfg, base_dir)
    p = cfg["params"]
    hbar = float(p["hbar"])
    th1, th2 = (theta_of(t) for t in p["theta_pair"])
    win = window_of(p["window"])
    summary, rows = {}, []
    for label in p.get("which", ["v2"]):
        v = v1 if label == "v1" else v2
        rs = dirac.resonances(v, hbar, th1, th2, win, _kappa_max(p, hbar), solver=p.get("solver", "auto"),
                              threads=threads, certify=bool(p.get("certify", False)))
        out.json(f"resonances_{label}.json", rs.to_dict())
        rows += list(_resonance_rows(rs, label))
        summary[label] = {"count": rs.count, "partial": rs.partial}
    out.csv("resonances.csv", RES_HEADER, rows, comment="z in rest-mass energy units")
    return summary


def check_resonances(out_dir: Path, files) -> list[str]:
    problems = []
    for f in files:
        if not (f.startswith("resonances_") and f.endswith(".json")):
            continue
        d = json.loads((out_dir / f).read_text())
        gap = d["domain_certificate"]["stability_gap"]
        win = dirac.Window(**d["window"])
        for e in d["entries"]:
            z = complex(e["z_re"], e["z_im"])
            if not e["stability_gap"] <= gap:
                problems.append(f"{f}: entry at {z} exceeds the stability gap")
            if e["mult"] < 1 or e["mult"] % (2 * abs(e["kappa"])):
                problems.append(f"{f}: entry at {z} has multiplicity {e['mult']}")
            if not bool(win.contains(z)):
                problems.append(f"{f}: entry at {z} lies outside the window")
        if d["count"] != sum(e["mult"] for e in d["entries"]):
            problems.append(f"{f}: count does not match entries")
    return problems


def run_lower_bound(cfg, out: Outputs, base_dir, threads, seed) -> dict:
    v1, v2 = load_potentials(cfg, base_dir)
    p = cfg["params"]
    pots = [v1 if w == "v1" else v2 for w in p.get("which", ["v1", "v2"])]
    th = [theta_of(t) for t in p["theta_pair"]]
    table = dirac.count_scaling(pots, p["hbar_list"], window_of(p["window"]), th, float(p.get("kappa_c", 3.0)),
                                solver=p.get("solver", "auto"), threads=threads)
    d = table.to_dict()
    n_h = len(table.hbar)
    ratios = [table.counts[i + 1] / table.counts[i] if table.counts[i] else None for i in range(n_h - 1)]
    d["halving_ratios"] = ratios
    out.json("count_table.json", d)
    out.csv("count_table.csv", ["hbar", "N", "kappa_max", "partial"],
            zip(table.hbar, table.counts, table.kappa_max, table.partial), comment="hbar dimensionless")
    rows = []
    for i, rs in enumerate(table.sets):
        rows += list(_resonance_rows(rs, f"hbar={table.hbar[i // len(pots)]!r}/set{i % len(pots)}"))
    out.csv("resonances.csv", RES_HEADER, rows, comment="z in rest-mass energy units")
    return {"counts": table.counts, "slope": table.slope}


def check_lower_bound(out_dir: Path, files) -> list[str]:
    d = json.loads((out_dir / "count_table.json").read_text())
    problems = []
    if any((not isinstance(n, int)) or n < 0 for n in d["counts"]):
        problems.append("count_table.json: counts must be nonnegative integers")
    pos = [(h, n) for h, n in zip(d["hbar"], d["counts"]) if n > 0]
    if len(pos) >= 2:
        slope = float(np.polyfit(np.log([1 / h for h, _ in pos]), np.log([n for _, n in pos]), 1)[0])
        if abs(slope - d["slope"]) > 1e-9:
            problems.append("count_table.json: stored slope does not match the counts")
    return problems


# --------------------------------------------------------------------------
# traces


def run_trace(cfg, out: Outputs, base_dir, threads, seed) -> dict:
    v1, v2 = load_potentials(cfg, base_dir)
    p = cfg["params"]
    tf = traces.test_function_from_config(p["test_function"])
    table = traces.bruneau_robert_residual(v1, v2, p["hbar_list"], tf, float(p.get("kappa_c", traces.TRACE_KAPPA_C)),
                                           threads=threads)
    d = table.to_dict()
    d["test_function"] = tf.describe()
    out.json("trace_table.json", d)
    out.csv("trace_table.csv", ["hbar", "operator_re", "phase_space_re", "residual_re", "converged"],
            ((h, o.real, q.real, r.real, c) for h, o, q, r, c in
             zip(table.hbar, table.operator, table.phase_space, table.residual, table.converged)),
            comment="traces are dimensionless counts")
    return {"residual_order": table.residual_order, "passed": table.passed}


def check_trace(out_dir: Path, files) -> list[str]:
    d = json.loads((out_dir / "trace_table.json").read_text())
    problems = []
    for o, q, r in zip(d["operator"], d["phase_space"], d["residual"]):
        if abs((o[0] - q[0]) - r[0]) > 1e-9 * max(1.0, abs(o[0])):
            problems.append("trace_table.json: residual != operator - phase_space")
    return problems


PIPELINES = {
    "phasespace": (run_phasespace, check_phasespace),
    "symbol": (run_symbol, check_symbol),
    "fbi": (run_fbi, check_fbi),
    "resonances": (run_resonances, check_resonances),
    "trace": (run_trace, check_trace),
    "lower-bound": (run_lower_bound, check_lower_bound),
}

