"""Local trace comparison on a complex window, over a small (lambda, beta) sweep.

    python scripts/local_trace.py --hbar 0.05 --out runs/local_trace.json

Resonances of both operators are computed in W, then for every probe the
resonance sum is set against the phase-space integral, together with the
suppression constant on Omega minus W. Takes a few minutes at hbar = 0.05.
"""

import argparse
import sys
import time
from pathlib import Path

from diracres import dirac, potentials, traces
from diracres.manifest import dumps


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="local trace comparison")
    ap.add_argument("--hbar", type=float, default=0.05)
    ap.add_argument("--E0", type=float, default=0.5)
    ap.add_argument("--a", type=float, default=0.15)
    ap.add_argument("--b", type=float, default=0.1)
    ap.add_argument("--alpha", type=float, nargs="+", default=[1.5, 1.9])
    ap.add_argument("--beta", type=float, nargs="+", default=[0.0, 0.8])
    ap.add_argument("--lam", type=float, nargs="+", default=[100.0, 400.0])
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("runs/local_trace.json"))
    args = ap.parse_args(argv)

    v2 = potentials.gaussian(0.5)
    v1 = potentials.mollify_split(v2, potentials.radius_for_tail(v2, 1e-3))
    win = traces.ComplexWindow(args.E0, args.a, args.b)
    W = win.W
    km = dirac.kappa_max_rule(args.hbar)
    t0 = time.perf_counter()
    sets = [dirac.resonances(v, args.hbar, 0.5j, 0.6j, W, km, threads=args.threads) for v in (v1, v2)]
    quad = traces.omega_quadrature(v1, v2, (W.re_lo - win.b, W.re_hi + win.b))
    rows = []
    for alpha in args.alpha:
        for beta in args.beta:
            for lam in args.lam:
                probe = traces.GaussianProbe(alpha, beta, lam)
                rep = traces.local_trace_experiment(v1, v2, args.hbar, win, probe, *sets, quadrature=quad)
                sup = traces.suppression_check(win, probe)
                rows.append({"alpha": alpha, "beta": beta, "lambda": lam, **rep.to_dict(),
                             "suppression": sup.to_dict()})
                print(f"alpha={alpha} beta={beta} lam={lam}: |res|={abs(rep.resonance_sum):.3e} "
                      f"|ps|={abs(rep.phase_space):.3e} bound_holds={rep.bound_holds}")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(dumps({"hbar": args.hbar, "window": win.to_dict(), "kappa_max": km,
                               "resonances": [s.to_dict() for s in sets], "probes": rows,
                               "seconds": time.perf_counter() - t0}))
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
