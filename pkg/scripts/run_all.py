"""Run every experiment under scripts/configs and verify each manifest.

    python scripts/run_all.py [--only lower_bound trace] [--threads N] [--skip-heavy]

Outputs land where each config's output_dir points (runs/<name> at the repo root).
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from diracres import cli

CONFIGS = Path(__file__).resolve().parent / "configs"
HEAVY = {"lower_bound", "trace"}  # several minutes each on one core


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", nargs="*", help="config stems to run")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--skip-heavy", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    status = 0
    for path in sorted(CONFIGS.glob("*.json")):
        name = path.stem
        if (args.only and name not in args.only) or (args.skip_heavy and name in HEAVY):
            continue
        cfg = json.loads(path.read_text())
        t0 = time.perf_counter()
        code = cli.run(cfg["kind"], path, threads=args.threads)
        out = path.parent / cfg["output_dir"]
        ok, problems = cli.verify(out) if code == 0 else (False, [f"exit code {code}"])
        print(f"{name:22s} exit={code} verify={'PASS' if ok else 'FAIL'} {time.perf_counter() - t0:7.1f}s")
        for p in problems:
            print(f"    {p}")
        status = status or (code or 1 if not ok else 0)
    return status


if __name__ == "__main__":
    sys.exit(main())
