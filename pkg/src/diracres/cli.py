"""Command-line front end.

    diracres <kind> --config cfg.json [--out DIR] [--threads N] [--seed S]
    diracres verify DIR_OR_MANIFEST

Exit codes: 0 success (verify: pass), 1 verify failure, 2 configuration
error (nothing written), 3 numerical failure (diagnostics.json written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import traceback
from pathlib import Path

import jsonschema

from . import __version__
from .errors import ConfigurationError, DomainError, MalformedPotentialError, NumericalFailure
from .experiments import PIPELINES
from .manifest import MANIFEST_NAME, MIGRATIONS, SCHEMA_VERSION, Outputs, dumps, sha256, write_diagnostics

log = logging.getLogger("diracres")

KINDS = tuple(PIPELINES)
EXIT_OK, EXIT_VERIFY_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

_GRID = {
    "type": "object",
    "properties": {"start": {"type": "number"}, "stop": {"type": "number"},
                   "step": {"type": "number", "exclusiveMinimum": 0}, "num": {"type": "integer", "minimum": 2}},
    "required": ["start", "stop"],
    "oneOf": [{"required": ["step"]}, {"required": ["num"]}],
    "additionalProperties": False,
}
_POTENTIAL = {"type": "object", "required": ["kind"],
              "properties": {"kind": {"enum": ["zero", "gaussian", "lorentz", "bump", "table", "mollified"]}}}
_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_WINDOW = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}
_HBAR_LIST = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}

_PARAMS = {
    "phasespace": {"required": ["mu_grid"],
                   "properties": {"mu_grid": _GRID, "E_grid": _GRID, "convolution_check": {"type": "boolean"}}},
    "symbol": {"required": ["xi"],
               "properties": {"xi": _GRID, "signs": {"type": "array", "items": {"enum": ["+", "-"]}},
                              "order": {"type": "number"}, "xi0": {"type": "number"},
                              "width": {"type": "number", "exclusiveMinimum": 0}}},
    "fbi": {"required": ["mu_grid", "x_grid"],
            "properties": {"mu_grid": _GRID, "x_grid": _GRID, "conv_grid": _GRID, "lambda": _GRID,
                           "xi0": {"type": "number"},
                           "targets": {"type": "array", "items": {"enum": ["mu", "tau_mu", "phi_tau_mu"]}},
                           "witness": {"type": "object", "required": ["E0", "E_grid"],
                                       "properties": {"E0": {"type": "number"}, "E_grid": _GRID}}}},
    "resonances": {"required": ["hbar", "theta_pair", "window"],
                   "properties": {"hbar": {"type": "number", "exclusiveMinimum": 0},
                                  "theta_pair": {"type": "array", "items": _PAIR, "minItems": 2, "maxItems": 2},
                                  "window": _WINDOW, "kappa_max": {"type": "integer", "minimum": 1},
                                  "kappa_c": {"type": "number", "exclusiveMinimum": 0},
                                  "certify": {"type": "boolean"}, "solver": {"enum": ["auto", "dense", "sparse"]},
                                  "which": {"type": "array", "items": {"enum": ["v1", "v2"]}}}},
    "trace": {"required": ["hbar_list", "test_function"],
              "properties": {"hbar_list": _HBAR_LIST, "kappa_c": {"type": "number", "exclusiveMinimum": 0},
                             "test_function": {"type": "object", "required": ["chi"]}}},
    "lower-bound": {"required": ["hbar_list", "theta_pair", "window"],
                    "properties": {"hbar_list": _HBAR_LIST,
                                   "theta_pair": {"type": "array", "items": _PAIR, "minItems": 2, "maxItems": 2},
                                   "window": _WINDOW, "kappa_c": {"type": "number", "exclusiveMinimum": 0},
                                   "solver": {"enum": ["auto", "dense", "sparse"]},
                                   "which": {"type": "array", "items": {"enum": ["v1", "v2"]}, "minItems": 1}}},
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "seed", "params"],
    "properties": {
        "schema_version": {"type": "integer"},
        "kind": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "potentials": {"type": "object", "required": ["v1", "v2"],
                       "properties": {"v1": _POTENTIAL, "v2": _POTENTIAL}, "additionalProperties": False},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"kind": {"const": k}}},
         "then": {"properties": {"params": dict(type="object", **spec)},
                  **({} if k == "symbol" else {"required": ["potentials"]})}}
        for k, spec in _PARAMS.items()
    ],
}


def migration_hint(version) -> str:
    hint = MIGRATIONS.get(version, "regenerate the artifacts with the current version")
    return f"schema_version {version} is stale (current {SCHEMA_VERSION}): {hint}"


def load_config(path: Path, kind: str | None = None) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if isinstance(cfg, dict) and isinstance(cfg.get("schema_version"), int) and cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigurationError(migration_hint(cfg["schema_version"]))
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config schema violation at {where}: {exc.message}") from exc
    if kind is not None and cfg["kind"] != kind:
        raise ConfigurationError(f"subcommand {kind!r} does not match config kind {cfg['kind']!r}")
    return cfg


def run(kind: str, config_path: Path, out_dir: Path | None = None, threads: int = 1, seed: int | None = None) -> int:
    try:
        cfg = load_config(config_path, kind)
    except ConfigurationError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    if seed is not None:
        cfg["seed"] = int(seed)
    if out_dir is None:
        if "output_dir" not in cfg:
            log.error("no output directory: pass --out or set output_dir")
            return EXIT_CONFIG
        out_dir = Path(config_path).parent / cfg["output_dir"]
    out_dir = Path(out_dir)
    if threads < 1:
        log.error("--threads must be >= 1")
        return EXIT_CONFIG
    runner, _ = PIPELINES[kind]
    out = Outputs(out_dir)
    try:
        summary = runner(cfg, out, Path(config_path).parent, threads, cfg["seed"])
    except (ConfigurationError, DomainError, MalformedPotentialError) as exc:
        out.discard()
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        out.discard()
        p = write_diagnostics(out_dir, {"error": type(exc).__name__, "message": str(exc),
                                        "diagnostics": exc.diagnostics, "kind": kind, "config": cfg})
        log.error("numerical failure: %s (details in %s)", exc, p)
        return EXIT_NUMERICAL
    except Exception as exc:  # anything else is also a numerical failure of the pipeline
        out.discard()
        p = write_diagnostics(out_dir, {"error": type(exc).__name__, "message": str(exc), "kind": kind,
                                        "traceback": traceback.format_exc().splitlines()})
        log.error("unexpected failure: %s (details in %s)", exc, p)
        return EXIT_NUMERICAL
    cfg_text = dumps(cfg)
    manifest = {"kind": kind, "config": cfg, "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest(),
                "package_version": __version__, "summary": summary}
    out.json("config.json", cfg)
    path = out.commit(manifest)
    log.info("wrote %s", path)
    return EXIT_OK


def verify(target: Path) -> tuple[bool, list[str]]:
    """Recompute hashes and re-run the cheap invariant checks of the stored artifacts."""
    target = Path(target)
    path = target / MANIFEST_NAME if target.is_dir() else target
    if not path.is_file():
        raise ConfigurationError(f"manifest not found: {path}")
    try:
        man = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"manifest is not valid JSON: {exc}") from exc
    version = man.get("schema_version")
    if version != SCHEMA_VERSION:
        return False, [migration_hint(version)]
    root = path.parent
    problems, changed = [], []
    for entry in man.get("files", []):
        f = root / entry["path"]
        if not f.is_file():
            changed.append(f"{entry['path']} (missing)")
        elif sha256(f) != entry["sha256"]:
            changed.append(entry["path"])
    if changed:
        problems.append("hash mismatch: " + ", ".join(changed))
        return False, problems
    kind = man.get("kind")
    if kind not in PIPELINES:
        return False, [f"unknown experiment kind {kind!r}"]
    _, check = PIPELINES[kind]
    problems += check(root, [e["path"] for e in man["files"]])
    return not problems, problems


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diracres", description="Dirac resonance numerical laboratory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for k in KINDS:
        sp = sub.add_parser(k, help=f"run a {k} experiment")
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int)
    vp = sub.add_parser("verify", help="check a manifest and its artifacts")
    vp.add_argument("manifest", type=Path, nargs="?")
    vp.add_argument("--config", type=Path, help=argparse.SUPPRESS)
    vp.add_argument("--out", type=Path, help="output directory holding manifest.json")
    vp.add_argument("--threads", type=int, default=1, help=argparse.SUPPRESS)
    vp.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    if args.command == "verify":
        target = args.manifest or args.out
        if target is None:
            log.error("verify needs a manifest path or --out")
            return EXIT_CONFIG
        try:
            ok, problems = verify(target)
        except ConfigurationError as exc:
            log.error("%s", exc)
            return EXIT_CONFIG
        for p in problems:
            print(f"FAIL {p}")
        print("PASS" if ok else "FAIL")
        return EXIT_OK if ok else EXIT_VERIFY_FAILED
    return run(args.command, args.config, args.out, args.threads, args.seed)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
