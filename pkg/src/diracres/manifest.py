"""Deterministic artifact writing, manifests and their verification."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import shutil
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 2
MANIFEST_NAME = "manifest.json"
DIAGNOSTICS_NAME = "diagnostics.json"

MIGRATIONS = {
    1: "schema 1 stored theta as a bare imaginary part; declare theta_pair as [[re, im], [re, im]] "
       "and re-run the experiment to regenerate the manifest",
}


def jsonable(x):
    """Plain JSON types; non-finite floats become the strings 'inf', '-inf', 'nan'."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (complex, np.complexfloating)):
        return [jsonable(x.real), jsonable(x.imag)]
    return x


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


class Outputs:
    """Collects files in a staging directory; ``commit`` moves them into place.

    Nothing reaches the output directory unless the whole experiment succeeds.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.staging = self.out_dir.parent / f".{self.out_dir.name}.staging"
        if self.staging.exists():
            shutil.rmtree(self.staging)
        self.staging.mkdir(parents=True)
        self.files: list[str] = []

    def _path(self, name: str) -> Path:
        self.files.append(name)
        p = self.staging / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def json(self, name: str, obj) -> None:
        self._path(name).write_text(dumps(obj))

    def csv(self, name: str, header, rows, comment: str | None = None) -> None:
        buf = io.StringIO()
        if comment:
            buf.write(f"# {comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
        self._path(name).write_text(buf.getvalue())

    def adopt(self, paths) -> None:
        """Register files already written into the staging directory."""
        for p in paths:
            self.files.append(str(Path(p).relative_to(self.staging)))

    def commit(self, manifest: dict) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for name in sorted(set(self.files)):
            src = self.staging / name
            entries.append({"path": name, "sha256": sha256(src), "bytes": src.stat().st_size})
        manifest = dict(manifest, files=entries, schema_version=SCHEMA_VERSION)
        (self.staging / MANIFEST_NAME).write_text(dumps(manifest))
        for name in sorted(set(self.files)) + [MANIFEST_NAME]:
            dst = self.out_dir / name
            dst.parent.mkdir(parents=True, exist_ok=True)
            os.replace(self.staging / name, dst)
        shutil.rmtree(self.staging, ignore_errors=True)
        return self.out_dir / MANIFEST_NAME

    def discard(self) -> None:
        shutil.rmtree(self.staging, ignore_errors=True)


def write_diagnostics(out_dir: Path, payload: dict) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    p = out_dir / DIAGNOSTICS_NAME
    p.write_text(dumps(payload))
    return p


def read_csv(path: Path):
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]
