"""Deterministic artifact I/O: CSV with metadata rows, a small binary matrix
format, and the run manifest.

Binary matrix layout (little-endian, 32-byte header, then row-major float64):

    bytes  0..7   magic  b"HFDMAT01"
    bytes  8..15  rows   (int64)
    bytes 16..23  cols   (int64)
    bytes 24..31  tag    b"NODEMAJ\\0"  (node-major component ordering)

All writers are atomic (write to a temp file in the same directory, then
rename) and format floats with repr-precision so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"HFDMAT01"
TAG = b"NODEMAJ\0"


def _atomic_write_bytes(path: Path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str):
    _atomic_write_bytes(Path(path), text.encode("utf-8"))


def fmt(x) -> str:
    return repr(float(x))


def save_matrix_bin(path, M: np.ndarray):
    M = np.ascontiguousarray(np.asarray(M, dtype="<f8"))
    header = MAGIC + struct.pack("<qq", M.shape[0], M.shape[1]) + TAG
    _atomic_write_bytes(Path(path), header + M.tobytes(order="C"))


def load_matrix_bin(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a matrix file (bad magic)")
    rows, cols = struct.unpack("<qq", raw[8:24])
    if raw[24:32] != TAG:
        raise ValueError(f"{path}: unknown ordering tag {raw[24:32]!r}")
    data = np.frombuffer(raw[32:], dtype="<f8", count=rows * cols)
    return data.reshape(rows, cols).copy()


def save_matrix_csv(path, M: np.ndarray, name: str, units: str = "dimensionless"):
    M = np.asarray(M, dtype=float)
    lines = [
        f"# matrix: {name}",
        f"# units: {units}",
        f"# shape: {M.shape[0]} {M.shape[1]}",
        "# ordering: node-major, components (e, rho, j1..jd) per interior node",
        ",".join(f"c{j}" for j in range(M.shape[1])),
    ]
    for row in M:
        lines.append(",".join(fmt(v) for v in row))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def save_table_csv(path, columns: dict[str, np.ndarray], units: dict[str, str] | None = None):
    """Column-oriented CSV with a header row and a units metadata row."""
    names = list(columns.keys())
    n = len(next(iter(columns.values())))
    units = units or {}
    lines = [
        "# " + ",".join(f"{k}[{units.get(k, '1')}]" for k in names),
        ",".join(names),
    ]
    for i in range(n):
        lines.append(",".join(fmt(np.asarray(columns[k]).reshape(-1)[i]) for k in names))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def dump_json(path, obj):
    atomic_write_text(Path(path), json.dumps(obj, sort_keys=True, indent=1) + "\n")


def load_json(path):
    return json.loads(Path(path).read_text())


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def update_manifest(out_dir, base: dict, stage: str, entry: dict):
    """Merge one stage record into <out>/manifest.json atomically."""
    path = Path(out_dir) / "manifest.json"
    manifest = load_json(path) if path.exists() else {}
    manifest.update(base)
    stages = manifest.setdefault("stages", {})
    stages[stage] = entry
    dump_json(path, manifest)
    return manifest
