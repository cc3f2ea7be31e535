"""Serialization: TBCF field snapshots, CSV exports, run checkpoints.

TBCF is a little-endian binary snapshot format:

===========  ========  =======================================
field        type      meaning
===========  ========  =======================================
magic        4 bytes   ASCII "TBCF"
version      u32       format version, currently 1
dim          u32       1, 2 or 3
extents      dim*u32   per-axis node counts
h            f64       spatial step
tau          f64       temporal step
step         u32       time-step index of the snapshot
data         f64 pairs row-major interleaved (re, im)
===========  ========  =======================================
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

TBCF_MAGIC = b"TBCF"
TBCF_VERSION = 1


def write_field_tbcf(path, field: np.ndarray, h: float, tau: float,
                     step: int) -> None:
    field = np.ascontiguousarray(field, dtype=complex)
    dim = field.ndim
    if dim not in (1, 2, 3):
        raise ConfigurationError("TBCF stores 1D/2D/3D fields only")
    with open(path, "wb") as fh:
        fh.write(TBCF_MAGIC)
        fh.write(struct.pack("<II", TBCF_VERSION, dim))
        fh.write(struct.pack(f"<{dim}I", *field.shape))
        fh.write(struct.pack("<ddI", h, tau, step))
        inter = np.empty(field.size * 2, dtype="<f8")
        inter[0::2] = field.real.ravel()
        inter[1::2] = field.imag.ravel()
        fh.write(inter.tobytes())


def read_field_tbcf(path):
    """Returns (field, meta) with meta = {dim, h, tau, step}."""
    with open(path, "rb") as fh:
        if fh.read(4) != TBCF_MAGIC:
            raise ConfigurationError(f"{path}: not a TBCF file")
        version, dim = struct.unpack("<II", fh.read(8))
        if version != TBCF_VERSION:
            raise ConfigurationError(f"{path}: unsupported version {version}")
        extents = struct.unpack(f"<{dim}I", fh.read(4 * dim))
        h, tau, step = struct.unpack("<ddI", fh.read(20))
        n = int(np.prod(extents))
        inter = np.frombuffer(fh.read(16 * n), dtype="<f8")
    field = (inter[0::2] + 1j * inter[1::2]).reshape(extents)
    return field, {"dim": dim, "h": h, "tau": tau, "step": step}


def export_slice_csv(path, field2d: np.ndarray, x_coords: np.ndarray,
                     z_coords: np.ndarray, y_value: float = 0.0) -> None:
    """(x, y, z, re, im, |psi|^2) rows for a plane slice at fixed y."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "z", "re", "im", "abs2"])
        for i, xv in enumerate(x_coords):
            for k, zv in enumerate(z_coords):
                v = field2d[i, k]
                wr.writerow([f"{xv:.12g}", f"{y_value:.12g}", f"{zv:.12g}",
                             f"{v.real:.17g}", f"{v.imag:.17g}",
                             f"{abs(v) ** 2:.17g}"])


def write_metrics_csv(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        wr.writeheader()
        for row in rows:
            wr.writerow({k: _fmt(row.get(k)) for k in columns})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return v


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(r) for r in csv.DictReader(fh)]


def append_jsonl(path, record: dict) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(record) + "\n")


# ------------------------------------------------------------ checkpoints

def _flatten(tree, prefix, out):
    if isinstance(tree, dict):
        for k, v in tree.items():
            _flatten(v, f"{prefix}/{k}" if prefix else str(k), out)
    elif isinstance(tree, (list, tuple)):
        out[f"{prefix}/#len"] = np.asarray(len(tree))
        for i, v in enumerate(tree):
            _flatten(v, f"{prefix}/#{i}", out)
    else:
        out[prefix] = np.asarray(tree)


def _unflatten(flat):
    tree = {}
    for key, value in flat.items():
        parts = key.split("/")
        node = tree
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value

    def rebuild(node):
        if not isinstance(node, dict):
            return node
        if "#len" in node:
            n = int(node["#len"])
            return [rebuild(node[f"#{i}"]) for i in range(n)]
        return {k: rebuild(v) for k, v in node.items()}

    return rebuild(tree)


def save_checkpoint(path, state: dict) -> None:
    """Full run state (fields, histories, live aux problems) as an npz."""
    flat = {}
    _flatten(state, "", flat)
    np.savez_compressed(path, **flat)


def load_checkpoint(path) -> dict:
    with np.load(path, allow_pickle=False) as data:
        flat = {k: data[k] for k in data.files}
    return _unflatten(flat)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
