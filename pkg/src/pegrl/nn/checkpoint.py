"""Versioned binary checkpoint blobs.

Layout (all little-endian):

    magic b"PGNC" | u32 schema_version | u32 entry_count | entries...

Each entry: u16 name length, name (utf-8), u8 kind, payload.
Kinds: 0 = float64 array (u8 ndim, u64 dims..., row-major data),
1 = float64 scalar, 2 = int64 scalar, 3 = utf-8 string (u32 length).
Byte-stable across platforms; the writer never emits platform-dependent
types.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .mlp import MlpParams

MAGIC = b"PGNC"
SCHEMA_VERSION = 1

Entry = "np.ndarray | float | int | str"


class CheckpointError(RuntimeError):
    pass


def save_blob(path: str | Path, entries: dict) -> None:
    chunks = [MAGIC, struct.pack("<II", SCHEMA_VERSION, len(entries))]
    for name, value in entries.items():
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw_name)))
        chunks.append(raw_name)
        if isinstance(value, np.ndarray):
            arr = np.ascontiguousarray(value, dtype="<f8")
            chunks.append(struct.pack("<BB", 0, arr.ndim))
            chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            chunks.append(arr.tobytes())
        elif isinstance(value, bool):
            chunks.append(struct.pack("<Bq", 2, int(value)))
        elif isinstance(value, (float, np.floating)):
            chunks.append(struct.pack("<Bd", 1, float(value)))
        elif isinstance(value, (int, np.integer)):
            chunks.append(struct.pack("<Bq", 2, int(value)))
        elif isinstance(value, str):
            raw = value.encode("utf-8")
            chunks.append(struct.pack("<BI", 3, len(raw)))
            chunks.append(raw)
        else:
            raise CheckpointError(f"unsupported entry type for {name!r}: {type(value)}")
    Path(path).write_bytes(b"".join(chunks))


def load_blob(path: str | Path) -> dict:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {data[:4]!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != SCHEMA_VERSION:
        raise CheckpointError(f"{path}: unsupported schema_version {version}")
    off = 12
    out: dict = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off : off + name_len].decode("utf-8")
        off += name_len
        (kind,) = struct.unpack_from("<B", data, off)
        off += 1
        if kind == 0:
            (ndim,) = struct.unpack_from("<B", data, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}Q", data, off)
            off += 8 * ndim
            n = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shape)
            out[name] = arr.copy()
            off += 8 * n
        elif kind == 1:
            (out[name],) = struct.unpack_from("<d", data, off)
            off += 8
        elif kind == 2:
            (out[name],) = struct.unpack_from("<q", data, off)
            off += 8
        elif kind == 3:
            (slen,) = struct.unpack_from("<I", data, off)
            off += 4
            out[name] = data[off : off + slen].decode("utf-8")
            off += slen
        else:
            raise CheckpointError(f"{path}: unknown entry kind {kind} for {name!r}")
    return out


def params_to_entries(prefix: str, params: MlpParams) -> dict:
    entries: dict = {
        f"{prefix}/n_layers": len(params.weights),
        f"{prefix}/activation": params.activation,
        f"{prefix}/init_seed": -1 if params.init_seed is None else params.init_seed,
        f"{prefix}/layer_norm": int(params.layer_norm),
    }
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        entries[f"{prefix}/w{i}"] = w
        entries[f"{prefix}/b{i}"] = b
    for i, (g, s) in enumerate(zip(params.ln_gains, params.ln_shifts)):
        entries[f"{prefix}/lng{i}"] = g
        entries[f"{prefix}/lns{i}"] = s
    return entries


def params_from_entries(prefix: str, entries: dict) -> MlpParams:
    n = int(entries[f"{prefix}/n_layers"])
    seed = int(entries[f"{prefix}/init_seed"])
    layer_norm = bool(entries.get(f"{prefix}/layer_norm", 0))
    ln_gains, ln_shifts = [], []
    if layer_norm:
        ln_gains = [entries[f"{prefix}/lng{i}"] for i in range(n - 1)]
        ln_shifts = [entries[f"{prefix}/lns{i}"] for i in range(n - 1)]
    return MlpParams(
        weights=[entries[f"{prefix}/w{i}"] for i in range(n)],
        biases=[entries[f"{prefix}/b{i}"] for i in range(n)],
        activation=str(entries[f"{prefix}/activation"]),
        init_seed=None if seed < 0 else seed,
        layer_norm=layer_norm,
        ln_gains=ln_gains,
        ln_shifts=ln_shifts,
    )
