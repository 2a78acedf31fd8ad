"""Versioned little-endian binary containers for models and projections.

Model file ("DPNN"):   magic, u32 version, u32 layer count, then per layer
u32 out and u32 in dims, then per layer the raw float64 weight matrix
(row-major) followed by the bias vector.

Projection file ("DPCA"): magic, u32 version, u32 input dim d, u32 target
dim k, then the raw float64 (d, k) column matrix in row-major order.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import BadMagic, TruncatedFile

MODEL_MAGIC = b"DPNN"
PROJECTION_MAGIC = b"DPCA"
FORMAT_VERSION = 1


def _read_exact(f, n: int, path: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise TruncatedFile(f"{path}: wanted {n} bytes at offset {f.tell() - len(data)}")
    return data


def save_model(path: str, layers: list[tuple[np.ndarray, np.ndarray]]) -> None:
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(layers)))
        for w, b in layers:
            f.write(struct.pack("<II", w.shape[0], w.shape[1]))
        for w, b in layers:
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path: str) -> list[tuple[np.ndarray, np.ndarray]]:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, path)
        if magic != MODEL_MAGIC:
            raise BadMagic(f"{path}: expected {MODEL_MAGIC!r} at offset 0, got {magic!r}")
        version, count = struct.unpack("<II", _read_exact(f, 8, path))
        if version != FORMAT_VERSION:
            raise BadMagic(f"{path}: unsupported format version {version}")
        dims = [struct.unpack("<II", _read_exact(f, 8, path)) for _ in range(count)]
        layers = []
        for out_dim, in_dim in dims:
            w = np.frombuffer(
                _read_exact(f, 8 * out_dim * in_dim, path), dtype="<f8"
            ).reshape(out_dim, in_dim)
            b = np.frombuffer(_read_exact(f, 8 * out_dim, path), dtype="<f8")
            layers.append((w.copy(), b.copy()))
        return layers


def save_projection(path: str, columns: np.ndarray) -> None:
    d, k = columns.shape
    with open(path, "wb") as f:
        f.write(PROJECTION_MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, d, k))
        f.write(np.ascontiguousarray(columns, dtype="<f8").tobytes())


def load_projection(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, path)
        if magic != PROJECTION_MAGIC:
            raise BadMagic(
                f"{path}: expected {PROJECTION_MAGIC!r} at offset 0, got {magic!r}"
            )
        version, d, k = struct.unpack("<III", _read_exact(f, 12, path))
        if version != FORMAT_VERSION:
            raise BadMagic(f"{path}: unsupported format version {version}")
        data = np.frombuffer(_read_exact(f, 8 * d * k, path), dtype="<f8")
        return data.reshape(d, k).copy()
