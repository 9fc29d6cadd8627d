"""QDCR files: a finalized CorrelationResult in fixed little-endian layout.

Header: magic "QDCR", version u8, width u32, height u32, n_frames u64, window_radius u32,
estimator u8, source SHA-256 (32 bytes), 8 reserved bytes.
Payload: gamma f64 (2w+1, 2w+1, height, width), diagonal f64 (height, width), marginal f64 (height, width).
"""
from __future__ import annotations
import struct
from pathlib import Path

import numpy as np

from qdistill.models import ESTIMATORS, CorrelationResult

MAGIC = b"QDCR"
VERSION = 1
HEADER = struct.Struct("<4sBIIQIB32s8x")
FLOAT = np.dtype("<f8")

class ContainerError(Exception):
    pass

def write_result(path: Path | str, res: CorrelationResult) -> None:
    digest = bytes.fromhex(res.source_hash) if res.source_hash else bytes(32)
    header = HEADER.pack(
        MAGIC, VERSION, res.width, res.height, res.n_frames, res.window_radius,
        ESTIMATORS.index(res.estimator), digest,
    )
    with open(path, "wb") as f:
        f.write(header)
        for array in (res.gamma, res.diagonal, res.marginal):
            f.write(np.ascontiguousarray(array, dtype=FLOAT).tobytes())

def read_result(path: Path | str) -> CorrelationResult:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise ContainerError(f"{path}: file too short for a QDCR header")
    magic, version, width, height, n_frames, w, estimator, digest = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ContainerError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported QDCR version {version}")
    if estimator >= len(ESTIMATORS):
        raise ContainerError(f"{path}: unknown estimator code {estimator}")
    k = 2 * w + 1
    sizes = (k * k * height * width, height * width, height * width)
    expected = HEADER.size + sum(sizes) * FLOAT.itemsize
    if len(data) != expected:
        raise ContainerError(f"{path}: expected {expected} bytes, found {len(data)}")

    arrays = []
    offset = HEADER.size
    for size in sizes:
        arrays.append(np.frombuffer(data, dtype=FLOAT, count=size, offset=offset).astype(np.float64))
        offset += size * FLOAT.itemsize
    gamma, diagonal, marginal = arrays
    return CorrelationResult(
        gamma=gamma.reshape(k, k, height, width),
        diagonal=diagonal.reshape(height, width),
        marginal=marginal.reshape(height, width),
        n_frames=n_frames,
        window_radius=w,
        estimator=ESTIMATORS[estimator],
        source_hash="" if digest == bytes(32) else digest.hex(),
    )
