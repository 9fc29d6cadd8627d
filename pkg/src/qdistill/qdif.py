"""QDIF frame-stack files: fixed little-endian header followed by u16 frames."""
from __future__ import annotations
import hashlib
import logging
import struct
from collections.abc import Iterator
from pathlib import Path

import numpy as np

from qdistill.models import FrameStack

logger = logging.getLogger(__name__)

MAGIC = b"QDIF"
VERSION = 1
# magic, version, width, height, n_frames, exposure_ms, 11 reserved bytes
HEADER = struct.Struct("<4sBIIQf11x")
PIXEL = np.dtype("<u2")

class CorruptStackError(Exception):
    def __init__(self, message: str, frame_index: int | None = None):
        self.frame_index = frame_index
        if frame_index is not None:
            message = f"{message} (frame {frame_index})"
        super().__init__(message)

class QdifWriter:
    """Streams frames to disk; the frame count is patched into the header on close."""

    def __init__(self, path: Path | str, width: int, height: int, exposure_ms: float = 6.0):
        self.path = Path(path)
        self.width = width
        self.height = height
        self.exposure_ms = exposure_ms
        self.n_frames = 0
        self._file = open(self.path, "wb")
        self._file.write(self._header())

    def _header(self) -> bytes:
        return HEADER.pack(MAGIC, VERSION, self.width, self.height, self.n_frames, self.exposure_ms)

    def write(self, frames: np.ndarray) -> None:
        frames = np.asarray(frames)
        if frames.ndim == 2:
            frames = frames[None]
        if frames.shape[1:] != (self.height, self.width):
            raise ValueError(
                f"frame shape {frames.shape[2]}x{frames.shape[1]} does not match stack {self.width}x{self.height}"
            )
        if frames.dtype != np.uint16 and (frames.min() < 0 or frames.max() > 65535):
            raise ValueError("frame values must fit in 16 bits")
        self._file.write(np.ascontiguousarray(frames, dtype=PIXEL).tobytes())
        self.n_frames += len(frames)

    def close(self) -> None:
        if self._file.closed:
            return
        self._file.seek(0)
        self._file.write(self._header())
        self._file.close()

    def __enter__(self) -> QdifWriter:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

class QdifReader:
    """Validating reader; `chunks()` streams the payload and hashes the file as it goes."""

    def __init__(self, path: Path | str):
        self.path = Path(path)
        with open(self.path, "rb") as f:
            raw = f.read(HEADER.size)
        if len(raw) < HEADER.size:
            raise CorruptStackError(f"{self.path}: file too short for a QDIF header")
        magic, version, width, height, n_frames, exposure = HEADER.unpack(raw)
        if magic != MAGIC:
            raise CorruptStackError(f"{self.path}: bad magic {magic!r}")
        if version != VERSION:
            raise CorruptStackError(f"{self.path}: unsupported QDIF version {version}")
        self.width = width
        self.height = height
        self.n_frames = n_frames
        self.exposure_ms = float(exposure)
        self.frame_bytes = width * height * PIXEL.itemsize

        payload = self.path.stat().st_size - HEADER.size
        expected = self.frame_bytes * n_frames
        if payload < expected:
            raise CorruptStackError(f"{self.path}: truncated stack", frame_index=payload // self.frame_bytes)
        if payload > expected:
            raise CorruptStackError(f"{self.path}: trailing bytes after last frame", frame_index=n_frames)
        self._digest: str | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def sha256(self) -> str:
        """Hex digest of the whole file; computed by a full `chunks()` pass or on demand."""
        if self._digest is None:
            for _ in self.chunks():
                pass
        return self._digest

    def chunks(self, size: int = 256) -> Iterator[np.ndarray]:
        digest = hashlib.sha256()
        with open(self.path, "rb") as f:
            digest.update(f.read(HEADER.size))
            index = 0
            while index < self.n_frames:
                count = min(size, self.n_frames - index)
                buf = f.read(count * self.frame_bytes)
                if len(buf) < count * self.frame_bytes:
                    raise CorruptStackError(
                        f"{self.path}: unexpected end of file", frame_index=index + len(buf) // self.frame_bytes,
                    )
                digest.update(buf)
                yield np.frombuffer(buf, dtype=PIXEL).reshape(count, self.height, self.width)
                index += count
        self._digest = digest.hexdigest()
        logger.debug("read %d frames from %s", self.n_frames, self.path)

def write_stack(path: Path | str, stack: FrameStack) -> None:
    with QdifWriter(path, stack.width, stack.height, stack.exposure_ms) as writer:
        writer.write(stack.frames)

def read_stack(path: Path | str) -> FrameStack:
    reader = QdifReader(path)
    frames = np.concatenate(list(reader.chunks())) if reader.n_frames else np.empty((0, reader.height, reader.width))
    return FrameStack(frames.astype(np.uint16), exposure_ms=reader.exposure_ms)
