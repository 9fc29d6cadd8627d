"""Tests for QDIF frame-stack files."""
import hashlib

import numpy as np
import pytest

from qdistill.models import FrameStack
from qdistill.qdif import HEADER, CorruptStackError, QdifReader, QdifWriter, read_stack, write_stack

def _frames(n=5, h=2, w=3):
    return np.arange(n * h * w, dtype=np.uint16).reshape(n, h, w) * 1000

def test_header_layout(tmp_path):
    path = tmp_path / "s.qdif"
    write_stack(path, FrameStack(_frames(), exposure_ms=6.0))
    data = path.read_bytes()
    assert HEADER.size == 36
    assert data[:4] == b"QDIF"
    assert data[4] == 1
    assert int.from_bytes(data[5:9], "little") == 3
    assert int.from_bytes(data[9:13], "little") == 2
    assert int.from_bytes(data[13:21], "little") == 5
    assert len(data) == 36 + 5 * 2 * 3 * 2
    # first pixel of frame 1 is 6000, little-endian
    assert data[36 + 12:36 + 14] == (6000).to_bytes(2, "little")

def test_round_trip(tmp_path):
    path = tmp_path / "s.qdif"
    stack = FrameStack(_frames(), exposure_ms=4.5)
    write_stack(path, stack)
    loaded = read_stack(path)
    assert np.array_equal(loaded.frames, stack.frames)
    assert loaded.exposure_ms == 4.5

def test_writer_patches_frame_count(tmp_path):
    path = tmp_path / "s.qdif"
    frames = _frames(7)
    with QdifWriter(path, 3, 2) as writer:
        writer.write(frames[:3])
        writer.write(frames[3])
        writer.write(frames[4:])
    reader = QdifReader(path)
    assert reader.n_frames == 7
    assert [len(c) for c in reader.chunks(3)] == [3, 3, 1]

def test_writer_rejects_wrong_shape(tmp_path):
    with QdifWriter(tmp_path / "s.qdif", 3, 2) as writer:
        with pytest.raises(ValueError):
            writer.write(np.zeros((1, 3, 3), dtype=np.uint16))

def test_sha256_covers_whole_file(tmp_path):
    path = tmp_path / "s.qdif"
    write_stack(path, FrameStack(_frames()))
    reader = QdifReader(path)
    assert reader.sha256 == hashlib.sha256(path.read_bytes()).hexdigest()

def test_truncated_stack_names_frame(tmp_path):
    path = tmp_path / "s.qdif"
    write_stack(path, FrameStack(_frames()))
    data = path.read_bytes()
    path.write_bytes(data[:36 + 2 * 12 + 5])
    with pytest.raises(CorruptStackError) as exc:
        QdifReader(path)
    assert exc.value.frame_index == 2
    assert "frame 2" in str(exc.value)

def test_trailing_bytes_are_corrupt(tmp_path):
    path = tmp_path / "s.qdif"
    write_stack(path, FrameStack(_frames()))
    with open(path, "ab") as f:
        f.write(b"\0\0")
    with pytest.raises(CorruptStackError) as exc:
        QdifReader(path)
    assert exc.value.frame_index == 5

def test_bad_magic_and_version(tmp_path):
    path = tmp_path / "s.qdif"
    write_stack(path, FrameStack(_frames()))
    data = bytearray(path.read_bytes())
    path.write_bytes(b"XXXX" + bytes(data[4:]))
    with pytest.raises(CorruptStackError):
        QdifReader(path)
    data[4] = 9
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptStackError):
        QdifReader(path)

def test_short_header(tmp_path):
    path = tmp_path / "s.qdif"
    path.write_bytes(b"QDIF")
    with pytest.raises(CorruptStackError):
        QdifReader(path)
