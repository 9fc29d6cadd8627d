"""EMCCD detection model: quantum-efficiency thinning, gain I = A*k + x0 and read noise."""
from __future__ import annotations
import logging
from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from qdistill.models import CameraModel, FrameStack, SceneConfig
from qdistill.optics import frame_rng, render_frame_counts, sample_frame

logger = logging.getLogger(__name__)

class FrameSink(Protocol):
    def write(self, frames: np.ndarray) -> None: ...

def detect(counts: np.ndarray, camera: CameraModel, rng: np.random.Generator) -> np.ndarray:
    """Binomial thinning of photon counts into photoelectrons."""
    counts = np.asarray(counts, dtype=np.int64)
    if np.any(counts < 0):
        raise ValueError("photon counts must be >= 0")
    if camera.quantum_efficiency == 1.0:
        return counts.copy()
    return rng.binomial(counts, camera.quantum_efficiency)

def quantize(levels: np.ndarray, bit_depth: int = 16) -> tuple[np.ndarray, int]:
    """Round half up and clamp to the ADC range. Returns (frame, clamped pixel count)."""
    top = 2 ** bit_depth - 1
    rounded = np.floor(levels + 0.5)
    clamped = int(np.count_nonzero((rounded < 0) | (rounded > top)))
    return np.clip(rounded, 0, top).astype(np.uint16), clamped

def _gray_levels(
    electrons: np.ndarray, camera: CameraModel, rng: np.random.Generator, gain: float,
) -> np.ndarray:
    electrons = np.asarray(electrons, dtype=np.int64)
    if camera.gain_mode == "stochastic":
        # Sum of k exponential gains of mean A is Gamma(k, A)
        signal = np.where(electrons > 0, rng.gamma(np.maximum(electrons, 1), gain), 0.0)
    else:
        signal = gain * electrons
    if camera.noise_std > 0:
        noise = rng.normal(camera.noise_mean, camera.noise_std, electrons.shape)
    else:
        noise = np.full(electrons.shape, float(camera.noise_mean))
    return signal + noise

def amplify(
    electrons: np.ndarray, camera: CameraModel, rng: np.random.Generator, gain: float | None = None,
) -> np.ndarray:
    """Gray-level frame for a photoelectron image."""
    if np.any(np.asarray(electrons) < 0):
        raise ValueError("photoelectron counts must be >= 0")
    frame, _ = quantize(_gray_levels(electrons, camera, rng, camera.amplification if gain is None else gain),
                        camera.bit_depth)
    return frame

# --- Gray-level calibration of homogeneous scenes ---

def pair_rate_for_level(quantum_level: float, camera: CameraModel, n_pixels: int) -> float:
    """Mean pair rate giving a flat mean gray level `quantum_level` (x0 included)."""
    if quantum_level <= camera.noise_mean:
        raise ValueError("quantum level must exceed the noise mean")
    per_pixel = (quantum_level - camera.noise_mean) / (camera.amplification * camera.quantum_efficiency)
    return per_pixel * n_pixels / 2.0

def classical_intensity_for_level(classical_level: float, camera: CameraModel) -> float:
    """Classical photons per pixel per frame adding `classical_level` gray levels above x0."""
    if classical_level < 0:
        raise ValueError("classical level must be >= 0")
    return classical_level / (camera.amplification * camera.quantum_efficiency)

# --- Stack simulation ---

@dataclass
class SimulationSummary:
    n_frames: int
    width: int
    height: int
    mean_image: np.ndarray
    clamped: int | None = 0
    at_bounds: int | None = None

    @property
    def mean_gray_level(self) -> float:
        return float(self.mean_image.mean())

@dataclass
class MemorySink:
    """Collects streamed frames into a FrameStack."""
    exposure_ms: float = 6.0
    _chunks: list[np.ndarray] = field(default_factory=list)

    def write(self, frames: np.ndarray) -> None:
        self._chunks.append(np.array(frames, dtype=np.uint16))

    def stack(self) -> FrameStack:
        return FrameStack(np.concatenate(self._chunks), exposure_ms=self.exposure_ms)

class FrameSimulator:
    """Generates frames of a scene; frame l depends only on (seed, l)."""

    def __init__(self, scene: SceneConfig, camera: CameraModel, n_frames: int, seed: int = 0):
        if n_frames < 2:
            raise ValueError("a stack needs at least 2 frames")
        self.scene = scene
        self.camera = camera
        self.n_frames = n_frames
        self.seed = seed
        self.clamped = 0

    def frame(self, index: int) -> tuple[np.ndarray, int]:
        rng = frame_rng(self.seed, index)
        records = sample_frame(self.scene, self.camera.pixel_pitch_um, rng)
        counts = render_frame_counts(records, self.scene.shape)
        electrons = detect(counts, self.camera, rng)
        gain = self.camera.gain_at(index, self.n_frames)
        return quantize(_gray_levels(electrons, self.camera, rng, gain), self.camera.bit_depth)

    def chunks(self, chunk_frames: int = 256, threads: int = 1) -> Iterator[np.ndarray]:
        """Yield (b, height, width) uint16 blocks in frame order."""
        executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
        try:
            for start in range(0, self.n_frames, chunk_frames):
                indices = range(start, min(start + chunk_frames, self.n_frames))
                produced = executor.map(self.frame, indices) if executor else map(self.frame, indices)
                frames = []
                for frame, clamped in produced:
                    frames.append(frame)
                    self.clamped += clamped
                yield np.stack(frames)
        finally:
            if executor:
                executor.shutdown()

def simulate_stack(
    scene: SceneConfig,
    camera: CameraModel,
    n_frames: int,
    seed: int,
    sink: FrameSink,
    chunk_frames: int = 256,
    threads: int = 1,
) -> SimulationSummary:
    """Simulate `n_frames` frames and write them to `sink` in order."""
    simulator = FrameSimulator(scene, camera, n_frames, seed)
    total = np.zeros(scene.shape, dtype=np.int64)
    written = 0
    for block in simulator.chunks(chunk_frames, threads):
        sink.write(block)
        total += block.sum(axis=0, dtype=np.int64)
        written += len(block)
        logger.debug("simulated %d/%d frames", written, n_frames)
    if simulator.clamped:
        logger.warning("%d pixel values clamped to the ADC range", simulator.clamped)
    return SimulationSummary(
        n_frames=written, width=scene.width, height=scene.height,
        mean_image=total / written, clamped=simulator.clamped,
    )

def simulate_frames(
    scene: SceneConfig, camera: CameraModel, n_frames: int, seed: int = 0, threads: int = 1,
) -> FrameStack:
    """In-memory convenience wrapper around simulate_stack."""
    sink = MemorySink(exposure_ms=camera.exposure_ms)
    simulate_stack(scene, camera, n_frames, seed, sink, threads=threads)
    return sink.stack()
