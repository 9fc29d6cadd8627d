"""Photon arrivals at the camera plane for the pair arm and the classical arm."""
from __future__ import annotations
import logging

import numpy as np

from qdistill.models import (
    ClassicalSource, ObjectMask, Origin, PairSource, PhotonRecords, SceneConfig, check_grid,
)

logger = logging.getLogger(__name__)

MAX_RESAMPLE_ROUNDS = 1000

def frame_rng(seed: int, frame_index: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, frame index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, frame_index])))

def sample_pairs(
    source: PairSource, shape: tuple[int, int], pixel_pitch_um: float, rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one frame of photon pairs.

    Returns two (n, 2) integer arrays of (row, col) pixel coordinates, one per photon
    of each pair. The first photon is placed uniformly inside a pixel drawn from the
    marginal profile; its partner is offset by an isotropic Gaussian of width
    sigma_r, redrawn until it lands on the grid.
    """
    height, width = shape
    n = int(rng.poisson(source.mean_pair_rate))
    if source.marginal_profile is None:
        flat = rng.integers(0, height * width, size=n)
    else:
        flat = rng.choice(height * width, size=n, p=source.marginal(height, width).ravel())
    y1 = flat // width + rng.random(n)
    x1 = flat % width + rng.random(n)

    sigma_px = source.correlation_width_um / pixel_pitch_um
    if sigma_px == 0.0:
        y2, x2 = y1, x1
    else:
        y2 = np.empty(n)
        x2 = np.empty(n)
        pending = np.arange(n)
        for _ in range(MAX_RESAMPLE_ROUNDS):
            if not len(pending):
                break
            ty = y1[pending] + rng.normal(0.0, sigma_px, len(pending))
            tx = x1[pending] + rng.normal(0.0, sigma_px, len(pending))
            inside = (ty >= 0) & (ty < height) & (tx >= 0) & (tx < width)
            y2[pending[inside]] = ty[inside]
            x2[pending[inside]] = tx[inside]
            pending = pending[~inside]
        if len(pending):
            logger.warning("%d partner photons clamped after %d redraws", len(pending), MAX_RESAMPLE_ROUNDS)
            y2[pending] = np.clip(y1[pending], 0, height - 1)
            x2[pending] = np.clip(x1[pending], 0, width - 1)

    first = np.stack([np.floor(y1), np.floor(x1)], axis=1).astype(np.int64)
    second = np.stack([np.floor(y2), np.floor(x2)], axis=1).astype(np.int64)
    return first, second

def transmit_pair(
    first: np.ndarray, second: np.ndarray, mask: ObjectMask, rng: np.random.Generator,
) -> PhotonRecords:
    """Thin each photon independently by |t|^2 at its own pixel."""
    n = len(first)
    if n == 0:
        return PhotonRecords()
    p = mask.transmission
    keep1 = rng.random(n) < p[first[:, 0], first[:, 1]]
    keep2 = rng.random(n) < p[second[:, 0], second[:, 1]]
    both = keep1 & keep2

    tag = np.where(both, Origin.PAIR_BOTH, Origin.PAIR_SINGLE).astype(np.uint8)
    return PhotonRecords(
        rows=np.concatenate([first[keep1, 0], second[keep2, 0]]),
        cols=np.concatenate([first[keep1, 1], second[keep2, 1]]),
        origin=np.concatenate([tag[keep1], tag[keep2]]),
    )

def sample_classical(source: ClassicalSource, mask: ObjectMask, rng: np.random.Generator) -> PhotonRecords:
    check_grid("classical source", mask.shape, source.mean_intensity.shape)
    counts = rng.poisson(source.mean_intensity * mask.transmission).ravel()
    lit = np.flatnonzero(counts)
    flat = np.repeat(lit, counts[lit])
    width = mask.width
    return PhotonRecords(
        rows=(flat // width).astype(np.int64),
        cols=(flat % width).astype(np.int64),
        origin=np.full(len(flat), Origin.CLASSICAL, dtype=np.uint8),
    )

def render_frame_counts(records: PhotonRecords, shape: tuple[int, int]) -> np.ndarray:
    height, width = shape
    if len(records) == 0:
        return np.zeros(shape, dtype=np.int64)
    if (records.rows.min() < 0 or records.rows.max() >= height
            or records.cols.min() < 0 or records.cols.max() >= width):
        raise ValueError("photon record outside the sensor grid")
    flat = records.rows * width + records.cols
    return np.bincount(flat, minlength=height * width).reshape(shape)

def sample_frame(scene: SceneConfig, pixel_pitch_um: float, rng: np.random.Generator) -> PhotonRecords:
    """All photons reaching the sensor in one frame."""
    parts = []
    if scene.pair is not None:
        first, second = sample_pairs(scene.pair, scene.shape, pixel_pitch_um, rng)
        parts.append(transmit_pair(first, second, scene.pair_mask, rng))
    if scene.classical is not None:
        parts.append(sample_classical(scene.classical, scene.classical_mask, rng))
    return PhotonRecords.concat(*parts)

def expected_photon_image(scene: SceneConfig) -> np.ndarray:
    """Mean photons per pixel per frame, neglecting partner loss at mask edges."""
    image = np.zeros(scene.shape)
    if scene.pair is not None:
        marginal = scene.pair.marginal(scene.height, scene.width)
        image += 2.0 * scene.pair.mean_pair_rate * marginal * scene.pair_mask.transmission
    if scene.classical is not None:
        image += scene.classical.mean_intensity * scene.classical_mask.transmission
    return image
