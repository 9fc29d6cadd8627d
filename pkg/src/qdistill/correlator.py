"""Streaming estimation of the intensity-correlation function Gamma(r1, r2).

Gamma(r, r+d) = <I(r) I(r+d)> - <I(r)><I(r+d)> is estimated for every pixel r and every
offset d with |d|_inf <= w. The first term averages same-frame products; the second
averages products between successive frames, which carry only accidental coincidences.
Sums are exact 64-bit integers so the result does not depend on chunking or thread count.
"""
from __future__ import annotations
import logging
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from qdistill.models import (
    ESTIMATORS, AccumulatorSet, CameraModel, ConditionalImage, CorrelationResult, MinusCoordinateMap,
)
from qdistill.qdif import CorruptStackError

logger = logging.getLogger(__name__)

FULL_MODE_LIMIT = 32
# Gamma(r, r) is read from the left neighbour, d = (-1, 0)
DIAGONAL_OFFSET = (-1, 0)

def _overlap(offset: int, size: int) -> tuple[slice, slice]:
    """Slices (of r, of r + offset) along one axis where both lie on the grid."""
    offset = max(-size, min(size, offset))
    if offset >= 0:
        return slice(0, size - offset), slice(offset, size)
    return slice(-offset, size), slice(0, size + offset)

def _shift(image: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """out[y, x] = image[y + dy, x + dx], zero where that leaves the grid."""
    out = np.zeros_like(image)
    ys, ys_shift = _overlap(dy, image.shape[0])
    xs, xs_shift = _overlap(dx, image.shape[1])
    out[ys, xs] = image[ys_shift, xs_shift]
    return out

def _offsets(w: int):
    for dy in range(-w, w + 1):
        for dx in range(-w, w + 1):
            yield dx, dy

def _mirror(window: np.ndarray, w: int) -> np.ndarray:
    """Re-index S(r, d) as S(r + d, -d)."""
    out = np.zeros_like(window)
    for dx, dy in _offsets(w):
        out[dy + w, dx + w] = _shift(window[w - dy, w - dx], dx, dy)
    return out

def _valid(shape: tuple[int, int], w: int) -> np.ndarray:
    k = 2 * w + 1
    valid = np.zeros((k, k) + shape, dtype=bool)
    for dx, dy in _offsets(w):
        ys, _ = _overlap(dy, shape[0])
        xs, _ = _overlap(dx, shape[1])
        valid[dy + w, dx + w, ys, xs] = True
    return valid

class Correlator:
    """Single-pass accumulator fed with (frames, height, width) chunks in acquisition order.

    Pixel rows are split into blocks, one per thread; each block owns the accumulator
    rows of its pixels and sees every frame pair in order.
    """

    def __init__(self, height: int, width: int, window_radius: int = 5, threads: int = 1):
        if window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        self.height = height
        self.width = width
        self.window_radius = window_radius
        self.threads = max(1, threads)
        k = 2 * window_radius + 1
        self.s_same = np.zeros((k, k, height, width), dtype=np.int64)
        self.s_succ = np.zeros((k, k, height, width), dtype=np.int64)
        self.s_mean = np.zeros((height, width), dtype=np.int64)
        self.frames_seen = 0
        self._previous: np.ndarray | None = None
        self._pool: ThreadPoolExecutor | None = None
        bounds = np.linspace(0, height, min(self.threads, height) + 1).astype(int)
        self._blocks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    @classmethod
    def full(cls, height: int, width: int, threads: int = 1) -> Correlator:
        """Window covering every pixel pair; only for small grids."""
        if height > FULL_MODE_LIMIT or width > FULL_MODE_LIMIT:
            raise ValueError(f"full correlation mode is limited to {FULL_MODE_LIMIT}x{FULL_MODE_LIMIT} grids")
        return cls(height, width, max(height, width, 2) - 1, threads)

    def update(self, frames: np.ndarray) -> None:
        frames = np.asarray(frames)
        if frames.ndim == 2:
            frames = frames[None]
        if frames.shape[1:] != (self.height, self.width):
            raise CorruptStackError(
                f"frame size {frames.shape[2]}x{frames.shape[1]} differs from {self.width}x{self.height}",
                frame_index=self.frames_seen,
            )
        if not len(frames):
            return
        data = frames.astype(np.int64)
        if self._previous is None:
            earlier, later = data[:-1], data[1:]
        else:
            earlier = np.concatenate([self._previous[None], data[:-1]])
            later = data

        if self.threads > 1 and len(self._blocks) > 1:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=len(self._blocks))
            list(self._pool.map(lambda block: self._accumulate(data, earlier, later, *block), self._blocks))
        else:
            for block in self._blocks:
                self._accumulate(data, earlier, later, *block)

        self.s_mean += data.sum(axis=0)
        self._previous = data[-1].copy()
        self.frames_seen += len(data)

    def _accumulate(self, data: np.ndarray, earlier: np.ndarray, later: np.ndarray, y0: int, y1: int) -> None:
        w = self.window_radius
        for dx, dy in _offsets(w):
            lo = max(y0, -dy)
            hi = min(y1, self.height - dy)
            if hi <= lo:
                continue
            xs, xs_partner = _overlap(dx, self.width)
            rows = slice(lo, hi)
            partner_rows = slice(lo + dy, hi + dy)
            idx = (dy + w, dx + w, rows, xs)
            self.s_same[idx] += np.einsum("lyx,lyx->yx", data[:, rows, xs], data[:, partner_rows, xs_partner])
            if len(earlier):
                self.s_succ[idx] += np.einsum(
                    "lyx,lyx->yx", earlier[:, rows, xs], later[:, partner_rows, xs_partner],
                )

    def close(self) -> None:
        """Release the worker threads; a later update starts new ones."""
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self) -> Correlator:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def accumulators(self) -> AccumulatorSet:
        return AccumulatorSet(
            s_same=self.s_same, s_succ=self.s_succ, s_mean=self.s_mean,
            frames_seen=self.frames_seen, window_radius=self.window_radius,
        )

def accumulate(
    chunks: Iterable[np.ndarray], window_radius: int = 5, threads: int = 1, full: bool = False,
) -> AccumulatorSet:
    """Stream frame chunks once into an AccumulatorSet."""
    correlator = None
    try:
        for chunk in chunks:
            chunk = np.asarray(chunk)
            if chunk.ndim == 2:
                chunk = chunk[None]
            if correlator is None:
                height, width = chunk.shape[1:]
                correlator = (Correlator.full(height, width, threads) if full
                              else Correlator(height, width, window_radius, threads))
            correlator.update(chunk)
    finally:
        if correlator is not None:
            correlator.close()
    if correlator is None:
        raise ValueError("no frames to correlate")
    logger.debug("accumulated %d frames, window radius %d", correlator.frames_seen, correlator.window_radius)
    return correlator.accumulators()

def finalize_gamma(acc: AccumulatorSet, estimator: str = "successive", source_hash: str = "") -> CorrelationResult:
    """Turn integer sums into Gamma.

    successive:  S_same/N - (S_succ(r, d) + S_succ(r + d, -d)) / (2 (N - 1))
    global-mean: S_same/N - S_mean(r) S_mean(r + d) / N^2
    """
    n = acc.frames_seen
    if n < 2:
        raise ValueError("Gamma needs at least 2 frames")
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    w = acc.window_radius
    same = acc.s_same.astype(np.float64) / n

    if estimator == "successive":
        symmetric = acc.s_succ + _mirror(acc.s_succ, w)
        accidental = symmetric.astype(np.float64) / (2.0 * (n - 1))
    else:
        mean = acc.s_mean.astype(np.float64) / n
        accidental = np.empty_like(same)
        for dx, dy in _offsets(w):
            accidental[dy + w, dx + w] = mean * _shift(mean, dx, dy)

    gamma = np.where(_valid(acc.shape, w), same - accidental, 0.0)
    return CorrelationResult(
        gamma=gamma,
        diagonal=diagonal_image(gamma, w),
        marginal=acc.s_mean.astype(np.float64) / n,
        n_frames=n,
        window_radius=w,
        estimator=estimator,
        source_hash=source_hash,
    )

def diagonal_image(gamma: np.ndarray, w: int) -> np.ndarray:
    """Gamma(r, r) ~ Gamma(r, r - e_x); the first column, having no left neighbour, uses r + e_x."""
    dx, dy = DIAGONAL_OFFSET
    diagonal = gamma[dy + w, dx + w].copy()
    if diagonal.shape[1] > 1:
        diagonal[:, 0] = gamma[dy + w, w - dx, :, 0]
    return diagonal

def correlate(
    chunks: Iterable[np.ndarray], window_radius: int = 5, threads: int = 1,
    estimator: str = "successive", full: bool = False,
) -> CorrelationResult:
    return finalize_gamma(accumulate(chunks, window_radius, threads, full), estimator)

def conditional_projection(res: CorrelationResult, anchor: tuple[int, int]) -> ConditionalImage:
    """Gamma(r | A) over the window around A = (x, y), normalized to unit sum when possible."""
    ax, ay = anchor
    if not (0 <= ax < res.width and 0 <= ay < res.height):
        raise ValueError(f"anchor {anchor} outside the {res.width}x{res.height} grid")
    w = res.window_radius
    image = np.zeros(res.shape)
    for dx, dy in _offsets(w):
        x, y = ax + dx, ay + dy
        if 0 <= x < res.width and 0 <= y < res.height:
            image[y, x] = res.gamma[dy + w, dx + w, ay, ax]
    image[ay, ax] = res.diagonal[ay, ax]

    total = image.sum()
    if total <= 0:
        return ConditionalImage(image=image, anchor=(ax, ay), normalizable=False)
    return ConditionalImage(image=image / total, anchor=(ax, ay))

def minus_projection(res: CorrelationResult) -> MinusCoordinateMap:
    """P-(d) = sum_r Gamma(r, r + d) over pixels whose partner stays on the grid.

    The d = 0 entry follows the diagonal rule instead of the biased same-pixel estimate.
    """
    w = res.window_radius
    values = res.gamma.sum(axis=(2, 3))
    values[w, w] = res.diagonal.sum()
    return MinusCoordinateMap(values=values, window_radius=w)

def joint_probability(res: CorrelationResult, camera: CameraModel, pair_rate: float) -> np.ndarray:
    """|phi(r, r + d)|^2 = Gamma / (4 A^2 m eta^2)."""
    scale = 4.0 * camera.amplification ** 2 * pair_rate * camera.quantum_efficiency ** 2
    return res.gamma / scale

def marginal_probability(res: CorrelationResult, camera: CameraModel, pair_rate: float) -> np.ndarray:
    """P_m(r) = (<I(r)> - x0) / (2 A m eta)."""
    scale = 2.0 * camera.amplification * pair_rate * camera.quantum_efficiency
    return (res.marginal - camera.noise_mean) / scale
