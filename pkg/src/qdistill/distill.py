"""Separating the pair-illuminated object from the classical one.

The quantum image is the Gamma diagonal (proportional to |O1|^4); the classical image is
what remains of the direct image after subtracting the quantum arm's intensity footprint,
c * sqrt(Q), with c fitted on the brightest quarter of Q and robust to classical light
overlapping it there.
"""
from __future__ import annotations
import logging
from collections.abc import Iterable

import numpy as np
from scipy import ndimage, stats

from qdistill.models import (
    ClassicalImage, CorrelationResult, DistillationResult, ObjectMask, QuantumImage, check_grid,
)

logger = logging.getLogger(__name__)

def direct_intensity(chunks: Iterable[np.ndarray], noise_mean: float) -> np.ndarray:
    """Mean frame minus the camera noise floor x0."""
    total = None
    n = 0
    for chunk in chunks:
        chunk = np.asarray(chunk)
        if chunk.ndim == 2:
            chunk = chunk[None]
        part = chunk.sum(axis=0, dtype=np.int64)
        total = part if total is None else total + part
        n += len(chunk)
    if not n:
        raise ValueError("direct intensity needs at least one frame")
    return total / n - noise_mean

def quantum_image(res: CorrelationResult, signal_threshold: float = 5.0) -> QuantumImage:
    """Q = Gamma(r, r) and the normalized object estimate (max(Q, 0) / max Q)^(1/4).

    A quantum signal is declared when the spatial mean of Q sits more than
    `signal_threshold` standard errors above zero.
    """
    q = res.diagonal.copy()
    n = q.size
    spread = q.std(ddof=1) if n > 1 else 0.0
    mean = float(q.mean())
    if spread > 0:
        z = mean / (spread / np.sqrt(n))
    else:
        z = np.inf if mean > 0 else 0.0
    peak = q.max()
    no_signal = bool(peak <= 0 or z < signal_threshold)

    estimate = np.zeros_like(q)
    if peak > 0:
        estimate = (np.maximum(q, 0.0) / peak) ** 0.25
    if no_signal:
        logger.info("no quantum signal in Gamma diagonal (z = %.2f)", z)
    return QuantumImage(image=q, object_estimate=estimate, z_score=float(z), no_quantum_signal=no_signal)

def subtraction_scale(direct: np.ndarray, footprint: np.ndarray) -> tuple[float, int]:
    """Scale c of D = c * s over pixels free of classical light. Returns (c, pixels used).

    Classical light only adds to D, so pixels where it overlaps the quantum object form
    a second, wider cluster of ratios D / s above the clean one. The clean cluster is
    found as the narrowest interval holding a quarter of the ratios; c is the least
    squares fit over the pixels inside that interval widened to twice its width.
    Needs a quarter or more of the calibration pixels to be free of classical light.
    """
    ratios = direct / footprint
    ordered = np.sort(ratios)
    n = len(ordered)
    h = n // 4 + 1
    start = int(np.argmin(ordered[h - 1:] - ordered[: n - h + 1]))
    lo, hi = ordered[start], ordered[start + h - 1]
    margin = (hi - lo) / 2
    inliers = (ratios >= lo - margin) & (ratios <= hi + margin)
    s = footprint[inliers]
    return float(np.dot(direct[inliers], s) / np.dot(s, s)), int(inliers.sum())

def classical_image(
    direct: np.ndarray, quantum: np.ndarray, quantile: float = 0.75, no_quantum_signal: bool = False,
) -> ClassicalImage:
    """C = D - c sqrt(max(Q, 0)), c fitted on pixels with Q in its top quantile."""
    check_grid("quantum image", direct.shape, quantum.shape)
    footprint = np.sqrt(np.maximum(quantum, 0.0))
    if no_quantum_signal:
        return ClassicalImage(image=direct.copy(), scale=0.0, calibrated=False)

    calibration = (quantum >= np.quantile(quantum, quantile)) & (quantum > 0)
    if not calibration.any():
        return ClassicalImage(image=direct.copy(), scale=0.0, calibrated=False)
    pixels = int(calibration.sum())
    scale, used = subtraction_scale(direct[calibration], footprint[calibration])
    logger.debug("subtraction scale %.6g from %d of %d pixels", scale, used, pixels)
    return ClassicalImage(image=direct - scale * footprint, scale=scale, calibration_pixels=pixels)

def residual_map(classical: np.ndarray, ground_truth: np.ndarray) -> np.ndarray:
    """R = C - G; single survivors of absorbed pairs come out positive."""
    check_grid("classical ground truth", classical.shape, ground_truth.shape)
    return classical - ground_truth

def distill(
    res: CorrelationResult,
    direct: np.ndarray,
    classical_truth: np.ndarray | None = None,
    object_truth: ObjectMask | None = None,
    quantile: float = 0.75,
    signal_threshold: float = 5.0,
) -> DistillationResult:
    check_grid("direct image", res.shape, direct.shape)
    quantum = quantum_image(res, signal_threshold)
    classical = classical_image(direct, quantum.image, quantile, quantum.no_quantum_signal)
    result = DistillationResult(direct=direct, quantum=quantum, classical=classical)
    if classical_truth is not None:
        result.residual = residual_map(classical.image, classical_truth)
        result.scores["classical_pearson"] = pearson(classical.image, classical_truth)
    if object_truth is not None:
        check_grid("object ground truth", res.shape, object_truth.shape)
        result.scores["quantum_pearson"] = pearson(quantum.image, object_truth.t ** 4)
    if classical_truth is not None and object_truth is not None:
        # single survivors of pairs cut by the object edge are not classical light
        off_edges = edge_distance(object_truth) > 2.0
        result.scores["classical_pearson_off_edges"] = pearson(classical.image, classical_truth, off_edges)
        result.scores["residual_edge_fraction"] = residual_edge_fraction(result.residual, object_truth)
        result.scores["residual_edge_thickness"] = residual_edge_thickness(result.residual, object_truth)
    return result

# --- Scoring ---

def pearson(a: np.ndarray, b: np.ndarray, where: np.ndarray | None = None) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if where is not None:
        a, b = a[where], b[where]
    a, b = a.ravel(), b.ravel()
    if a.size < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(stats.pearsonr(a, b)[0])

def edge_distance(mask: ObjectMask, threshold: float = 0.5) -> np.ndarray:
    """Distance in pixels from each pixel to the nearest pixel across a transmission edge."""
    inside = mask.transmission >= threshold
    if inside.all() or not inside.any():
        return np.full(mask.shape, np.inf)
    return np.where(inside, ndimage.distance_transform_edt(inside), ndimage.distance_transform_edt(~inside))

def residual_edge_fraction(residual: np.ndarray, mask: ObjectMask, within: float = 2.0) -> float:
    """Share of positive residual mass lying within `within` pixels of a mask edge."""
    mass = np.maximum(residual, 0.0)
    total = mass.sum()
    if total == 0:
        return 0.0
    return float(mass[edge_distance(mask) <= within].sum() / total)

def residual_edge_thickness(residual: np.ndarray, mask: ObjectMask) -> float:
    """Residual-mass-weighted mean distance to the nearest edge."""
    mass = np.maximum(residual, 0.0)
    distance = edge_distance(mask)
    finite = np.isfinite(distance)
    total = mass[finite].sum()
    if total == 0:
        return 0.0
    return float((mass[finite] * distance[finite]).sum() / total)
