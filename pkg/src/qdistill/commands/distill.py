"""Distill quantum and classical images from a correlation container and its stack."""
from __future__ import annotations
import logging
from pathlib import Path

import numpy as np

from qdistill.container import read_result
from qdistill.distill import direct_intensity, distill
from qdistill.images import export_image, read_csv, read_pgm
from qdistill.models import DistillationResult, ObjectMask, check_grid
from qdistill.qdif import QdifReader

logger = logging.getLogger(__name__)

OUTPUTS = ("direct", "quantum", "object", "classical", "residual")

def load_image(path: Path) -> np.ndarray:
    """Raw values from CSV, or PGM samples as stored."""
    if path.suffix.lower() == ".csv":
        return read_csv(path)
    image, _ = read_pgm(path)
    return image.astype(np.float64)

def load_mask(path: Path) -> ObjectMask:
    image, maxval = read_pgm(path)
    return ObjectMask.from_intensity(image.astype(np.float64) / maxval)

def run_distill(
    corr_path: Path, stack_path: Path, out_dir: Path, noise_mean: float,
    classical_truth: Path | None = None, object_truth: Path | None = None,
    quantile: float = 0.75, signal_threshold: float = 5.0,
) -> tuple[DistillationResult, list[Path]]:
    res = read_result(corr_path)
    reader = QdifReader(stack_path)
    check_grid("stack", res.shape, reader.shape)
    direct = direct_intensity(reader.chunks(), noise_mean)
    if res.source_hash and res.source_hash != reader.sha256:
        logger.warning("%s was not correlated from %s (hash mismatch)", corr_path, stack_path)

    truth = load_image(classical_truth) if classical_truth else None
    mask = load_mask(object_truth) if object_truth else None
    result = distill(res, direct, truth, mask, quantile, signal_threshold)

    out_dir.mkdir(parents=True, exist_ok=True)
    images = {
        "direct": result.direct,
        "quantum": result.quantum.image,
        "object": result.quantum.object_estimate,
        "classical": result.classical.image,
        "residual": result.residual,
    }
    written = []
    for name in OUTPUTS:
        if images[name] is not None:
            written.extend(export_image(out_dir / name, images[name]))
    return result, written
