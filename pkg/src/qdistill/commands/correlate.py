"""Correlate a QDIF stack into a QDCR container."""
from __future__ import annotations
import logging
from pathlib import Path

from qdistill.container import read_result, write_result
from qdistill.correlator import accumulate, conditional_projection, finalize_gamma
from qdistill.images import export_image
from qdistill.models import ConditionalImage, CorrelationResult
from qdistill.qdif import CorruptStackError, QdifReader

logger = logging.getLogger(__name__)

def run_correlate(
    stack_path: Path, out_path: Path, window_radius: int = 5, threads: int = 1,
    estimator: str = "successive", full: bool = False, chunk_frames: int = 256,
) -> CorrelationResult:
    reader = QdifReader(stack_path)
    if reader.n_frames < 2:
        raise CorruptStackError(f"{stack_path}: correlation needs at least 2 frames", frame_index=reader.n_frames)
    acc = accumulate(reader.chunks(chunk_frames), window_radius, threads, full)
    res = finalize_gamma(acc, estimator, source_hash=reader.sha256)
    write_result(out_path, res)
    logger.info("wrote correlation of %d frames to %s", res.n_frames, out_path)
    return res

def run_conditional(corr_path: Path, anchor: tuple[int, int], out_base: Path) -> tuple[ConditionalImage, list[Path]]:
    res = read_result(corr_path)
    image = conditional_projection(res, anchor)
    return image, export_image(out_base, image.image)
