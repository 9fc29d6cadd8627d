"""Simulate a frame stack to a QDIF file."""
from __future__ import annotations
import logging
from pathlib import Path

from qdistill.camera import SimulationSummary, simulate_stack
from qdistill.config import ExperimentConfig
from qdistill.qdif import QdifWriter

logger = logging.getLogger(__name__)

def run_simulate(
    config: ExperimentConfig, out_path: Path,
    frames: int | None = None, seed: int | None = None, threads: int | None = None,
) -> SimulationSummary:
    scene, camera, run = config.scene, config.camera, config.run
    n_frames = run.frames if frames is None else frames
    if n_frames < 2:
        raise ValueError("a stack needs at least 2 frames")
    writer = QdifWriter(out_path, scene.width, scene.height, camera.exposure_ms)
    try:
        summary = simulate_stack(
            scene, camera, n_frames,
            seed=run.seed if seed is None else seed,
            sink=writer,
            chunk_frames=run.chunk_frames,
            threads=run.threads if threads is None else threads,
        )
    except BaseException:
        writer.close()
        out_path.unlink(missing_ok=True)
        raise
    writer.close()
    logger.info("wrote %d frames to %s", summary.n_frames, out_path)
    return summary
