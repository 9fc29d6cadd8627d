"""SNR sweep over classical/quantum illumination ratios."""
from __future__ import annotations
import csv
import logging
from pathlib import Path

from qdistill.config import ExperimentConfig
from qdistill.images import export_image
from qdistill.models import SnrPoint
from qdistill.snr import SweepResult, snr_sweep

logger = logging.getLogger(__name__)

CSV_FIELDS = ("ratio", "measured_snr", "quantum_level", "classical_level", "n_frames")

def parse_ratios(text: str) -> list[float]:
    ratios = [float(part) for part in text.replace(" ", "").split(",") if part]
    if not ratios:
        raise ValueError("no ratios given")
    return ratios

def write_points(path: Path, points: list[SnrPoint]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for p in points:
            writer.writerow([repr(p.ratio), repr(p.measured_snr), repr(p.quantum_level),
                             repr(p.classical_level), p.n_frames])

def read_points(path: Path) -> list[SnrPoint]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ValueError(f"{path}: not an SNR point table")
        return [
            SnrPoint(ratio=float(row["ratio"]), measured_snr=float(row["measured_snr"]),
                     quantum_level=float(row["quantum_level"]), classical_level=float(row["classical_level"]),
                     n_frames=int(row["n_frames"]))
            for row in reader
        ]

def run_sweep(
    config: ExperimentConfig, out_path: Path, ratios: list[float] | None = None,
    frames: int | None = None, seed: int | None = None, threads: int | None = None,
) -> tuple[SweepResult, list[Path]]:
    result = snr_sweep(
        config.snr, config.camera,
        ratios=config.snr.ratios if ratios is None else ratios,
        n_frames=config.run.frames if frames is None else frames,
        seed=config.run.seed if seed is None else seed,
        threads=config.run.threads if threads is None else threads,
    )
    write_points(out_path, result.points)
    written = [out_path]
    for i, projection in enumerate(result.projections):
        written.extend(export_image(out_path.with_name(f"{out_path.stem}_minus{i}"), projection.values))
    return result, written
