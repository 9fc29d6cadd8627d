"""Collect existing artifacts into one markdown report with image exports."""
from __future__ import annotations
import logging
import math
from pathlib import Path

import numpy as np

from qdistill.camera import SimulationSummary
from qdistill.commands.sweep import read_points
from qdistill.config import DistillConfig
from qdistill.container import MAGIC as QDCR_MAGIC, read_result
from qdistill.correlator import minus_projection
from qdistill.distill import direct_intensity, distill
from qdistill.formatters.markdown import (
    format_correlation, format_distillation, format_report, format_simulation, format_sweep,
)
from qdistill.images import export_image
from qdistill.models import CameraModel, CorrelationResult
from qdistill.qdif import MAGIC as QDIF_MAGIC, QdifReader
from qdistill.snr import FitError, SweepResult, fit_model, measure_snr

logger = logging.getLogger(__name__)

def _magic(path: Path) -> bytes:
    with open(path, "rb") as f:
        return f.read(4)

def stack_section(reader: QdifReader) -> str:
    mean = direct_intensity(reader.chunks(), 0.0)
    at_bounds = 0
    for chunk in reader.chunks():
        at_bounds += int(np.count_nonzero((chunk == 0) | (chunk == np.iinfo(np.uint16).max)))
    # a stored stack only shows how many samples sit at 0 or 65535, not how many were clipped
    summary = SimulationSummary(n_frames=reader.n_frames, width=reader.width, height=reader.height,
                                mean_image=mean, clamped=None, at_bounds=at_bounds)
    return format_simulation(summary, reader.path)

def distill_section(
    res: CorrelationResult, reader: QdifReader, stem: str, out_dir: Path, camera: CameraModel,
    settings: DistillConfig,
) -> tuple[str, list[Path]]:
    """Direct, quantum and classical images of a container whose source stack is also being reported."""
    direct = direct_intensity(reader.chunks(), camera.noise_mean)
    result = distill(res, direct, quantile=settings.calibration_quantile,
                     signal_threshold=settings.signal_threshold)
    exported = []
    for name, image in (("direct", result.direct), ("quantum", result.quantum.image),
                        ("classical", result.classical.image)):
        exported += export_image(out_dir / f"{stem}_{name}", image)
    return format_distillation(result, [], title=reader.path.name), exported

def correlation_section(path: Path, res: CorrelationResult, out_dir: Path) -> tuple[str, list[Path]]:
    projection = minus_projection(res)
    try:
        snr = measure_snr(projection)
    except ValueError as e:
        logger.info("%s: SNR not measured (%s)", path.name, e)
        snr = None
    stem = _stem(path)
    exported = []
    exported += export_image(out_dir / f"{stem}_diagonal", res.diagonal)
    exported += export_image(out_dir / f"{stem}_marginal", res.marginal)
    exported += export_image(out_dir / f"{stem}_minus", projection.values)
    return format_correlation(res, path, snr), exported

def sweep_section(path: Path, camera: CameraModel) -> str:
    points = read_points(path)
    sweep = SweepResult(points=points, projections=[])
    finite = [p for p in points if math.isfinite(p.measured_snr)]
    try:
        sweep.fit = fit_model(finite, camera.quantum_efficiency, camera.noise_std, camera.noise_mean)
    except FitError as e:
        sweep.reason = str(e)
    return format_sweep(sweep)

def _stem(path: Path) -> str:
    return path.stem.replace(".", "_")

def build_report(
    paths: list[Path], out_dir: Path, camera: CameraModel | None = None, settings: DistillConfig | None = None,
) -> tuple[str, list[Path]]:
    """Markdown report over stacks (.qdif), correlation containers (.qdcr) and sweep tables (.csv).

    A container reported together with the stack it was correlated from (matched by
    SHA-256) is also distilled into `<stem>_direct`, `<stem>_quantum` and `<stem>_classical`.
    """
    if not paths:
        raise ValueError("no artifacts to report on")
    missing = [str(p) for p in paths if not Path(p).is_file()]
    if missing:
        raise FileNotFoundError(f"missing inputs: {', '.join(missing)}")
    camera = camera or CameraModel()
    settings = settings or DistillConfig()
    out_dir.mkdir(parents=True, exist_ok=True)

    kinds: dict[Path, QdifReader | CorrelationResult | None] = {}
    stacks: dict[str, QdifReader] = {}
    for path in map(Path, paths):
        magic = _magic(path)
        if magic == QDIF_MAGIC:
            reader = QdifReader(path)
            stacks.setdefault(reader.sha256, reader)
            kinds[path] = reader
        elif magic == QDCR_MAGIC:
            kinds[path] = read_result(path)
        elif path.suffix.lower() == ".csv":
            kinds[path] = None
        else:
            raise ValueError(f"{path}: not a QDIF stack, QDCR container or SNR table")

    sections = []
    exported: list[Path] = []
    for path in map(Path, paths):
        artifact = kinds[path]
        if isinstance(artifact, QdifReader):
            sections.append(stack_section(artifact))
        elif isinstance(artifact, CorrelationResult):
            section, files = correlation_section(path, artifact, out_dir)
            sections.append(section)
            exported.extend(files)
            source = stacks.get(artifact.source_hash)
            if source is not None and source.shape == artifact.shape:
                section, files = distill_section(artifact, source, _stem(path), out_dir, camera, settings)
                sections.append(section)
                exported.extend(files)
        else:
            sections.append(sweep_section(path, camera))
    report = format_report(sections, exported)
    (out_dir / "report.md").write_text(report)
    return report, exported
