"""Markdown output formatters."""
from __future__ import annotations
import math
from pathlib import Path

from qdistill import __version__
from qdistill.camera import SimulationSummary
from qdistill.models import CorrelationResult, DistillationResult, SnrMeasurement
from qdistill.snr import SweepResult

def _frontmatter(type_: str, **extra) -> str:
    lines = ["---", f"type: {type_}"]
    for k, v in extra.items():
        lines.append(f"{k}: {v}")
    lines.extend([f"source: qdistill v{__version__}", "---"])
    return "\n".join(lines)

def _num(value: float, digits: int = 6) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return f"{value:.{digits}g}"

def _files(paths: list[Path]) -> list[str]:
    return [f"- `{p.name}`" for p in paths]

def format_simulation(summary: SimulationSummary, out_path: Path) -> str:
    fm = _frontmatter("qdistill-simulation", frames=summary.n_frames, grid=f"{summary.width}x{summary.height}")
    lines = [
        fm, "",
        f"# Simulated stack: {out_path.name}", "",
        f"**Frames**: {summary.n_frames:,}",
        f"**Grid**: {summary.width} x {summary.height}",
        f"**Mean gray level**: {_num(summary.mean_gray_level)}",
    ]
    if summary.clamped is not None:
        lines.append(f"**Clamped pixels**: {summary.clamped}")
    if summary.at_bounds is not None:
        lines.append(f"**Pixels at ADC bounds**: {summary.at_bounds}")
    return "\n".join(lines) + "\n"

def format_correlation(res: CorrelationResult, out_path: Path | None = None,
                       snr: SnrMeasurement | None = None) -> str:
    fm = _frontmatter("qdistill-correlation", frames=res.n_frames, window=res.window_radius,
                      estimator=res.estimator)
    title = out_path.name if out_path else "correlation"
    lines = [
        fm, "",
        f"# Correlation: {title}", "",
        f"**Frames**: {res.n_frames:,}",
        f"**Grid**: {res.width} x {res.height}",
        f"**Window radius**: {res.window_radius}",
        f"**Estimator**: {res.estimator}",
        f"**Mean gray level**: {_num(float(res.marginal.mean()))}",
        f"**Diagonal mean**: {_num(float(res.diagonal.mean()))}",
    ]
    if res.source_hash:
        lines.append(f"**Source SHA-256**: {res.source_hash}")
    if snr is not None:
        lines.append(f"**Minus-projection SNR**: {_num(snr.snr, 4)} "
                     f"(peak {_num(snr.peak, 4)}, noise std {_num(snr.noise_std, 4)})")
    return "\n".join(lines) + "\n"

def format_distillation(result: DistillationResult, written: list[Path], title: str | None = None) -> str:
    flags = ", ".join(result.flags) or "none"
    fm = _frontmatter("qdistill-distillation", flags=flags)
    lines = [
        fm, "",
        f"# Distillation: {title}" if title else "# Distillation", "",
        f"**Subtraction scale c**: {_num(result.classical.scale)}",
        f"**Calibration pixels**: {result.classical.calibration_pixels}",
        f"**Quantum signal z-score**: {_num(result.quantum.z_score, 4)}",
        f"**Flags**: {flags}",
    ]
    if result.scores:
        lines.append("\n## Ground-truth scores\n")
        lines.append("| Score | Value |")
        lines.append("|-------|-------|")
        for name in sorted(result.scores):
            lines.append(f"| {name} | {_num(result.scores[name], 4)} |")
    if written:
        lines.append("\n## Images\n")
        lines.extend(_files(written))
    return "\n".join(lines) + "\n"

def format_sweep(sweep: SweepResult) -> str:
    fm = _frontmatter("qdistill-snr-sweep", points=len(sweep.points))
    lines = [fm, "", "# SNR sweep\n"]
    lines.append("| I_cl/I_qu | SNR | I_qu (gl) | I_cl (gl) | N |")
    lines.append("|-----------|-----|-----------|-----------|---|")
    for p in sweep.points:
        lines.append(f"| {_num(p.ratio, 4)} | {_num(p.measured_snr, 4)} | {_num(p.quantum_level, 4)} "
                     f"| {_num(p.classical_level, 4)} | {p.n_frames} |")
    fit = sweep.fit
    if fit is None:
        lines.append(f"\n**Fit**: not attempted ({sweep.reason})")
    else:
        lines.extend([
            "\n## Model fit\n",
            f"**alpha**: {_num(fit.alpha, 5)} ± {_num(fit.alpha_err, 2)}",
            f"**beta**: {_num(fit.beta, 5)} ± {_num(fit.beta_err, 2)}",
            f"**R²**: {_num(fit.r_squared, 5)}",
            f"**Fixed**: eta = {_num(fit.quantum_efficiency)}, sigma0 = {_num(fit.noise_std)} gl, "
            f"mu0 = {_num(fit.noise_mean)} gl",
            f"**Converged**: {'yes' if fit.converged else 'no'}",
        ])
        if fit.diagnostics:
            lines.append(f"**Diagnostics**: {fit.diagnostics}")
    return "\n".join(lines) + "\n"

def format_report(sections: list[str], exported: list[Path]) -> str:
    fm = _frontmatter("qdistill-report", artifacts=len(sections))
    lines = [fm, "", "# Report", ""]
    for section in sections:
        # drop the per-artifact frontmatter, keep the body
        body = section.split("---\n", 2)[-1].strip()
        lines.extend("#" + line if line.startswith("#") else line for line in body.splitlines())
        lines.append("")
    if exported:
        lines.append("## Exports\n")
        lines.extend(_files(exported))
    return "\n".join(lines) + "\n"
