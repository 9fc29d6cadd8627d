"""CLI entry point for qdistill."""
from __future__ import annotations
import logging
from pathlib import Path

import click

from qdistill import __version__
from qdistill.config import ConfigError, ExperimentConfig
from qdistill.container import ContainerError
from qdistill.formatters.json_fmt import format_json
from qdistill.formatters.markdown import format_correlation, format_distillation, format_simulation, format_sweep
from qdistill.images import ImageFormatError
from qdistill.models import ESTIMATORS, GridMismatchError
from qdistill.qdif import CorruptStackError
from qdistill.snr import FitError, ModelDomainError

USAGE_EXIT = 1
DATA_EXIT = 2

DATA_ERRORS = (
    ConfigError, ContainerError, CorruptStackError, GridMismatchError, ImageFormatError,
    ModelDomainError, FitError, OSError, ValueError,
)

def _usage_exit(e: click.UsageError) -> click.UsageError:
    e.exit_code = USAGE_EXIT
    return e

class QdistillCommand(click.Command):
    def make_context(self, *args, **kwargs):
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as e:
            raise _usage_exit(e)

class QdistillGroup(click.Group):
    command_class = QdistillCommand

    def make_context(self, *args, **kwargs):
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as e:
            raise _usage_exit(e)

    def resolve_command(self, ctx, args):
        try:
            return super().resolve_command(ctx, args)
        except click.UsageError as e:
            raise _usage_exit(e)

def _fail(e: Exception):
    click.echo(f"Error: {e}", err=True)
    raise SystemExit(DATA_EXIT)

def _load_config(path: Path | None) -> ExperimentConfig:
    return ExperimentConfig.from_file(path) if path else ExperimentConfig()

def _output(ctx, summary: dict, markdown: str):
    """Markdown to stdout, or the JSON summary with --json."""
    click.echo(format_json(summary) if ctx.obj["json"] else markdown)

@click.group(cls=QdistillGroup)
@click.version_option(__version__, prog_name="qdistill")
@click.option("--json", "as_json", is_flag=True, help="Print a JSON summary instead of markdown")
@click.option("-v", "--verbose", count=True, help="Log progress (-vv for debug)")
@click.pass_context
def main(ctx, as_json, verbose):
    """qdistill: distill quantum and classical images from EMCCD frame stacks."""
    ctx.ensure_object(dict)
    ctx.obj["json"] = as_json
    level = logging.WARNING if not verbose else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

@main.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), required=True, help="Experiment TOML")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True, help="QDIF stack to write")
@click.option("--frames", type=click.IntRange(min=2), default=None, help="Override run.frames")
@click.option("--seed", type=int, default=None, help="Override run.seed")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Override run.threads")
@click.pass_context
def simulate(ctx, config_path, out_path, frames, seed, threads):
    """Simulate a frame stack from an experiment config."""
    from qdistill.commands.simulate import run_simulate
    try:
        config = _load_config(config_path)
        summary = run_simulate(config, out_path, frames, seed, threads)
    except DATA_ERRORS as e:
        _fail(e)
    click.echo(f"Saved: {out_path}", err=True)
    _output(ctx, {
        "frames": summary.n_frames, "width": summary.width, "height": summary.height,
        "mean_gray_level": summary.mean_gray_level, "clamped": summary.clamped, "out": out_path,
    }, format_simulation(summary, out_path))

@main.command()
@click.argument("stack", type=click.Path(path_type=Path))
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True, help="QDCR container to write")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="Experiment TOML; [run] supplies the defaults below")
@click.option("--window", type=click.IntRange(min=1), default=None, help="Offset window radius [run.window_radius]")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Worker threads [run.threads]")
@click.option("--estimator", type=click.Choice(ESTIMATORS), default=None, help="Mean estimator [run.estimator]")
@click.option("--full", is_flag=True, help="Window over every pixel pair (grids up to 32x32)")
@click.pass_context
def correlate(ctx, stack, out_path, config_path, window, threads, estimator, full):
    """Correlate a QDIF stack into a Gamma container."""
    from qdistill.commands.correlate import run_correlate
    try:
        run = _load_config(config_path).run
        res = run_correlate(
            stack, out_path,
            run.window_radius if window is None else window,
            run.threads if threads is None else threads,
            run.estimator if estimator is None else estimator,
            full, run.chunk_frames,
        )
    except DATA_ERRORS as e:
        _fail(e)
    click.echo(f"Saved: {out_path}", err=True)
    _output(ctx, {
        "frames": res.n_frames, "width": res.width, "height": res.height, "window_radius": res.window_radius,
        "estimator": res.estimator, "source_sha256": res.source_hash, "out": out_path,
    }, format_correlation(res, out_path))

@main.command()
@click.argument("correlation", type=click.Path(path_type=Path))
@click.option("--at", "anchor", type=(int, int), required=True, metavar="X Y", help="Anchor pixel")
@click.option("--out", "out_base", type=click.Path(path_type=Path), required=True,
              help="Output base name; .pgm and .csv are appended")
@click.pass_context
def conditional(ctx, correlation, anchor, out_base):
    """Export the conditional projection of Gamma relative to one pixel."""
    from qdistill.commands.correlate import run_conditional
    try:
        image, written = run_conditional(correlation, anchor, out_base)
    except DATA_ERRORS as e:
        _fail(e)
    for path in written:
        click.echo(f"Saved: {path}", err=True)
    if not image.normalizable:
        click.echo("Warning: conditional slice has non-positive sum; written unnormalized", err=True)
    _output(ctx, {"anchor": list(image.anchor), "normalizable": image.normalizable, "files": written},
            "\n".join(str(p) for p in written))

@main.command()
@click.argument("correlation", type=click.Path(path_type=Path))
@click.argument("stack", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True, help="Output directory")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="Experiment TOML (camera noise mean, distill settings)")
@click.option("--ground-truth", "ground_truth", type=click.Path(path_type=Path), default=None,
              help="Classical ground-truth image (PGM or CSV, gray levels above x0)")
@click.option("--object-truth", "object_truth", type=click.Path(path_type=Path), default=None,
              help="Pair-arm object mask (PGM, intensity transmission)")
@click.pass_context
def distill(ctx, correlation, stack, out_dir, config_path, ground_truth, object_truth):
    """Split a mixed stack into quantum, classical and residual images."""
    from qdistill.commands.distill import run_distill
    try:
        config = _load_config(config_path)
        result, written = run_distill(
            correlation, stack, out_dir, config.camera.noise_mean, ground_truth, object_truth,
            config.distill.calibration_quantile, config.distill.signal_threshold,
        )
        report = format_distillation(result, written)
        report_path = out_dir / "report.md"
        report_path.write_text(report)
    except DATA_ERRORS as e:
        _fail(e)
    click.echo(f"Saved: {report_path}", err=True)
    _output(ctx, {
        "scale": result.classical.scale, "z_score": result.quantum.z_score, "flags": result.flags,
        "scores": result.scores, "files": written + [report_path],
    }, report)

@main.command("sweep")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None, help="Experiment TOML")
@click.option("--ratios", default=None, help="Comma-separated I_cl/I_qu ratios (default from [snr])")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True, help="CSV of SNR points")
@click.option("--frames", type=click.IntRange(min=2), default=None, help="Frames per point")
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=click.IntRange(min=1), default=None)
@click.pass_context
def snr_sweep(ctx, config_path, ratios, out_path, frames, seed, threads):
    """Measure SNR across classical/quantum ratios and fit the SNR model."""
    from qdistill.commands.sweep import parse_ratios, run_sweep
    try:
        parsed = parse_ratios(ratios) if ratios is not None else None
    except ValueError as e:
        raise _usage_exit(click.BadParameter(str(e), param_hint="--ratios"))
    try:
        config = _load_config(config_path)
        result, written = run_sweep(config, out_path, parsed, frames, seed, threads)
        report = format_sweep(result)
        report_path = out_path.with_suffix(".md")
        report_path.write_text(report)
    except DATA_ERRORS as e:
        _fail(e)
    click.echo(f"Saved: {out_path}", err=True)
    fit = result.fit
    _output(ctx, {
        "points": [vars(p) for p in result.points],
        "fit": None if fit is None else vars(fit),
        "reason": result.reason,
        "files": written + [report_path],
    }, report)

@main.command()
@click.argument("artifacts", nargs=-1, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True, help="Output directory")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="Experiment TOML (camera and distill settings)")
@click.pass_context
def report(ctx, artifacts, out_dir, config_path):
    """Summarize stacks, correlation containers and SNR tables.

    Containers listed with their source stack are distilled as well.
    """
    from qdistill.commands.report import build_report
    if not artifacts:
        raise _usage_exit(click.UsageError("no artifacts given", ctx=ctx))
    try:
        config = _load_config(config_path)
        markdown, exported = build_report(list(artifacts), out_dir, config.camera, config.distill)
    except DATA_ERRORS as e:
        _fail(e)
    click.echo(f"Saved: {out_dir / 'report.md'}", err=True)
    _output(ctx, {"artifacts": list(artifacts), "exports": exported}, markdown)
