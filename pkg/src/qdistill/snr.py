"""Signal-to-noise of the correlation peak: measurement, model, fit and illumination sweeps."""
from __future__ import annotations
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from qdistill.camera import FrameSimulator, classical_intensity_for_level, pair_rate_for_level
from qdistill.config import SweepConfig
from qdistill.correlator import correlate, minus_projection
from qdistill.models import (
    CameraModel, ClassicalSource, MinusCoordinateMap, PairSource, SceneConfig, SnrMeasurement,
    SnrModelFit, SnrPoint,
)

logger = logging.getLogger(__name__)

MIN_NOISE_SAMPLES = 20
BETA_BOUNDS = (1e-4, 1e4)

class ModelDomainError(ValueError):
    pass

class FitError(ValueError):
    pass

def measure_snr(
    projection: MinusCoordinateMap, peak_radius: int = 1, exclusion_radius: int = 3,
) -> SnrMeasurement:
    """Peak over |d| <= peak_radius divided by the std of P- over |d| > exclusion_radius."""
    if not 0 <= peak_radius < exclusion_radius:
        raise ValueError("need 0 <= peak_radius < exclusion_radius")
    w = projection.window_radius
    d = np.arange(-w, w + 1)
    dist = np.maximum(np.abs(d)[:, None], np.abs(d)[None, :])
    noise = projection.values[dist > exclusion_radius]
    if noise.size < MIN_NOISE_SAMPLES:
        raise ValueError(
            f"only {noise.size} noise samples outside radius {exclusion_radius}; need {MIN_NOISE_SAMPLES}"
        )
    peak = float(projection.values[dist <= peak_radius].max())
    std = float(noise.std(ddof=1))
    snr = math.inf if std == 0.0 else peak / std
    return SnrMeasurement(snr=snr, peak=peak, noise_std=std, noise_samples=int(noise.size))

def snr_model(
    n_frames: float, quantum_efficiency: float, noise_std: float, noise_mean: float,
    quantum_level: float, classical_level: float, alpha: float, beta: float,
) -> float:
    """SNR = alpha (sqrt(N) eta / 2) / (1 + (sigma0^2 + I_cl) / (beta (I_qu - mu0)))."""
    if quantum_level <= noise_mean:
        raise ModelDomainError("quantum level must exceed the noise mean")
    if beta <= 0:
        raise ModelDomainError("beta must be > 0")
    if n_frames < 1:
        raise ModelDomainError("N must be >= 1")
    penalty = (noise_std ** 2 + classical_level) / (beta * (quantum_level - noise_mean))
    return alpha * (math.sqrt(n_frames) * quantum_efficiency / 2.0) / (1.0 + penalty)

def frames_for_target_snr(
    target: float, quantum_efficiency: float, noise_std: float, noise_mean: float,
    quantum_level: float, classical_level: float, alpha: float, beta: float,
) -> int:
    """Smallest N whose modelled SNR reaches `target`."""
    per_root_n = snr_model(1, quantum_efficiency, noise_std, noise_mean, quantum_level,
                           classical_level, alpha, beta)
    n = max(2, math.ceil((target / per_root_n) ** 2))
    while snr_model(n, quantum_efficiency, noise_std, noise_mean, quantum_level,
                    classical_level, alpha, beta) < target:
        n += 1
    return n

def _shape(points: Sequence[SnrPoint], eta: float, sigma0: float, mu0: float, beta: float) -> np.ndarray:
    """Model divided by alpha, per point."""
    return np.array([
        snr_model(p.n_frames, eta, sigma0, mu0, p.quantum_level, p.classical_level, 1.0, beta)
        for p in points
    ])

def fit_model(
    points: Sequence[SnrPoint], quantum_efficiency: float, noise_std: float, noise_mean: float,
) -> SnrModelFit:
    """Least-squares (alpha, beta).

    The model is linear in alpha, so alpha is solved in closed form for each beta and
    the residual is minimized over log(beta): a coarse grid brackets the minimum and a
    bounded scalar search refines it.
    """
    if len(points) < 3:
        raise FitError("need at least 3 SNR points")
    if len({p.ratio for p in points}) < 2:
        raise FitError("SNR points must span at least 2 distinct ratios")
    y = np.array([p.measured_snr for p in points], dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise FitError("measured SNR values must be finite")
    eta, sigma0, mu0 = quantum_efficiency, noise_std, noise_mean

    def alpha_for(beta: float) -> tuple[float, np.ndarray]:
        g = _shape(points, eta, sigma0, mu0, beta)
        return float(np.dot(g, y) / np.dot(g, g)), g

    def rss(log_beta: float) -> float:
        alpha, g = alpha_for(math.exp(log_beta))
        r = y - alpha * g
        return float(np.dot(r, r))

    lo, hi = (math.log(b) for b in BETA_BOUNDS)
    grid = np.linspace(lo, hi, 161)
    values = [rss(v) for v in grid]
    best = int(np.argmin(values))
    left, right = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
    found = optimize.minimize_scalar(rss, bounds=(left, right), method="bounded",
                                     options={"xatol": 1e-12, "maxiter": 500})
    log_beta = float(found.x)
    beta = math.exp(log_beta)
    alpha, g = alpha_for(beta)

    converged = bool(found.success)
    diagnostics = [] if converged else [f"scalar search: {found.message}"]
    if best in (0, len(grid) - 1):
        converged = False
        diagnostics.append(f"beta at search bound {beta:.3g}")

    residual = y - alpha * g
    ss_res = float(np.dot(residual, residual))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)

    alpha_err, beta_err = _standard_errors(points, eta, sigma0, mu0, alpha, beta, ss_res)
    if alpha <= 0 or beta <= 0:
        converged = False
        diagnostics.append("non-positive parameter")
    if not converged:
        logger.warning("SNR model fit did not converge: %s", "; ".join(diagnostics))
    return SnrModelFit(
        alpha=alpha, beta=beta, alpha_err=alpha_err, beta_err=beta_err, r_squared=r_squared,
        quantum_efficiency=eta, noise_std=sigma0, noise_mean=mu0,
        converged=converged, diagnostics="; ".join(diagnostics),
    )

def _standard_errors(points, eta, sigma0, mu0, alpha, beta, ss_res) -> tuple[float, float]:
    dof = len(points) - 2
    if dof <= 0:
        return math.nan, math.nan
    g = _shape(points, eta, sigma0, mu0, beta)
    step = beta * 1e-6
    dg = (_shape(points, eta, sigma0, mu0, beta + step) - _shape(points, eta, sigma0, mu0, beta - step)) / (2 * step)
    jac = np.column_stack([g, alpha * dg])
    try:
        cov = np.linalg.inv(jac.T @ jac) * (ss_res / dof)
    except np.linalg.LinAlgError:
        return math.nan, math.nan
    return float(math.sqrt(max(cov[0, 0], 0.0))), float(math.sqrt(max(cov[1, 1], 0.0)))

# --- Sweeps ---

def homogeneous_scene(
    camera: CameraModel, width: int, height: int, quantum_level: float, classical_level: float,
    correlation_width_um: float,
) -> SceneConfig:
    """Maskless scene with both sources flat at the requested gray levels."""
    pair = PairSource(pair_rate_for_level(quantum_level, camera, width * height), correlation_width_um)
    classical = None
    if classical_level > 0:
        classical = ClassicalSource.uniform(height, width, classical_intensity_for_level(classical_level, camera))
    return SceneConfig(width=width, height=height, pair=pair, classical=classical)

@dataclass
class SweepResult:
    points: list[SnrPoint]
    projections: list[MinusCoordinateMap]
    fit: SnrModelFit | None = None
    reason: str = ""
    measurements: list[SnrMeasurement] = field(default_factory=list)

def measure_point(
    template: SweepConfig, camera: CameraModel, ratio: float, n_frames: int, seed: int, threads: int = 1,
) -> tuple[SnrPoint, SnrMeasurement, MinusCoordinateMap]:
    """Simulate, correlate and project one homogeneous stack at I_cl = ratio * I_qu."""
    classical_level = ratio * template.quantum_level
    scene = homogeneous_scene(camera, template.width, template.height, template.quantum_level,
                              classical_level, template.correlation_width_um)
    simulator = FrameSimulator(scene, camera, n_frames, seed)
    res = correlate(simulator.chunks(template.chunk_frames, threads), template.window_radius, threads)
    projection = minus_projection(res)
    measured = measure_snr(projection, template.peak_radius, template.exclusion_radius)
    point = SnrPoint(ratio=ratio, measured_snr=measured.snr, quantum_level=template.quantum_level,
                     classical_level=classical_level, n_frames=n_frames)
    logger.info("ratio %.3g: SNR %.3f over %d frames", ratio, measured.snr, n_frames)
    return point, measured, projection

def point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])

def snr_sweep(
    template: SweepConfig, camera: CameraModel, ratios: Sequence[float], n_frames: int, seed: int = 0,
    threads: int = 1,
) -> SweepResult:
    """One SNR point per ratio (independent seeds), then a model fit when the points allow one."""
    if any(r < 0 for r in ratios):
        raise ValueError("ratios must be >= 0")
    jobs = [(r, point_seed(seed, i)) for i, r in enumerate(ratios)]

    def run(job):
        ratio, job_seed = job
        return measure_point(template, camera, ratio, n_frames, job_seed)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, jobs))
    else:
        outcomes = [run(job) for job in jobs]

    result = SweepResult(
        points=[o[0] for o in outcomes],
        measurements=[o[1] for o in outcomes],
        projections=[o[2] for o in outcomes],
    )
    finite = [p for p in result.points if math.isfinite(p.measured_snr)]
    if len(finite) < 3 or len({p.ratio for p in finite}) < 2:
        result.reason = "not enough distinct ratios to fit the SNR model"
        logger.info(result.reason)
        return result
    result.fit = fit_model(finite, camera.quantum_efficiency, camera.noise_std, camera.noise_mean)
    return result
