"""Experiment configuration via TOML."""
from __future__ import annotations
import tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from qdistill.images import read_pgm
from qdistill.models import CameraModel, ClassicalSource, ObjectMask, PairSource, SceneConfig

DEFAULT_CONFIG = {
    "scene": {
        "width": 64,
        "height": 64,
        "pair_rate": 1000.0,
        "correlation_width_um": 10.0,
        "pair_mask": "",
        "pair_mask_correlation_width_um": -1.0,
        "pair_profile": "",
        "classical_intensity": 0.0,
        "classical_mask": "",
        "classical_profile": "",
    },
    "camera": {f.name: f.default for f in fields(CameraModel)},
    "run": {
        "frames": 10000,
        "seed": 0,
        "window_radius": 5,
        "threads": 1,
        "chunk_frames": 256,
        "estimator": "successive",
    },
    "distill": {
        "calibration_quantile": 0.75,
        "signal_threshold": 5.0,
    },
    "snr": {
        "width": 32,
        "height": 32,
        "quantum_level": 939.0,
        "correlation_width_um": 10.0,
        "window_radius": 5,
        "peak_radius": 1,
        "exclusion_radius": 3,
        "chunk_frames": 256,
        "ratios": [0.0, 1.0, 2.0, 5.0, 10.0],
    },
}

class ConfigError(ValueError):
    pass

@dataclass
class RunConfig:
    frames: int = 10000
    seed: int = 0
    window_radius: int = 5
    threads: int = 1
    chunk_frames: int = 256
    estimator: str = "successive"

    def __post_init__(self):
        if self.frames < 2:
            raise ConfigError("run.frames must be >= 2 (the successive-frame estimator needs pairs)")
        if self.window_radius < 1:
            raise ConfigError("run.window_radius must be >= 1")
        if self.threads < 1:
            raise ConfigError("run.threads must be >= 1")
        if self.chunk_frames < 1:
            raise ConfigError("run.chunk_frames must be >= 1")
        if self.estimator not in ("successive", "global-mean"):
            raise ConfigError("run.estimator must be 'successive' or 'global-mean'")

@dataclass
class DistillConfig:
    calibration_quantile: float = 0.75
    signal_threshold: float = 5.0

    def __post_init__(self):
        if not 0.0 <= self.calibration_quantile < 1.0:
            raise ConfigError("distill.calibration_quantile must lie in [0, 1)")
        if self.signal_threshold < 0:
            raise ConfigError("distill.signal_threshold must be >= 0")

@dataclass
class SweepConfig:
    width: int = 32
    height: int = 32
    quantum_level: float = 939.0
    correlation_width_um: float = 10.0
    window_radius: int = 5
    peak_radius: int = 1
    exclusion_radius: int = 3
    chunk_frames: int = 256
    ratios: list[float] = field(default_factory=lambda: [0.0, 1.0, 2.0, 5.0, 10.0])

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError("snr grid must be at least 1x1")
        if not 0 <= self.peak_radius < self.exclusion_radius:
            raise ConfigError("snr.peak_radius must be >= 0 and below snr.exclusion_radius")
        if self.exclusion_radius >= self.window_radius:
            raise ConfigError("snr.exclusion_radius must be below snr.window_radius")
        if any(r < 0 for r in self.ratios):
            raise ConfigError("snr.ratios must be >= 0")

def _config_error(section: str, exc: Exception) -> ConfigError:
    return ConfigError(f"[{section}] {exc}")

def _check_keys(data: dict[str, Any]) -> None:
    for section, values in data.items():
        if section not in DEFAULT_CONFIG:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in values:
            if key not in DEFAULT_CONFIG[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]")

def _resolve(base: Path, name: str) -> Path | None:
    if not name:
        return None
    path = Path(name).expanduser()
    return path if path.is_absolute() else base / path

@dataclass
class ExperimentConfig:
    scene: SceneConfig = field(default_factory=lambda: build_scene(DEFAULT_CONFIG["scene"], Path.cwd()))
    camera: CameraModel = field(default_factory=CameraModel)
    run: RunConfig = field(default_factory=RunConfig)
    distill: DistillConfig = field(default_factory=DistillConfig)
    snr: SweepConfig = field(default_factory=SweepConfig)
    path: Path | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
        _check_keys(data)
        base_dir = base_dir or Path.cwd()
        merged = {section: {**defaults, **data.get(section, {})} for section, defaults in DEFAULT_CONFIG.items()}
        try:
            camera = CameraModel(**merged["camera"])
        except (TypeError, ValueError) as e:
            raise _config_error("camera", e) from e
        try:
            scene = build_scene(merged["scene"], base_dir)
        except ConfigError:
            raise
        except (TypeError, ValueError, OSError) as e:
            raise _config_error("scene", e) from e
        try:
            run = RunConfig(**merged["run"])
            distill = DistillConfig(**merged["distill"])
            snr = SweepConfig(**merged["snr"])
        except TypeError as e:
            raise ConfigError(str(e)) from e
        return cls(scene=scene, camera=camera, run=run, distill=distill, snr=snr)

    @classmethod
    def from_file(cls, path: Path | str) -> ExperimentConfig:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
        config = cls.from_dict(data, path.parent)
        config.path = path
        return config

def build_scene(values: dict[str, Any], base_dir: Path) -> SceneConfig:
    width, height = int(values["width"]), int(values["height"])

    def load(name: str) -> np.ndarray | None:
        path = _resolve(base_dir, name)
        if path is None:
            return None
        image, maxval = read_pgm(path)
        if image.shape != (height, width):
            raise ConfigError(
                f"{path}: image is {image.shape[1]}x{image.shape[0]}, scene is {width}x{height}"
            )
        return image.astype(np.float64) / maxval

    pair_mask = load(values["pair_mask"])
    classical_mask = load(values["classical_mask"])
    pair_profile = load(values["pair_profile"])
    classical_profile = load(values["classical_profile"])

    width_um = float(values["correlation_width_um"])
    if values["pair_mask_correlation_width_um"] >= 0:
        # defocused object: pairs reaching it are spread wider
        width_um = float(values["pair_mask_correlation_width_um"])

    pair = None
    if values["pair_rate"] < 0:
        raise ConfigError("[scene] pair_rate must be >= 0")
    if values["pair_rate"] > 0:
        pair = PairSource(float(values["pair_rate"]), width_um, pair_profile)

    classical = None
    level = float(values["classical_intensity"])
    if level < 0:
        raise ConfigError("[scene] classical_intensity must be >= 0")
    if level > 0:
        profile = np.ones((height, width)) if classical_profile is None else classical_profile
        classical = ClassicalSource(level * profile)

    return SceneConfig(
        width=width, height=height, pair=pair, classical=classical,
        pair_mask=None if pair_mask is None else ObjectMask.from_intensity(pair_mask),
        classical_mask=None if classical_mask is None else ObjectMask.from_intensity(classical_mask),
    )
