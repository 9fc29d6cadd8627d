"""Tests for experiment configuration."""
import numpy as np
import pytest

from qdistill.config import ConfigError, ExperimentConfig
from qdistill.images import write_pgm

def test_defaults():
    config = ExperimentConfig()
    assert config.camera.quantum_efficiency == 0.7
    assert config.camera.amplification == 500.0
    assert config.camera.noise_mean == 167.0
    assert config.camera.noise_std == 32.0
    assert config.camera.pixel_pitch_um == 16.0
    assert config.run.window_radius == 5
    assert config.distill.calibration_quantile == 0.75
    assert config.snr.quantum_level == 939.0
    assert config.scene.pair.correlation_width_um == 10.0
    assert config.scene.classical is None

def test_from_file(write_config):
    config = ExperimentConfig.from_file(write_config())
    assert config.scene.shape == (8, 8)
    assert config.scene.pair.mean_pair_rate == 40.0
    assert np.allclose(config.scene.classical.mean_intensity, 0.3)
    assert config.camera.amplification == 50.0
    assert config.run.frames == 60
    assert config.snr.ratios == [0.0, 1.0, 4.0]
    assert config.path.name == "experiment.toml"

def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "nope.toml")

def test_unknown_key_and_section(write_config):
    with pytest.raises(ConfigError, match="pair_rat"):
        ExperimentConfig.from_file(write_config("[scene]\npair_rat = 3\n"))
    with pytest.raises(ConfigError, match="lens"):
        ExperimentConfig.from_file(write_config("[lens]\nf = 1\n"))

def test_invalid_toml(write_config):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(write_config("[scene\n"))

def test_range_checks(write_config):
    with pytest.raises(ConfigError, match="camera"):
        ExperimentConfig.from_file(write_config("[camera]\nquantum_efficiency = 1.5\n"))
    with pytest.raises(ConfigError, match="frames"):
        ExperimentConfig.from_file(write_config("[run]\nframes = 1\n"))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(write_config("[scene]\nclassical_intensity = -1.0\n"))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(write_config("[run]\nestimator = \"median\"\n"))

def test_pair_arm_can_be_disabled(write_config):
    config = ExperimentConfig.from_file(write_config("[scene]\npair_rate = 0.0\nclassical_intensity = 1.0\n"))
    assert config.scene.pair is None

def test_masks_resolve_relative_to_config(tmp_path, write_config):
    masks = tmp_path / "masks"
    masks.mkdir()
    mask = np.zeros((4, 4), dtype=np.uint16)
    mask[:, :2] = 255
    write_pgm(masks / "o1.pgm", mask, maxval=255)
    config = ExperimentConfig.from_file(write_config(
        "[scene]\nwidth = 4\nheight = 4\npair_mask = \"masks/o1.pgm\"\npair_mask_correlation_width_um = 32.0\n"
    ))
    assert np.array_equal(config.scene.pair_mask.transmission, mask / 255)
    assert config.scene.pair.correlation_width_um == 32.0

def test_mask_size_must_match_scene(tmp_path, write_config):
    write_pgm(tmp_path / "o1.pgm", np.zeros((3, 3), dtype=np.uint16), maxval=255)
    with pytest.raises(ConfigError, match="3x3"):
        ExperimentConfig.from_file(write_config("[scene]\nwidth = 4\nheight = 4\npair_mask = \"o1.pgm\"\n"))
