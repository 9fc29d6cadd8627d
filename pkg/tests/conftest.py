"""Shared test fixtures."""
import numpy as np
import pytest

from qdistill.models import CameraModel, CorrelationResult, FrameStack

# Two pixels side by side, four frames
TWO_PIXEL_FRAMES = np.array([[[2, 4]], [[6, 8]], [[10, 12]], [[14, 16]]], dtype=np.uint16)

SMALL_CONFIG = """\
[scene]
width = 8
height = 8
pair_rate = 40.0
classical_intensity = 0.3

[camera]
amplification = 50.0
noise_std = 4.0

[run]
frames = 60
seed = 3
window_radius = 2
chunk_frames = 16

[snr]
width = 8
height = 8
window_radius = 4
ratios = [0.0, 1.0, 4.0]
"""

@pytest.fixture
def two_pixel_stack():
    return FrameStack(TWO_PIXEL_FRAMES.copy())

@pytest.fixture
def camera():
    return CameraModel()

@pytest.fixture
def counting_camera():
    """Unit gain, no read noise: gray level = photoelectrons + 100."""
    return CameraModel(quantum_efficiency=1.0, amplification=1.0, noise_mean=100.0, noise_std=0.0)

@pytest.fixture
def random_stack():
    rng = np.random.default_rng(7)
    return FrameStack(rng.integers(0, 60, size=(40, 6, 5)).astype(np.uint16))

@pytest.fixture
def write_config(tmp_path):
    """Write TOML text to a config file and return its path."""
    def _write(text: str = SMALL_CONFIG, name: str = "experiment.toml"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write

@pytest.fixture
def make_result():
    """CorrelationResult with zero Gamma on a given grid; tests fill in what they need."""
    def _make(height: int = 6, width: int = 6, window_radius: int = 2) -> CorrelationResult:
        k = 2 * window_radius + 1
        return CorrelationResult(
            gamma=np.zeros((k, k, height, width)),
            diagonal=np.zeros((height, width)),
            marginal=np.zeros((height, width)),
            n_frames=10,
            window_radius=window_radius,
        )
    return _make
