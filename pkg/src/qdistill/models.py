"""Data models shared by the simulation and analysis stages."""
from __future__ import annotations
from collections.abc import Iterator
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

GAIN_MODES = ("deterministic", "stochastic")
ESTIMATORS = ("successive", "global-mean")

class GridMismatchError(ValueError):
    def __init__(self, what: str, expected: tuple[int, int], got: tuple[int, int]):
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected grid {expected[1]}x{expected[0]}, got {got[1]}x{got[0]}")

def check_grid(what: str, expected: tuple[int, int], got: tuple[int, ...]) -> None:
    """Raise GridMismatchError unless `got` is the (height, width) of `expected`."""
    if tuple(got) != tuple(expected):
        raise GridMismatchError(what, expected, tuple(got))

# --- Scene ---

@dataclass
class ObjectMask:
    """Amplitude transmittance t(r) of an object, one value per sensor pixel."""
    t: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        if self.t.ndim != 2:
            raise ValueError("mask must be a 2-D image")
        if not np.all((self.t >= 0.0) & (self.t <= 1.0)):
            raise ValueError("mask transmittance must lie in [0, 1]")

    @classmethod
    def transparent(cls, height: int, width: int) -> ObjectMask:
        return cls(np.ones((height, width)))

    @classmethod
    def opaque(cls, height: int, width: int) -> ObjectMask:
        return cls(np.zeros((height, width)))

    @classmethod
    def from_intensity(cls, transmission: np.ndarray) -> ObjectMask:
        """Build from intensity transmission |t|^2 (what a gray PGM encodes)."""
        return cls(np.sqrt(np.clip(np.asarray(transmission, dtype=np.float64), 0.0, 1.0)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.t.shape

    @property
    def width(self) -> int:
        return self.t.shape[1]

    @property
    def height(self) -> int:
        return self.t.shape[0]

    @property
    def transmission(self) -> np.ndarray:
        """Per-photon survival probability |t|^2."""
        return self.t ** 2

@dataclass
class PairSource:
    mean_pair_rate: float
    correlation_width_um: float = 10.0
    marginal_profile: np.ndarray | None = None

    def __post_init__(self):
        if self.mean_pair_rate <= 0:
            raise ValueError("mean_pair_rate must be > 0")
        if self.correlation_width_um < 0:
            raise ValueError("correlation_width_um must be >= 0")
        if self.marginal_profile is not None:
            profile = np.asarray(self.marginal_profile, dtype=np.float64)
            if profile.ndim != 2 or np.any(profile < 0) or profile.sum() <= 0:
                raise ValueError("marginal_profile must be a nonnegative, non-empty 2-D image")
            self.marginal_profile = profile / profile.sum()

    def marginal(self, height: int, width: int) -> np.ndarray:
        if self.marginal_profile is None:
            return np.full((height, width), 1.0 / (height * width))
        check_grid("pair marginal profile", (height, width), self.marginal_profile.shape)
        return self.marginal_profile

@dataclass
class ClassicalSource:
    """Expected classical photons per pixel per frame."""
    mean_intensity: np.ndarray

    def __post_init__(self):
        self.mean_intensity = np.asarray(self.mean_intensity, dtype=np.float64)
        if self.mean_intensity.ndim != 2:
            raise ValueError("classical intensity must be a 2-D map")
        if np.any(self.mean_intensity < 0):
            raise ValueError("classical intensity must be >= 0")

    @classmethod
    def uniform(cls, height: int, width: int, level: float) -> ClassicalSource:
        return cls(np.full((height, width), float(level)))

@dataclass
class SceneConfig:
    """Pair arm through `pair_mask` (O1) superimposed on the classical arm through `classical_mask` (O2)."""
    width: int
    height: int
    pair: PairSource | None = None
    classical: ClassicalSource | None = None
    pair_mask: ObjectMask | None = None
    classical_mask: ObjectMask | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("scene grid must be at least 1x1")
        if self.pair_mask is None:
            self.pair_mask = ObjectMask.transparent(self.height, self.width)
        if self.classical_mask is None:
            self.classical_mask = ObjectMask.transparent(self.height, self.width)
        check_grid("pair mask", self.shape, self.pair_mask.shape)
        check_grid("classical mask", self.shape, self.classical_mask.shape)
        if self.classical is not None:
            check_grid("classical intensity", self.shape, self.classical.mean_intensity.shape)
        if self.pair is not None:
            self.pair.marginal(self.height, self.width)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

class Origin(IntEnum):
    PAIR_BOTH = 0
    PAIR_SINGLE = 1
    CLASSICAL = 2

@dataclass
class PhotonRecords:
    """Columnar photon list: pixel row, pixel column and origin tag per photon."""
    rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    cols: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    origin: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint8))

    def __len__(self) -> int:
        return len(self.rows)

    @classmethod
    def concat(cls, *parts: PhotonRecords) -> PhotonRecords:
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls()
        return cls(
            rows=np.concatenate([p.rows for p in parts]),
            cols=np.concatenate([p.cols for p in parts]),
            origin=np.concatenate([p.origin for p in parts]),
        )

    def select(self, origin: Origin) -> PhotonRecords:
        keep = self.origin == origin
        return PhotonRecords(self.rows[keep], self.cols[keep], self.origin[keep])

# --- Camera ---

@dataclass
class CameraModel:
    quantum_efficiency: float = 0.7
    amplification: float = 500.0
    noise_mean: float = 167.0
    noise_std: float = 32.0
    pixel_pitch_um: float = 16.0
    bit_depth: int = 16
    gain_mode: str = "deterministic"
    exposure_ms: float = 6.0
    gain_drift: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise ValueError("quantum_efficiency must lie in [0, 1]")
        if self.amplification <= 0:
            raise ValueError("amplification must be > 0")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.pixel_pitch_um <= 0:
            raise ValueError("pixel_pitch_um must be > 0")
        if not 1 <= self.bit_depth <= 16:
            raise ValueError("bit_depth must lie in [1, 16]")
        if self.gain_mode not in GAIN_MODES:
            raise ValueError(f"gain_mode must be one of {', '.join(GAIN_MODES)}")
        if abs(self.gain_drift) >= 2.0:
            raise ValueError("gain_drift must lie in (-2, 2)")

    @property
    def max_level(self) -> int:
        return 2 ** self.bit_depth - 1

    def gain_at(self, frame_index: int, n_frames: int) -> float:
        """Amplification for one frame, including the linear drift across the acquisition."""
        if not self.gain_drift or n_frames < 2:
            return self.amplification
        return self.amplification * (1.0 + self.gain_drift * (frame_index / (n_frames - 1) - 0.5))

@dataclass
class FrameStack:
    """In-memory stack of gray-level frames, shape (n_frames, height, width)."""
    frames: np.ndarray
    exposure_ms: float = 6.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 3:
            raise ValueError("frames must have shape (n_frames, height, width)")
        if self.frames.dtype != np.uint16:
            if np.any(self.frames < 0) or np.any(self.frames > 65535):
                raise ValueError("frame values must fit in 16 bits")
            self.frames = self.frames.astype(np.uint16)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def chunks(self, size: int = 256) -> Iterator[np.ndarray]:
        for start in range(0, self.n_frames, size):
            yield self.frames[start:start + size]

# --- Correlation ---

@dataclass(eq=False)
class AccumulatorSet:
    """Integer sums for a window of offsets; index [dy + w, dx + w, y, x] holds the product of r=(x, y) with r+d."""
    s_same: np.ndarray
    s_succ: np.ndarray
    s_mean: np.ndarray
    frames_seen: int
    window_radius: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.s_mean.shape

@dataclass(eq=False)
class CorrelationResult:
    gamma: np.ndarray
    diagonal: np.ndarray
    marginal: np.ndarray
    n_frames: int
    window_radius: int
    estimator: str = "successive"
    source_hash: str = ""

    @property
    def shape(self) -> tuple[int, int]:
        return self.marginal.shape

    @property
    def width(self) -> int:
        return self.marginal.shape[1]

    @property
    def height(self) -> int:
        return self.marginal.shape[0]

    def at(self, dx: int, dy: int) -> np.ndarray:
        """Image of Gamma(r, r + (dx, dy)) over r."""
        w = self.window_radius
        if max(abs(dx), abs(dy)) > w:
            raise IndexError(f"offset ({dx}, {dy}) outside window radius {w}")
        return self.gamma[dy + w, dx + w]

    def equals(self, other: CorrelationResult) -> bool:
        return (
            self.n_frames == other.n_frames
            and self.window_radius == other.window_radius
            and self.estimator == other.estimator
            and self.source_hash == other.source_hash
            and np.array_equal(self.gamma, other.gamma)
            and np.array_equal(self.diagonal, other.diagonal)
            and np.array_equal(self.marginal, other.marginal)
        )

@dataclass(eq=False)
class MinusCoordinateMap:
    """P-(d) indexed [dy + w, dx + w]."""
    values: np.ndarray
    window_radius: int

    def at(self, dx: int, dy: int) -> float:
        w = self.window_radius
        return float(self.values[dy + w, dx + w])

    @property
    def center(self) -> float:
        return self.at(0, 0)

@dataclass(eq=False)
class ConditionalImage:
    image: np.ndarray
    anchor: tuple[int, int]
    normalizable: bool = True

# --- Distillation ---

@dataclass(eq=False)
class QuantumImage:
    image: np.ndarray
    object_estimate: np.ndarray
    z_score: float
    no_quantum_signal: bool = False

@dataclass(eq=False)
class ClassicalImage:
    image: np.ndarray
    scale: float
    calibrated: bool = True
    calibration_pixels: int = 0

@dataclass(eq=False)
class DistillationResult:
    direct: np.ndarray
    quantum: QuantumImage
    classical: ClassicalImage
    residual: np.ndarray | None = None
    scores: dict[str, float] = field(default_factory=dict)

    @property
    def flags(self) -> list[str]:
        flags = []
        if self.quantum.no_quantum_signal:
            flags.append("no-quantum-signal")
        if not self.classical.calibrated:
            flags.append("uncalibrated-subtraction")
        return flags

# --- SNR ---

@dataclass
class SnrMeasurement:
    snr: float
    peak: float
    noise_std: float
    noise_samples: int

    @property
    def infinite(self) -> bool:
        return self.noise_std == 0.0

@dataclass
class SnrPoint:
    ratio: float
    measured_snr: float
    quantum_level: float
    classical_level: float
    n_frames: int

    def __post_init__(self):
        if self.ratio < 0:
            raise ValueError("ratio must be >= 0")
        if self.n_frames < 2:
            raise ValueError("n_frames must be >= 2")

@dataclass
class SnrModelFit:
    alpha: float
    beta: float
    alpha_err: float
    beta_err: float
    r_squared: float
    quantum_efficiency: float
    noise_std: float
    noise_mean: float
    converged: bool = True
    diagnostics: str = ""
