"""PGM and CSV image files; PGM goes through Pillow's PPM plugin."""
from __future__ import annotations
from pathlib import Path

import numpy as np
from PIL import Image

GRAY_MODES = {"L": 255, "I": 65535, "I;16": 65535, "I;16B": 65535}

class ImageFormatError(ValueError):
    pass

def read_pgm(path: Path | str) -> tuple[np.ndarray, int]:
    """Returns (image, maxval) for a plain or binary PGM.

    Pillow rescales uncommon maxvals to 255 or 65535, so the returned maxval is
    one of those two and image / maxval keeps the file's gray fractions.
    """
    try:
        with Image.open(path) as img:
            fmt, mode = img.format, img.mode
            image = np.array(img)
    except (OSError, SyntaxError, ValueError) as e:
        raise ImageFormatError(f"{path}: {e}") from e
    if fmt != "PPM" or mode not in GRAY_MODES:
        raise ImageFormatError(f"{path}: not a grayscale PGM ({fmt} {mode})")
    return image.astype(np.uint16), GRAY_MODES[mode]

def write_pgm(path: Path | str, image: np.ndarray, maxval: int = 65535) -> None:
    """Binary PGM at depth 255 (8-bit) or 65535 (16-bit, big-endian)."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ImageFormatError("PGM images are 2-D")
    if maxval not in (255, 65535):
        raise ImageFormatError(f"PGM maxval must be 255 or 65535, not {maxval}")
    if np.any(image < 0) or np.any(image > maxval):
        raise ImageFormatError(f"PGM values must lie in [0, {maxval}]")
    # mode I is saved as 16-bit P5, mode L as 8-bit P5
    pixels = image.astype(np.uint8) if maxval == 255 else image.astype(np.int32)
    Image.fromarray(pixels).save(path, format="PPM")

def to_gray16(image: np.ndarray) -> np.ndarray:
    """Min-max scale a float image to 0..65535; constant images map to 0."""
    image = np.asarray(image, dtype=np.float64)
    lo, hi = float(image.min()), float(image.max())
    if hi <= lo:
        return np.zeros(image.shape, dtype=np.uint16)
    return np.floor((image - lo) / (hi - lo) * 65535 + 0.5).astype(np.uint16)

def write_csv(path: Path | str, image: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(image), delimiter=",", fmt="%.17g")

def read_csv(path: Path | str) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))

def export_image(base: Path | str, image: np.ndarray) -> list[Path]:
    """Write `<base>.pgm` (scaled for viewing) and `<base>.csv` (raw values)."""
    base = Path(base)
    pgm = base.with_suffix(".pgm")
    csv = base.with_suffix(".csv")
    write_pgm(pgm, to_gray16(image))
    write_csv(csv, image)
    return [pgm, csv]
