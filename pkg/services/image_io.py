import io
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

PathLike = Union[str, Path]


def read_image(path: Union[PathLike, BinaryIO]) -> np.ndarray:
    """Read an 8-bit grayscale PGM/PNG (path or file object) as float64 in [0, 1], shape (H, W)"""
    try:
        with Image.open(path) as img:
            pixels = np.asarray(img.convert("L"), dtype=np.float64)
    except (UnidentifiedImageError, OSError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    return pixels / 255.0


def read_mask(path: PathLike) -> np.ndarray:
    """Read a {0,255} mask as uint8 {0,1}"""
    return (read_image(path) > 0.5).astype(np.uint8)


def write_image(path: PathLike, values: np.ndarray) -> None:
    """Write a [0, 1] map as 8-bit grayscale; format follows the suffix"""
    array = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.round(array * 255.0).astype(np.uint8)).save(path)


def write_mask(path: PathLike, mask: np.ndarray) -> None:
    Image.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255).save(path)


def normalize_for_display(values: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; constant maps become zeros"""
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 0.0:
        return np.zeros_like(values, dtype=np.float64)
    return (values - lo) / (hi - lo)


def mask_to_png(mask: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255).save(buffer, format="PNG")
    return buffer.getvalue()
