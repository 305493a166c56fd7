"""FQT1 tensor dump format.

Layout (little-endian): magic ``b"FQT1"``, u32 rank, rank x u32 dims, then
float64 values in row-major order.
"""
import math
from pathlib import Path
from typing import Union

import numpy as np

from core.errors import ConfigurationError

MAGIC = b"FQT1"
_U32 = np.dtype("<u4")
_F64 = np.dtype("<f8")


def encode_tensor(array: np.ndarray) -> bytes:
    array = np.ascontiguousarray(array, dtype=np.float64)
    header = np.array([array.ndim, *array.shape], dtype=_U32).tobytes()
    return MAGIC + header + array.astype(_F64).tobytes()


def decode_tensor(payload: bytes) -> np.ndarray:
    if payload[:4] != MAGIC:
        raise ConfigurationError(f"not an FQT1 payload (magic {payload[:4]!r})")
    if len(payload) < 8:
        raise ConfigurationError(f"FQT1 payload is {len(payload)} bytes, too short for a header")
    rank = int(np.frombuffer(payload, dtype=_U32, count=1, offset=4)[0])
    if len(payload) < 8 + 4 * rank:
        raise ConfigurationError(f"FQT1 header declares rank {rank} but holds {len(payload) - 8} dim bytes")
    dims = tuple(int(d) for d in np.frombuffer(payload, dtype=_U32, count=rank, offset=8))
    offset = 8 + 4 * rank
    count = math.prod(dims)
    expected = offset + count * _F64.itemsize
    if len(payload) != expected:
        raise ConfigurationError(f"FQT1 payload is {len(payload)} bytes, header implies {expected}")
    data = np.frombuffer(payload, dtype=_F64, count=count, offset=offset)
    return data.astype(np.float64).reshape(dims)


def dump_tensor(array: np.ndarray, path: Union[str, Path]) -> None:
    Path(path).write_bytes(encode_tensor(array))


def load_tensor(path: Union[str, Path]) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())
