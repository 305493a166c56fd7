"""Single-level orthonormal 2D Haar transform over the last two axes.

For every 2x2 block ``[a b; c d]``::

    ll = (a + b + c + d) / 2     approximation
    lh = (a + b - c - d) / 2     horizontal detail
    hl = (a - b + c - d) / 2     vertical detail
    hh = (a - b - c + d) / 2     diagonal detail

which is pywt's ``(cA, (cH, cV, cD))`` in periodization mode. The transform is
orthogonal, so the backward pass of ``haar_decompose`` is the inverse
transform applied to the band gradients.
"""
from dataclasses import dataclass

import numpy as np
import pywt

from core.errors import ShapeError
from core.ops import FeatureMap, check_feature_map

WAVELET = "haar"
MODE = "periodization"
AXES = (-2, -1)


@dataclass(frozen=True)
class WaveletBands:
    ll: FeatureMap
    lh: FeatureMap
    hl: FeatureMap
    hh: FeatureMap

    def __post_init__(self):
        shapes = {self.ll.shape, self.lh.shape, self.hl.shape, self.hh.shape}
        if len(shapes) != 1:
            raise ShapeError(f"wavelet bands must share one shape, got {sorted(shapes)}")

    @property
    def details(self):
        return self.lh, self.hl, self.hh

    def energy(self) -> float:
        return float(sum(np.sum(band ** 2) for band in (self.ll, self.lh, self.hl, self.hh)))


def haar_decompose(x: FeatureMap) -> WaveletBands:
    x = check_feature_map(x)
    height, width = x.shape[2:]
    if height % 2 or width % 2:
        raise ShapeError(f"haar_decompose needs even H and W, got {height}x{width}")
    ll, (lh, hl, hh) = pywt.dwt2(x, WAVELET, mode=MODE, axes=AXES)
    return WaveletBands(ll=ll, lh=lh, hl=hl, hh=hh)


def haar_reconstruct(bands: WaveletBands) -> FeatureMap:
    return pywt.idwt2((bands.ll, (bands.lh, bands.hl, bands.hh)), WAVELET, mode=MODE, axes=AXES)


def haar_decompose_backward(grad: WaveletBands) -> FeatureMap:
    return haar_reconstruct(grad)


def zero_bands_like(bands: WaveletBands) -> WaveletBands:
    zeros = np.zeros_like(bands.ll)
    return WaveletBands(ll=zeros, lh=zeros, hl=zeros, hh=zeros)
