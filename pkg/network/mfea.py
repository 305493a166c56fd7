"""Multi-scale frequency extraction and alignment.

    F_Hf  = up(phi_H(concat[LH, HL, HH]))          fine detail, from F_spatial
    F_L   = up(phi_L(LL))
    F_Hc  = up(phi_Hc(concat[details of avg_pool2(F_spatial)]))
    A_b   = psi_b(F_Hf),  A_s = psi_s(F_L)          single-channel, in (0, 1)
    F_enh = F_spatial + lambda * F_spatial * (alpha * A_b + beta * A_s)

Band-resolution maps are brought back to H1 x W1 with corner-aligned
bilinear upsampling before the attention nets run.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core import ops
from core.errors import ConfigurationError, UsageError
from core.layers import Conv2d, ReLU, Sequential, Sigmoid
from core.ops import FeatureMap
from core.params import ParamStore
from models.config import MfeaConfig
from network.wavelet import WaveletBands, haar_decompose, haar_decompose_backward

SECTION = "mfea"


@dataclass(frozen=True)
class MfeaOutput:
    f_enh: FeatureMap
    f_hf: FeatureMap
    f_hc: FeatureMap
    f_l: FeatureMap
    attn_boundary: FeatureMap
    attn_structure: FeatureMap


def attention_head(store: ParamStore, name: str, channels: int, rng: np.random.Generator) -> Sequential:
    """3x3 conv (C_f -> C_f/2) -> relu -> 1x1 conv (-> 1) -> sigmoid"""
    hidden = max(channels // 2, 1)
    return Sequential(
        Conv2d(store, f"{name}.conv1", channels, hidden, 3, rng, section=SECTION),
        ReLU(f"{name}.relu"),
        Conv2d(store, f"{name}.conv2", hidden, 1, 1, rng, section=SECTION),
        Sigmoid(f"{name}.sigmoid")
    )


class Mfea:
    def __init__(self, store: ParamStore, config: MfeaConfig, rng: np.random.Generator):
        self.store = store
        self.config = config
        channels, cf = config.channels, config.cf
        self.phi_h = Conv2d(store, f"{SECTION}.phi_h", 3 * channels, cf, 1, rng, section=SECTION)
        self.phi_l = Conv2d(store, f"{SECTION}.phi_l", channels, cf, 1, rng, section=SECTION)
        self.phi_hc = Conv2d(store, f"{SECTION}.phi_hc", 3 * channels, cf, 1, rng, section=SECTION)
        self.psi_b = attention_head(store, f"{SECTION}.psi_b", cf, rng)
        self.psi_s = attention_head(store, f"{SECTION}.psi_s", cf, rng)
        store.add(f"{SECTION}.alpha", np.array([config.alpha]), section=SECTION)
        store.add(f"{SECTION}.beta", np.array([config.beta]), section=SECTION)
        store.add(f"{SECTION}.lambda", np.array([config.fusion]), trainable=False, section=SECTION)
        self._cache = None

    @property
    def alpha(self) -> float:
        return float(self.store.value(f"{SECTION}.alpha")[0])

    @property
    def beta(self) -> float:
        return float(self.store.value(f"{SECTION}.beta")[0])

    @property
    def fusion(self) -> float:
        return float(self.store.value(f"{SECTION}.lambda")[0])

    @staticmethod
    def check_input(f_spatial: FeatureMap) -> None:
        ops.check_feature_map(f_spatial, "f_spatial")
        height, width = f_spatial.shape[2:]
        if height % 2 or width % 2 or height < 4 or width < 4:
            raise ConfigurationError(
                f"MFEA needs an even feature grid of at least 4x4 (two pooling levels), got {height}x{width}"
            )

    def forward(self, f_spatial: FeatureMap) -> MfeaOutput:
        self.check_input(f_spatial)
        height, width = f_spatial.shape[2:]

        bands = haar_decompose(f_spatial)
        detail = ops.concat_channels(bands.details)
        hf_band = self.phi_h.forward(detail)
        l_band = self.phi_l.forward(bands.ll)
        f_hf = ops.upsample_bilinear(hf_band, height, width)
        f_l = ops.upsample_bilinear(l_band, height, width)

        coarse = haar_decompose(ops.avg_pool2(f_spatial))
        hc_band = self.phi_hc.forward(ops.concat_channels(coarse.details))
        f_hc = ops.upsample_bilinear(hc_band, height, width)

        attn_b = self.psi_b.forward(f_hf)
        attn_s = self.psi_s.forward(f_l)
        alpha, beta, fusion = self.alpha, self.beta, self.fusion
        gate = alpha * attn_b + beta * attn_s
        f_enh = f_spatial + fusion * ops.mul(f_spatial, gate)

        self._cache = (f_spatial, bands.ll.shape, coarse.ll.shape, attn_b, attn_s, gate)
        return MfeaOutput(f_enh=f_enh, f_hf=f_hf, f_hc=f_hc, f_l=f_l, attn_boundary=attn_b, attn_structure=attn_s)

    def backward(
        self,
        grad_enh: FeatureMap,
        grad_hf: Optional[FeatureMap] = None,
        grad_hc: Optional[FeatureMap] = None,
        grad_attn_boundary: Optional[FeatureMap] = None
    ) -> FeatureMap:
        """Gradients w.r.t. MFEA parameters and F_spatial.

        ``grad_hf`` and ``grad_hc`` carry the downstream consumers of F_Hf and
        F_Hc (the prototype distiller). ``grad_attn_boundary`` supervises A_b
        directly.
        """
        if self._cache is None:
            raise UsageError("mfea: backward called without a recorded forward")
        f_spatial, band_shape, coarse_shape, attn_b, attn_s, gate = self._cache
        self._cache = None
        alpha, beta, fusion = self.alpha, self.beta, self.fusion
        channels = f_spatial.shape[1]

        grad_spatial = grad_enh * (1.0 + fusion * gate)
        modulated = np.sum(grad_enh * f_spatial, axis=1, keepdims=True)
        grad_gate = fusion * modulated
        self.store.accumulate(f"{SECTION}.alpha", np.array([np.sum(grad_gate * attn_b)]))
        self.store.accumulate(f"{SECTION}.beta", np.array([np.sum(grad_gate * attn_s)]))
        self.store.accumulate(f"{SECTION}.lambda", np.array([np.sum(modulated * gate)]))

        grad_attn_b = alpha * grad_gate
        if grad_attn_boundary is not None:
            grad_attn_b = grad_attn_b + grad_attn_boundary
        grad_f_hf = self.psi_b.backward(grad_attn_b)
        if grad_hf is not None:
            grad_f_hf = grad_f_hf + grad_hf
        grad_f_l = self.psi_s.backward(beta * grad_gate)

        grad_hf_band = ops.upsample_bilinear_backward(grad_f_hf, band_shape[2], band_shape[3])
        grad_l_band = ops.upsample_bilinear_backward(grad_f_l, band_shape[2], band_shape[3])
        grad_lh, grad_hl, grad_hh = ops.split_channels(self.phi_h.backward(grad_hf_band), [channels] * 3)
        grad_ll = self.phi_l.backward(grad_l_band)
        grad_spatial = grad_spatial + haar_decompose_backward(
            WaveletBands(ll=grad_ll, lh=grad_lh, hl=grad_hl, hh=grad_hh)
        )

        if grad_hc is None:
            grad_hc = np.zeros((f_spatial.shape[0], self.config.cf) + f_spatial.shape[2:])
        grad_hc_band = ops.upsample_bilinear_backward(grad_hc, coarse_shape[2], coarse_shape[3])
        c_lh, c_hl, c_hh = ops.split_channels(self.phi_hc.backward(grad_hc_band), [channels] * 3)
        grad_pooled = haar_decompose_backward(
            WaveletBands(ll=np.zeros_like(c_lh), lh=c_lh, hl=c_hl, hh=c_hh)
        )
        grad_spatial = grad_spatial + ops.avg_pool2_backward(grad_pooled)
        return grad_spatial

    def inspect_coarse(self, f_spatial: FeatureMap):
        """Coarse-scale bands and attention maps for inspection dumps (no cache)"""
        height, width = f_spatial.shape[2:]
        coarse = haar_decompose(ops.avg_pool2(f_spatial))
        w_hc, b_hc = self.store.value(f"{SECTION}.phi_hc.weight"), self.store.value(f"{SECTION}.phi_hc.bias")
        w_l, b_l = self.store.value(f"{SECTION}.phi_l.weight"), self.store.value(f"{SECTION}.phi_l.bias")
        f_hc = ops.upsample_bilinear(ops.conv2d(ops.concat_channels(coarse.details), w_hc, b_hc), height, width)
        f_lc = ops.upsample_bilinear(ops.conv2d(coarse.ll, w_l, b_l), height, width)
        attn_b = _run_head(self.store, f"{SECTION}.psi_b", f_hc)
        attn_s = _run_head(self.store, f"{SECTION}.psi_s", f_lc)
        return coarse, attn_b, attn_s


def _run_head(store: ParamStore, name: str, x: FeatureMap) -> FeatureMap:
    hidden = ops.relu(ops.conv2d(x, store.value(f"{name}.conv1.weight"), store.value(f"{name}.conv1.bias"), pad=1))
    return ops.sigmoid(ops.conv2d(hidden, store.value(f"{name}.conv2.weight"), store.value(f"{name}.conv2.bias")))
