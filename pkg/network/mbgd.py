"""Boundary-guided dual-head decoder and its plain single-head counterpart.

    F_shared   = UpBlock x N (F_refined)               N stride-2 blocks
    M_boundary = Conv1x1(F_shared)
    F_boundary = Conv3x3(sigmoid(M_boundary))
    M_mask     = Conv1x1(F_shared ++ F_boundary)
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from core import ops
from core.layers import Conv2d, ConvTranspose2d, ReLU, Sigmoid
from core.ops import FeatureMap
from core.params import ParamStore
from models.config import MbgdConfig


@dataclass(frozen=True)
class DualPrediction:
    mask_logits: FeatureMap
    boundary_logits: Optional[FeatureMap] = None

    @property
    def mask_probability(self) -> FeatureMap:
        return ops.sigmoid(self.mask_logits)

    @property
    def boundary_probability(self) -> Optional[FeatureMap]:
        if self.boundary_logits is None:
            return None
        return ops.sigmoid(self.boundary_logits)


class UpBlock:
    """2x2 stride-2 transposed conv -> relu"""

    def __init__(self, store: ParamStore, name: str, in_channels: int, out_channels: int,
                 rng: np.random.Generator, section: str):
        self.deconv = ConvTranspose2d(store, f"{name}.deconv", in_channels, out_channels, rng, section=section)
        self.act = ReLU(f"{name}.relu")

    def forward(self, x: FeatureMap) -> FeatureMap:
        return self.act.forward(self.deconv.forward(x))

    def backward(self, grad: FeatureMap) -> FeatureMap:
        return self.deconv.backward(self.act.backward(grad))


class _UpStack:
    def __init__(self, store: ParamStore, config: MbgdConfig, rng: np.random.Generator, section: str):
        widths = config.schedule()
        self.blocks: List[UpBlock] = [
            UpBlock(store, f"{section}.up{i}", widths[i], widths[i + 1], rng, section)
            for i in range(config.num_up_blocks)
        ]
        self.out_channels = widths[-1]
        self.scale = 2 ** config.num_up_blocks

    def forward(self, x: FeatureMap) -> FeatureMap:
        for block in self.blocks:
            x = block.forward(x)
        return x

    def backward(self, grad: FeatureMap) -> FeatureMap:
        for block in reversed(self.blocks):
            grad = block.backward(grad)
        return grad


class Mbgd:
    SECTION = "mbgd"

    def __init__(self, store: ParamStore, config: MbgdConfig, rng: np.random.Generator):
        section = self.SECTION
        self.config = config
        self.up = _UpStack(store, config, rng, section)
        c_last = self.up.out_channels
        self.boundary_head = Conv2d(store, f"{section}.boundary_head", c_last, 1, 1, rng, section=section)
        self.boundary_sigmoid = Sigmoid(f"{section}.boundary_sigmoid")
        self.boundary_conv = Conv2d(store, f"{section}.boundary_conv", 1, config.boundary_channels, 3, rng,
                                    section=section)
        self.mask_head = Conv2d(store, f"{section}.mask_head", c_last + config.boundary_channels, 1, 1, rng,
                                section=section)

    def forward(self, f_refined: FeatureMap) -> DualPrediction:
        shared = self.up.forward(f_refined)
        boundary_logits = self.boundary_head.forward(shared)
        f_boundary = self.boundary_conv.forward(self.boundary_sigmoid.forward(boundary_logits))
        mask_logits = self.mask_head.forward(ops.concat_channels([shared, f_boundary]))
        return DualPrediction(mask_logits=mask_logits, boundary_logits=boundary_logits)

    def backward(self, grad_mask: FeatureMap, grad_boundary: Optional[FeatureMap] = None) -> FeatureMap:
        grad_cat = self.mask_head.backward(grad_mask)
        grad_shared, grad_f_boundary = ops.split_channels(
            grad_cat, [self.up.out_channels, self.config.boundary_channels]
        )
        grad_logits = self.boundary_sigmoid.backward(self.boundary_conv.backward(grad_f_boundary))
        if grad_boundary is not None:
            grad_logits = grad_logits + grad_boundary
        grad_shared = grad_shared + self.boundary_head.backward(grad_logits)
        return self.up.backward(grad_shared)


class PlainDecoder:
    """Same up-block stack with a single 1x1 mask head and no boundary branch"""
    SECTION = "decoder"

    def __init__(self, store: ParamStore, config: MbgdConfig, rng: np.random.Generator):
        self.config = config
        self.up = _UpStack(store, config, rng, self.SECTION)
        self.mask_head = Conv2d(store, f"{self.SECTION}.mask_head", self.up.out_channels, 1, 1, rng,
                                section=self.SECTION)

    def forward(self, f_refined: FeatureMap) -> DualPrediction:
        return DualPrediction(mask_logits=self.mask_head.forward(self.up.forward(f_refined)))

    def backward(self, grad_mask: FeatureMap, grad_boundary: Optional[FeatureMap] = None) -> FeatureMap:
        return self.up.backward(self.mask_head.backward(grad_mask))


def build_decoder(store: ParamStore, config: MbgdConfig, rng: np.random.Generator):
    if config.dual_head:
        return Mbgd(store, config, rng)
    return PlainDecoder(store, config, rng)
