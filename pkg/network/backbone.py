"""Toy stand-in for a frozen foundation encoder with lightweight adapters.

The body (patch embedding plus convolutional mixer blocks) is frozen by
default; each block carries a bottleneck adapter whose up-projection starts at
zero, so at initialization the encoder output equals the frozen body output.
"""
from typing import List

import numpy as np

from core.errors import ConfigurationError
from core.layers import Conv2d, ReLU
from core.ops import FeatureMap, check_feature_map
from core.params import ParamStore
from models.config import BackboneConfig

SECTION = "backbone"


class Adapter:
    """down-project -> relu -> up-project, added residually"""

    def __init__(self, store: ParamStore, name: str, channels: int, bottleneck: int, rng: np.random.Generator):
        self.down = Conv2d(store, f"{name}.down", channels, bottleneck, 1, rng, section=SECTION)
        self.act = ReLU(f"{name}.relu")
        self.up = Conv2d(store, f"{name}.up", bottleneck, channels, 1, rng, section=SECTION, zero_init=True)

    def forward(self, x: FeatureMap) -> FeatureMap:
        return x + self.up.forward(self.act.forward(self.down.forward(x)))

    def backward(self, grad: FeatureMap) -> FeatureMap:
        return grad + self.down.backward(self.act.backward(self.up.backward(grad)))


class MixerBlock:
    """x + relu(pw(conv3x3(x))), then the adapter"""

    def __init__(self, store: ParamStore, name: str, config: BackboneConfig, rng: np.random.Generator):
        channels = config.embed_dim
        body_trainable = not config.freeze_body
        self.spatial = Conv2d(store, f"{name}.spatial", channels, channels, 3, rng,
                              trainable=body_trainable, section=SECTION)
        self.pointwise = Conv2d(store, f"{name}.pointwise", channels, channels, 1, rng,
                                trainable=body_trainable, section=SECTION)
        self.act = ReLU(f"{name}.relu")
        self.adapter = Adapter(store, f"{name}.adapter", channels, config.adapter_dim, rng)

    def forward(self, x: FeatureMap) -> FeatureMap:
        body = x + self.act.forward(self.pointwise.forward(self.spatial.forward(x)))
        return self.adapter.forward(body)

    def backward(self, grad: FeatureMap) -> FeatureMap:
        grad = self.adapter.backward(grad)
        return grad + self.spatial.backward(self.pointwise.backward(self.act.backward(grad)))


class Backbone:
    """encode(image (B,1,H,W)) -> F_spatial (B, C, H/patch, W/patch)"""

    def __init__(self, store: ParamStore, config: BackboneConfig, rng: np.random.Generator, in_channels: int = 1):
        self.config = config
        self.in_channels = in_channels
        self.patch_embed = Conv2d(
            store, f"{SECTION}.patch_embed", in_channels, config.embed_dim, config.patch, rng,
            stride=config.patch, pad=0, trainable=not config.freeze_body, section=SECTION
        )
        self.blocks: List[MixerBlock] = [
            MixerBlock(store, f"{SECTION}.block{i}", config, rng) for i in range(config.depth)
        ]

    def check_input(self, image: FeatureMap) -> None:
        check_feature_map(image, "image")
        height, width = image.shape[2:]
        patch = self.config.patch
        if image.shape[1] != self.in_channels:
            raise ConfigurationError(f"encoder expects {self.in_channels} input channel(s), got {image.shape[1]}")
        if height % patch or width % patch:
            raise ConfigurationError(
                f"image size {height}x{width} must be divisible by the patch size {patch}"
            )

    def encode(self, image: FeatureMap) -> FeatureMap:
        self.check_input(image)
        features = self.patch_embed.forward(image)
        for block in self.blocks:
            features = block.forward(features)
        return features

    def backward(self, grad: FeatureMap) -> FeatureMap:
        for block in reversed(self.blocks):
            grad = block.backward(grad)
        return self.patch_embed.backward(grad)
