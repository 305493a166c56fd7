"""Frequency-guided boundary refinement.

A boundary prototype is distilled from the globally pooled high-frequency
maps, then queried by every spatial position of F_enh through multi-head
cross-attention:

    F_refined = F_enh + omega * W_O(Attn(Q = F_enh W_Q, K = P W_K, V = P W_V))
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from core import ops
from core.errors import ShapeError, UsageError
from core.layers import Linear, ReLU
from core.ops import FeatureMap
from core.params import ParamStore
from models.config import FgbrConfig

SECTION = "fgbr"


@dataclass(frozen=True)
class BoundaryPrototype:
    proto: np.ndarray

    def __post_init__(self):
        if self.proto.ndim != 3:
            raise ShapeError(f"prototype must be (B, T, dim), got {self.proto.shape}")

    @property
    def tokens(self) -> int:
        return self.proto.shape[1]


class Fgbr:
    def __init__(self, store: ParamStore, config: FgbrConfig, rng: np.random.Generator):
        self.store = store
        self.config = config
        dim = config.prototype_dim
        width = config.heads * config.d
        self.distill_hidden = Linear(store, f"{SECTION}.distill1", 2 * config.high_freq_channels, config.hidden,
                                     rng, section=SECTION)
        self.distill_act = ReLU(f"{SECTION}.distill_relu")
        self.distill_out = Linear(store, f"{SECTION}.distill2", config.hidden, dim * config.tokens,
                                  rng, section=SECTION)
        self.w_q = Linear(store, f"{SECTION}.w_q", config.channels, width, rng, bias=False, section=SECTION)
        self.w_k = Linear(store, f"{SECTION}.w_k", dim, width, rng, bias=False, section=SECTION)
        self.w_v = Linear(store, f"{SECTION}.w_v", dim, width, rng, bias=False, section=SECTION)
        self.w_o = Linear(store, f"{SECTION}.w_o", width, config.channels, rng, bias=False, section=SECTION)
        store.add(f"{SECTION}.omega", np.array([config.omega]), section=SECTION)
        self._distill_cache = None
        self._refine_cache = None
        self.last_attention: Optional[np.ndarray] = None

    @property
    def omega(self) -> float:
        return float(self.store.value(f"{SECTION}.omega")[0])

    # -- prototype ---------------------------------------------------------

    def distill(self, f_hf: FeatureMap, f_hc: FeatureMap) -> BoundaryPrototype:
        if f_hf.shape != f_hc.shape:
            raise ShapeError(f"f_hf {f_hf.shape} and f_hc {f_hc.shape} must match")
        stacked = ops.concat_channels([f_hf, f_hc])
        pooled = stacked.mean(axis=(2, 3))
        hidden = self.distill_act.forward(self.distill_hidden.forward(pooled))
        flat = self.distill_out.forward(hidden)
        self._distill_cache = (f_hf.shape, stacked.shape)
        return BoundaryPrototype(flat.reshape(flat.shape[0], self.config.tokens, self.config.prototype_dim))

    def distill_backward(self, grad_proto: np.ndarray) -> Tuple[FeatureMap, FeatureMap]:
        if self._distill_cache is None:
            raise UsageError("fgbr: distill backward called without a recorded forward")
        hf_shape, stacked_shape = self._distill_cache
        self._distill_cache = None
        grad_flat = grad_proto.reshape(grad_proto.shape[0], -1)
        grad_pooled = self.distill_hidden.backward(self.distill_act.backward(self.distill_out.backward(grad_flat)))
        spatial = stacked_shape[2] * stacked_shape[3]
        grad_stacked = np.broadcast_to(
            (grad_pooled / spatial)[:, :, None, None], stacked_shape
        ).copy()
        grad_hf, grad_hc = ops.split_channels(grad_stacked, [hf_shape[1], hf_shape[1]])
        return grad_hf, grad_hc

    # -- cross-attention ---------------------------------------------------

    def _split_heads(self, x: np.ndarray) -> np.ndarray:
        bsz, length, _ = x.shape
        return x.reshape(bsz, length, self.config.heads, self.config.d).transpose(0, 2, 1, 3)

    def _merge_heads(self, x: np.ndarray) -> np.ndarray:
        bsz, heads, length, d = x.shape
        return x.transpose(0, 2, 1, 3).reshape(bsz, length, heads * d)

    def refine(self, f_enh: FeatureMap, prototype: BoundaryPrototype) -> FeatureMap:
        ops.check_feature_map(f_enh, "f_enh")
        bsz, channels, height, width = f_enh.shape
        if channels != self.config.channels:
            raise ShapeError(f"f_enh has {channels} channels, FGBR expects {self.config.channels}")
        if prototype.proto.shape[0] != bsz or prototype.proto.shape[2] != self.config.prototype_dim:
            raise ShapeError(f"prototype shape {prototype.proto.shape} inconsistent with f_enh {f_enh.shape}")

        tokens = f_enh.reshape(bsz, channels, height * width).transpose(0, 2, 1)
        q = self._split_heads(self.w_q.forward(tokens))
        k = self._split_heads(self.w_k.forward(prototype.proto))
        v = self._split_heads(self.w_v.forward(prototype.proto))
        scale = 1.0 / np.sqrt(self.config.d)
        attention = ops.softmax_over(np.einsum("bhnd,bhtd->bhnt", q, k) * scale, axis=-1)
        heads_out = np.einsum("bhnt,bhtd->bhnd", attention, v)
        attended = self.w_o.forward(self._merge_heads(heads_out))
        attended_map = attended.transpose(0, 2, 1).reshape(bsz, channels, height, width)

        self.last_attention = attention
        self._refine_cache = (f_enh.shape, q, k, v, attention, attended_map)
        return f_enh + self.omega * attended_map

    def refine_backward(self, grad: FeatureMap) -> Tuple[FeatureMap, np.ndarray]:
        """Returns (grad wrt f_enh, grad wrt prototype)"""
        if self._refine_cache is None:
            raise UsageError("fgbr: refine backward called without a recorded forward")
        shape, q, k, v, attention, attended_map = self._refine_cache
        self._refine_cache = None
        bsz, channels, height, width = shape
        omega = self.omega
        scale = 1.0 / np.sqrt(self.config.d)

        self.store.accumulate(f"{SECTION}.omega", np.array([np.sum(grad * attended_map)]))
        grad_attended = (omega * grad).reshape(bsz, channels, height * width).transpose(0, 2, 1)
        grad_heads_out = self._split_heads(self.w_o.backward(grad_attended))

        grad_attention = np.einsum("bhnd,bhtd->bhnt", grad_heads_out, v)
        grad_v = np.einsum("bhnt,bhnd->bhtd", attention, grad_heads_out)
        grad_scores = ops.softmax_backward(grad_attention, attention, axis=-1) * scale
        grad_q = np.einsum("bhnt,bhtd->bhnd", grad_scores, k)
        grad_k = np.einsum("bhnt,bhnd->bhtd", grad_scores, q)

        grad_tokens = self.w_q.backward(self._merge_heads(grad_q))
        grad_proto = self.w_k.backward(self._merge_heads(grad_k)) + self.w_v.backward(self._merge_heads(grad_v))
        grad_enh = grad + grad_tokens.transpose(0, 2, 1).reshape(shape)
        return grad_enh, grad_proto

    # -- composite ---------------------------------------------------------

    def forward(self, f_enh: FeatureMap, f_hf: FeatureMap, f_hc: FeatureMap) -> FeatureMap:
        return self.refine(f_enh, self.distill(f_hf, f_hc))

    def backward(self, grad: FeatureMap) -> Tuple[FeatureMap, FeatureMap, FeatureMap]:
        """Returns gradients for (f_enh, f_hf, f_hc)"""
        grad_enh, grad_proto = self.refine_backward(grad)
        grad_hf, grad_hc = self.distill_backward(grad_proto)
        return grad_enh, grad_hf, grad_hc
