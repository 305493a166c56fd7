"""Full segmentation network: backbone -> [MFEA] -> [FGBR] -> decoder.

Module toggles follow the ablation rows. Without MFEA the backbone features go
straight to the decoder; without MBGD the plain single-head decoder is used
and no boundary logits are produced.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from core.gradcheck import grad_check
from core.ops import FeatureMap
from core.params import ParamStore
from models.config import RunConfig
from models.report import GradCheckReport
from network.backbone import Backbone
from network.fgbr import BoundaryPrototype, Fgbr
from network.mbgd import DualPrediction, build_decoder
from network.mfea import Mfea
from network.supervision import MultiTaskLoss
from network.wavelet import WaveletBands, haar_decompose

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScaleInspection:
    bands: WaveletBands
    attn_boundary: FeatureMap
    attn_structure: FeatureMap


@dataclass(frozen=True)
class Inspection:
    """Intermediate maps for one forward pass, keyed by scale"""
    prediction: DualPrediction
    f_spatial: FeatureMap
    scales: Dict[str, ScaleInspection]
    prototype: Optional[BoundaryPrototype] = None
    attention: Optional[np.ndarray] = None


class FreqDino:
    def __init__(self, config: RunConfig, store: Optional[ParamStore] = None):
        self.config = config
        self.store = store if store is not None else ParamStore()
        rng = np.random.default_rng(config.seed)
        self.backbone = Backbone(self.store, config.backbone, rng)
        self.mfea = Mfea(self.store, config.mfea, rng) if config.use_mfea else None
        self.fgbr = Fgbr(self.store, config.fgbr, rng) if config.use_fgbr else None
        self.decoder = build_decoder(self.store, config.mbgd, rng)
        self._last_mfea = None
        self._last_features = None
        logger.debug(
            "built model toggles=%s params=%d trainable=%d",
            config.toggles(), self.store.count(), self.store.count(trainable=True)
        )

    def forward(self, images: FeatureMap) -> DualPrediction:
        features = self.backbone.encode(images)
        self._last_features = features
        self._last_mfea = None
        if self.mfea is not None:
            enhanced = self.mfea.forward(features)
            self._last_mfea = enhanced
            features = enhanced.f_enh
            if self.fgbr is not None:
                features = self.fgbr.forward(enhanced.f_enh, enhanced.f_hf, enhanced.f_hc)
        return self.decoder.forward(features)

    def backward(self, grad_mask: FeatureMap, grad_boundary: Optional[FeatureMap] = None) -> FeatureMap:
        """Propagate loss gradients through every module; returns d/d(images)"""
        grad = self.decoder.backward(grad_mask, grad_boundary)
        if self.mfea is not None:
            grad_hf = grad_hc = None
            if self.fgbr is not None:
                grad, grad_hf, grad_hc = self.fgbr.backward(grad)
            grad = self.mfea.backward(grad, grad_hf, grad_hc)
        grad = self.backbone.backward(grad)
        self.store.mark_backward()
        return grad

    def predict(self, images: FeatureMap) -> DualPrediction:
        """Forward pass whose caches are discarded right away"""
        prediction = self.forward(images)
        self.clear_cache()
        return prediction

    def clear_cache(self) -> None:
        for layer in _walk(self):
            layer._cache = None
        if self.mfea is not None:
            self.mfea._cache = None
        if self.fgbr is not None:
            self.fgbr._distill_cache = None
            self.fgbr._refine_cache = None

    def inspect(self, images: FeatureMap) -> Inspection:
        """Forward pass keeping bands, attention maps and the prototype"""
        prediction = self.forward(images)
        f_spatial = self._last_features
        enhanced = self._last_mfea
        self.clear_cache()
        scales: Dict[str, ScaleInspection] = {}
        prototype = attention = None
        if enhanced is not None:
            scales["fine"] = ScaleInspection(
                bands=haar_decompose(f_spatial),
                attn_boundary=enhanced.attn_boundary,
                attn_structure=enhanced.attn_structure
            )
            coarse, coarse_b, coarse_s = self.mfea.inspect_coarse(f_spatial)
            scales["coarse"] = ScaleInspection(bands=coarse, attn_boundary=coarse_b, attn_structure=coarse_s)
            if self.fgbr is not None:
                prototype = self.fgbr.distill(enhanced.f_hf, enhanced.f_hc)
                self.clear_cache()
                attention = self.fgbr.last_attention
        return Inspection(
            prediction=prediction, f_spatial=f_spatial, scales=scales, prototype=prototype, attention=attention
        )

    def grad_check(self, images: FeatureMap, masks: np.ndarray, **kwargs) -> GradCheckReport:
        """Finite-difference check of the full multi-task loss"""
        loss = MultiTaskLoss(self.config.loss)

        def loss_fn() -> float:
            return loss.forward(self.forward(images), masks).total

        def backward_fn() -> None:
            self.backward(*loss.backward())

        report = grad_check(loss_fn, backward_fn, self.store, **kwargs)
        self.clear_cache()
        return report

    def parameter_summary(self) -> Dict[str, int]:
        sections = sorted({entry.section for _, entry in self.store.items()})
        return {section: self.store.count(f"{section}.") for section in sections}


def _walk(model: "FreqDino"):
    """Every cache-holding layer of the model"""
    seen = set()
    stack = [model.backbone, model.decoder]
    if model.mfea is not None:
        stack.append(model.mfea)
    if model.fgbr is not None:
        stack.append(model.fgbr)
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if hasattr(node, "_save"):
            yield node
        for child in vars(node).values():
            if isinstance(child, list):
                stack.extend(child)
            elif type(child).__module__.startswith(("core.layers", "network.")):
                stack.append(child)
