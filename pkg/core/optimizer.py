from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from core.params import ParamStore
from models.config import AdamConfig


@dataclass
class AdamState:
    first: Dict[str, np.ndarray] = field(default_factory=dict)
    second: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    epoch: int = 0


class Adam:
    """Bias-corrected Adam with per-epoch exponential learning-rate decay.

    lr(epoch) = lr0 * decay ** epoch. Only trainable entries are touched.
    """

    def __init__(self, store: ParamStore, config: AdamConfig = AdamConfig()):
        self.store = store
        self.config = config
        self.state = AdamState()
        for name in store.trainable_names():
            value = store.value(name)
            self.state.first[name] = np.zeros_like(value)
            self.state.second[name] = np.zeros_like(value)

    @property
    def lr(self) -> float:
        return self.config.lr * self.config.decay ** self.state.epoch

    def set_epoch(self, epoch: int) -> None:
        self.state.epoch = epoch

    def step(self) -> None:
        self.store.require_gradients()
        cfg = self.config
        self.state.step += 1
        t = self.state.step
        lr = self.lr
        correction1 = 1.0 - cfg.beta1 ** t
        correction2 = 1.0 - cfg.beta2 ** t
        for name, entry in self.store.items():
            if not entry.trainable:
                continue
            if name not in self.state.first:
                self.state.first[name] = np.zeros_like(entry.value)
                self.state.second[name] = np.zeros_like(entry.value)
            m = self.state.first[name]
            v = self.state.second[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * entry.grad
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * entry.grad ** 2
            entry.value -= lr * (m / correction1) / (np.sqrt(v / correction2) + cfg.eps)
        self.store.zero_grad()
