from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from core.errors import ConfigurationError, UsageError


@dataclass
class ParamEntry:
    """Learnable tensor with its gradient slot"""
    value: np.ndarray
    grad: np.ndarray
    trainable: bool = True
    section: str = ""


class ParamStore:
    """Named, shaped parameters shared by every layer of a model.

    Layers read ``value`` at forward time, so in-place perturbation (as done by
    grad_check) is seen by the next forward. Frozen entries never accumulate
    gradient.
    """

    def __init__(self):
        self._entries: Dict[str, ParamEntry] = {}
        self._has_gradients = False

    def add(
        self,
        name: str,
        value: np.ndarray,
        trainable: bool = True,
        section: str = ""
    ) -> np.ndarray:
        """Register a parameter and return its value array"""
        if name in self._entries:
            raise ConfigurationError(f"parameter {name!r} registered twice")
        value = np.array(value, dtype=np.float64)
        self._entries[name] = ParamEntry(
            value=value,
            grad=np.zeros_like(value),
            trainable=trainable,
            section=section or name.split(".", 1)[0]
        )
        return value

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, name: str) -> ParamEntry:
        return self._entries[name]

    def get(self, name: str) -> Optional[ParamEntry]:
        return self._entries.get(name)

    def value(self, name: str) -> np.ndarray:
        return self._entries[name].value

    def grad(self, name: str) -> np.ndarray:
        return self._entries[name].grad

    def items(self) -> Iterator[Tuple[str, ParamEntry]]:
        return iter(self._entries.items())

    def names(self) -> List[str]:
        return list(self._entries)

    def trainable_names(self) -> List[str]:
        return [name for name, entry in self._entries.items() if entry.trainable]

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        """Add ``grad`` into the slot of ``name``; no-op for frozen entries"""
        entry = self._entries[name]
        if not entry.trainable:
            return
        if grad.shape != entry.value.shape:
            raise ConfigurationError(
                f"gradient shape {grad.shape} does not match parameter {name!r} {entry.value.shape}"
            )
        entry.grad += grad

    def set_value(self, name: str, value: np.ndarray) -> None:
        """Overwrite a parameter in place, keeping array identity"""
        entry = self._entries[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != entry.value.shape:
            raise ConfigurationError(
                f"value shape {value.shape} does not match parameter {name!r} {entry.value.shape}"
            )
        entry.value[...] = value

    def set_trainable(self, prefix: str, trainable: bool) -> None:
        for name, entry in self._entries.items():
            if name.startswith(prefix):
                entry.trainable = trainable
                if not trainable:
                    entry.grad[...] = 0.0

    def zero_grad(self) -> None:
        for entry in self._entries.values():
            entry.grad[...] = 0.0
        self._has_gradients = False

    def mark_backward(self) -> None:
        self._has_gradients = True

    @property
    def has_gradients(self) -> bool:
        return self._has_gradients

    def require_gradients(self) -> None:
        if not self._has_gradients:
            raise UsageError("no gradients populated; run backward before stepping")

    def count(self, prefix: str = "", trainable: Optional[bool] = None) -> int:
        """Number of scalar parameters under ``prefix``"""
        total = 0
        for name, entry in self._entries.items():
            if not name.startswith(prefix):
                continue
            if trainable is not None and entry.trainable != trainable:
                continue
            total += entry.value.size
        return total
