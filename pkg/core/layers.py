"""Stateful layers over a shared ParamStore.

A layer caches what its backward needs during ``forward`` and releases the
cache in ``backward``; a second backward without a new forward raises
``UsageError``.
"""
from typing import Any, Optional

import numpy as np

from core import ops
from core.errors import UsageError
from core.params import ParamStore


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


class Layer:
    """Base class handling the forward cache"""

    def __init__(self, store: ParamStore, name: str):
        self.store = store
        self.name = name
        self._cache: Optional[Any] = None

    def _save(self, cache: Any) -> None:
        self._cache = cache

    def _pop(self) -> Any:
        if self._cache is None:
            raise UsageError(f"{self.name}: backward called without a recorded forward")
        cache, self._cache = self._cache, None
        return cache

    def _param(self, suffix: str) -> np.ndarray:
        return self.store.value(f"{self.name}.{suffix}")

    def _accumulate(self, suffix: str, grad: np.ndarray) -> None:
        self.store.accumulate(f"{self.name}.{suffix}", grad)


class Conv2d(Layer):
    def __init__(
        self,
        store: ParamStore,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel: int,
        rng: np.random.Generator,
        stride: int = 1,
        pad: Optional[int] = None,
        trainable: bool = True,
        section: str = "",
        zero_init: bool = False
    ):
        super().__init__(store, name)
        self.stride = stride
        self.pad = (kernel - 1) // 2 if pad is None else pad
        shape = (out_channels, in_channels, kernel, kernel)
        weight = np.zeros(shape) if zero_init else he_normal(rng, shape, in_channels * kernel * kernel)
        store.add(f"{name}.weight", weight, trainable=trainable, section=section)
        store.add(f"{name}.bias", np.zeros(out_channels), trainable=trainable, section=section)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._save(x)
        return ops.conv2d(x, self._param("weight"), self._param("bias"), self.stride, self.pad)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._pop()
        dx, dw, db = ops.conv2d_backward(grad, x, self._param("weight"), self.stride, self.pad)
        self._accumulate("weight", dw)
        self._accumulate("bias", db)
        return dx


class ConvTranspose2d(Layer):
    """2x2 stride-2 transposed convolution"""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        in_channels: int,
        out_channels: int,
        rng: np.random.Generator,
        trainable: bool = True,
        section: str = ""
    ):
        super().__init__(store, name)
        shape = (in_channels, out_channels, 2, 2)
        store.add(f"{name}.weight", he_normal(rng, shape, in_channels), trainable=trainable, section=section)
        store.add(f"{name}.bias", np.zeros(out_channels), trainable=trainable, section=section)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._save(x)
        return ops.transposed_conv2d(x, self._param("weight"), self._param("bias"))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._pop()
        dx, dw, db = ops.transposed_conv2d_backward(grad, x, self._param("weight"))
        self._accumulate("weight", dw)
        self._accumulate("bias", db)
        return dx


class Linear(Layer):
    """y = x @ W + b over the last axis; W is (in, out)"""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        bias: bool = True,
        trainable: bool = True,
        section: str = ""
    ):
        super().__init__(store, name)
        self.has_bias = bias
        weight = rng.normal(0.0, np.sqrt(1.0 / in_features), size=(in_features, out_features))
        store.add(f"{name}.weight", weight, trainable=trainable, section=section)
        if bias:
            store.add(f"{name}.bias", np.zeros(out_features), trainable=trainable, section=section)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._save(x)
        out = x @ self._param("weight")
        if self.has_bias:
            out = out + self._param("bias")
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._pop()
        weight = self._param("weight")
        flat_x = x.reshape(-1, x.shape[-1])
        flat_g = grad.reshape(-1, grad.shape[-1])
        self._accumulate("weight", flat_x.T @ flat_g)
        if self.has_bias:
            self._accumulate("bias", flat_g.sum(axis=0))
        return grad @ weight.T


class ReLU(Layer):
    def __init__(self, name: str = "relu"):
        self.name = name
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._save(x)
        return ops.relu(x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return ops.relu_backward(grad, self._pop())


class Sigmoid(Layer):
    def __init__(self, name: str = "sigmoid"):
        self.name = name
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = ops.sigmoid(x)
        self._save(out)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return ops.sigmoid_backward(grad, self._pop())


class Sequential:
    def __init__(self, *layers):
        self.layers = list(layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad
