import numpy as np
import pytest

from core.errors import UsageError
from core.optimizer import Adam
from core.params import ParamStore
from models.config import AdamConfig


def scalar_store(value: float = 0.0) -> ParamStore:
    store = ParamStore()
    store.add("theta", np.array([value]))
    return store


def step_with(store: ParamStore, optimizer: Adam, grads: dict) -> None:
    for name, grad in grads.items():
        store.accumulate(name, np.asarray(grad, dtype=np.float64))
    store.mark_backward()
    optimizer.step()


class TestAdam:

    def test_first_step_moves_by_lr(self):
        store = scalar_store()
        optimizer = Adam(store)
        step_with(store, optimizer, {"theta": [1.0]})
        assert store.value("theta")[0] == pytest.approx(-1e-4, rel=1e-7)

    def test_zero_gradient_leaves_parameter(self):
        store = scalar_store(0.7)
        optimizer = Adam(store)
        step_with(store, optimizer, {"theta": [0.0]})
        assert store.value("theta")[0] == 0.7

    def test_epoch_decay(self):
        optimizer = Adam(scalar_store())
        assert optimizer.lr == 1e-4
        optimizer.set_epoch(1)
        assert optimizer.lr == pytest.approx(1e-4 * 0.98, rel=1e-15)
        optimizer.set_epoch(10)
        assert optimizer.lr == pytest.approx(1e-4 * 0.98 ** 10, rel=1e-15)

    def test_frozen_entries_untouched(self, rng):
        store = ParamStore()
        store.add("theta", rng.normal(size=3))
        frozen = store.add("body", rng.normal(size=3), trainable=False).copy()
        optimizer = Adam(store)
        for _ in range(5):
            step_with(store, optimizer, {"theta": rng.normal(size=3), "body": rng.normal(size=3)})
        np.testing.assert_array_equal(store.value("body"), frozen)
        assert "body" not in optimizer.state.first

    def test_step_before_backward(self):
        with pytest.raises(UsageError):
            Adam(scalar_store()).step()

    def test_step_clears_gradients(self):
        store = scalar_store()
        optimizer = Adam(store)
        step_with(store, optimizer, {"theta": [2.0]})
        assert store.grad("theta")[0] == 0.0
        with pytest.raises(UsageError):
            optimizer.step()

    def test_moments_track_parameter_shapes(self, rng):
        store = ParamStore()
        store.add("w", rng.normal(size=(2, 3)))
        optimizer = Adam(store, AdamConfig(lr=1e-2))
        step_with(store, optimizer, {"w": np.ones((2, 3))})
        assert optimizer.state.first["w"].shape == (2, 3)
        assert optimizer.state.step == 1
        np.testing.assert_allclose(optimizer.state.first["w"], 0.1)
        np.testing.assert_allclose(optimizer.state.second["w"], 0.001)

    def test_deterministic_trajectory(self, rng):
        grads = [rng.normal(size=4) for _ in range(10)]
        finals = []
        for _ in range(2):
            store = ParamStore()
            store.add("theta", np.ones(4))
            optimizer = Adam(store, AdamConfig(lr=1e-2))
            for grad in grads:
                step_with(store, optimizer, {"theta": grad})
            finals.append(store.value("theta").copy())
        np.testing.assert_array_equal(finals[0], finals[1])
