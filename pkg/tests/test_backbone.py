import numpy as np
import pytest

from core import ops
from core.errors import ConfigurationError
from core.gradcheck import grad_check
from core.params import ParamStore
from models.config import BackboneConfig
from network.backbone import Backbone


def build(config: BackboneConfig, seed: int = 0):
    store = ParamStore()
    return store, Backbone(store, config, np.random.default_rng(seed))


def adapter_count(store: ParamStore) -> int:
    return sum(entry.value.size for name, entry in store.items() if ".adapter." in name)


class TestBackbone:

    def test_desk_grid(self, rng):
        _, backbone = build(BackboneConfig())
        assert backbone.encode(rng.uniform(size=(2, 1, 64, 64))).shape == (2, 64, 4, 4)

    def test_fidelity_grid(self, rng):
        _, backbone = build(BackboneConfig(depth=1))
        assert backbone.encode(rng.uniform(size=(1, 1, 512, 512))).shape == (1, 64, 32, 32)

    def test_indivisible_input_rejected(self, rng):
        _, backbone = build(BackboneConfig())
        with pytest.raises(ConfigurationError, match="divisible"):
            backbone.encode(rng.uniform(size=(1, 1, 60, 64)))

    def test_adapter_must_be_narrower(self):
        with pytest.raises(ValueError):
            BackboneConfig(embed_dim=16, adapter_dim=16)

    def test_adapter_budget_at_defaults(self):
        store, _ = build(BackboneConfig())
        body = store.count("backbone.") - adapter_count(store)
        assert adapter_count(store) < 0.1 * body

    def test_zero_init_adapter_matches_frozen_body(self, rng):
        store, backbone = build(BackboneConfig(depth=2))
        image = rng.uniform(size=(1, 1, 64, 64))
        expected = ops.conv2d(image, store.value("backbone.patch_embed.weight"),
                              store.value("backbone.patch_embed.bias"), stride=16)
        for i in range(2):
            prefix = f"backbone.block{i}"
            spatial = ops.conv2d(expected, store.value(f"{prefix}.spatial.weight"),
                                 store.value(f"{prefix}.spatial.bias"), pad=1)
            mixed = ops.conv2d(spatial, store.value(f"{prefix}.pointwise.weight"),
                               store.value(f"{prefix}.pointwise.bias"))
            expected = expected + ops.relu(mixed)
        np.testing.assert_allclose(backbone.encode(image), expected, atol=1e-12)

    def test_deterministic(self, rng):
        image = rng.uniform(size=(1, 1, 64, 64))
        _, first = build(BackboneConfig(), seed=3)
        _, second = build(BackboneConfig(), seed=3)
        np.testing.assert_array_equal(first.encode(image), second.encode(image))

    def test_frozen_body_gets_zero_gradient(self, rng):
        store, backbone = build(BackboneConfig())
        out = backbone.encode(rng.uniform(size=(1, 1, 64, 64)))
        backbone.backward(rng.normal(size=out.shape))
        for name, entry in store.items():
            if ".adapter." not in name:
                assert not entry.trainable
                np.testing.assert_array_equal(entry.grad, 0.0)
        assert np.any(store.grad("backbone.block0.adapter.up.weight") != 0.0)

    def test_unfrozen_body_is_trainable(self):
        store, _ = build(BackboneConfig(freeze_body=False))
        assert store["backbone.patch_embed.weight"].trainable

    def test_adapter_gradients(self, rng):
        config = BackboneConfig(patch=4, embed_dim=16, adapter_dim=4, depth=2)
        store, backbone = build(config)
        # move the up-projections off zero so every adapter weight sees gradient
        for i in range(2):
            store.set_value(f"backbone.block{i}.adapter.up.weight",
                            rng.normal(scale=0.3, size=store.value(f"backbone.block{i}.adapter.up.weight").shape))
        image = rng.uniform(size=(1, 1, 16, 16))
        target = rng.normal(size=(1, 16, 4, 4))

        def loss_fn():
            return float(np.sum(backbone.encode(image) * target))

        def backward_fn():
            backbone.backward(target)

        report = grad_check(loss_fn, backward_fn, store)
        assert report.passed, report.failures()
        assert any("patch_embed" in name for name in report.skipped_frozen)
