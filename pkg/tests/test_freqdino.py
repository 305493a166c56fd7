import numpy as np
import pytest

from core.errors import UsageError
from network.freqdino import FreqDino

from conftest import random_mask, tiny_config


class TestFreqDino:

    def test_prediction_matches_input_resolution(self, config, rng):
        model = FreqDino(config)
        prediction = model.predict(rng.uniform(size=(2, 1, 32, 32)))
        assert prediction.mask_logits.shape == (2, 1, 32, 32)
        assert prediction.boundary_logits.shape == (2, 1, 32, 32)

    @pytest.mark.parametrize("toggles, sections", [
        ((False, False, False), {"backbone", "decoder"}),
        ((True, False, False), {"backbone", "mfea", "decoder"}),
        ((True, True, False), {"backbone", "mfea", "fgbr", "decoder"}),
        ((True, True, True), {"backbone", "mfea", "fgbr", "mbgd"}),
    ])
    def test_toggles_select_modules(self, rng, toggles, sections):
        use_mfea, use_fgbr, use_mbgd = toggles
        model = FreqDino(tiny_config(use_mfea=use_mfea, use_fgbr=use_fgbr, use_mbgd=use_mbgd))
        assert set(model.parameter_summary()) == sections
        prediction = model.predict(rng.uniform(size=(1, 1, 32, 32)))
        assert (prediction.boundary_logits is not None) == use_mbgd

    def test_same_seed_same_model(self, config, rng):
        images = rng.uniform(size=(1, 1, 32, 32))
        first = FreqDino(config).predict(images)
        second = FreqDino(config).predict(images)
        np.testing.assert_array_equal(first.mask_logits, second.mask_logits)
        assert not np.array_equal(FreqDino(tiny_config(seed=1)).predict(images).mask_logits, first.mask_logits)

    def test_backward_returns_image_gradient(self, config, rng):
        model = FreqDino(config)
        images = rng.uniform(size=(1, 1, 32, 32))
        prediction = model.forward(images)
        grad = model.backward(np.ones_like(prediction.mask_logits), np.ones_like(prediction.boundary_logits))
        assert grad.shape == images.shape
        assert model.store.has_gradients

    def test_predict_discards_caches(self, config, rng):
        model = FreqDino(config)
        prediction = model.predict(rng.uniform(size=(1, 1, 32, 32)))
        with pytest.raises(UsageError):
            model.backward(np.ones_like(prediction.mask_logits))

    @pytest.mark.parametrize("use_mbgd", [True, False])
    def test_full_model_gradients(self, rng, use_mbgd):
        model = FreqDino(tiny_config(use_mbgd=use_mbgd))
        images = rng.uniform(size=(1, 1, 32, 32))
        masks = random_mask(rng, (1, 1, 32, 32), density=0.3)
        report = model.grad_check(images, masks, coords=4)
        assert report.passed, report.failures()
        assert report.loss is not None
        assert any(name.startswith("backbone.patch_embed") for name in report.skipped_frozen)

    @pytest.mark.slow
    def test_full_model_gradients_on_eight_by_eight_grid(self, rng):
        model = FreqDino(tiny_config(image_size=64))
        images = rng.uniform(size=(1, 1, 64, 64))
        masks = random_mask(rng, (1, 1, 64, 64), density=0.3)
        assert model.inspect(images).f_spatial.shape == (1, 16, 8, 8)
        report = model.grad_check(images, masks, eps=1e-5, tol=1e-4, coords=32)
        assert report.passed, report.failures()
        for entry in report.entries:
            size = model.store.value(entry.name).size
            assert entry.checked == min(size, 32)

    def test_inspect(self, config, rng):
        model = FreqDino(config)
        inspection = model.inspect(rng.uniform(size=(1, 1, 32, 32)))
        assert set(inspection.scales) == {"fine", "coarse"}
        assert inspection.scales["fine"].bands.ll.shape == (1, 16, 2, 2)
        assert inspection.scales["coarse"].bands.ll.shape == (1, 16, 1, 1)
        for scale in inspection.scales.values():
            assert scale.attn_boundary.shape == scale.attn_structure.shape == (1, 1, 4, 4)
        assert inspection.f_spatial.shape == (1, 16, 4, 4)
        assert inspection.prototype.proto.shape == (1, 1, 64)
        assert inspection.attention.shape == (1, 8, 16, 1)
        np.testing.assert_allclose(inspection.attention, 1.0, atol=1e-15)

    def test_inspect_baseline_has_no_frequency_maps(self, rng):
        inspection = FreqDino(tiny_config(use_mfea=False, use_fgbr=False)).inspect(rng.uniform(size=(1, 1, 32, 32)))
        assert inspection.scales == {}
        assert inspection.prototype is None and inspection.attention is None
