import numpy as np
import pytest

from core.errors import ConfigurationError
from core.gradcheck import grad_check
from core.params import ParamStore


def quadratic(store: ParamStore, wrong: bool = False):
    def loss_fn():
        return float(np.sum(store.value("theta") ** 2))

    def backward_fn():
        factor = 3.0 if wrong else 2.0
        store.accumulate("theta", factor * store.value("theta"))

    return loss_fn, backward_fn


class TestGradCheck:

    def test_quadratic_passes(self, rng):
        store = ParamStore()
        store.add("theta", rng.normal(size=(4, 5)))
        report = grad_check(*quadratic(store), store)
        assert report.passed
        assert report.entries[0].checked == 20
        assert report.entries[0].max_rel_error < 1e-8

    def test_wrong_gradient_fails(self, rng):
        store = ParamStore()
        store.add("theta", rng.normal(size=10) + 2.0)
        report = grad_check(*quadratic(store, wrong=True), store)
        assert not report.passed
        assert [entry.name for entry in report.failures()] == ["theta"]

    def test_subsamples_large_tensors(self, rng):
        store = ParamStore()
        store.add("theta", rng.normal(size=(20, 20)))
        report = grad_check(*quadratic(store), store, coords=32)
        assert report.entries[0].checked == 32

    def test_frozen_entries_skipped(self, rng):
        store = ParamStore()
        store.add("theta", rng.normal(size=3))
        store.add("body", rng.normal(size=3), trainable=False)
        loss_fn, backward_fn = quadratic(store)

        def loss_with_body():
            return loss_fn() + float(np.sum(store.value("body") ** 2))

        report = grad_check(loss_with_body, backward_fn, store)
        assert report.passed
        assert report.skipped_frozen == ["body"]
        assert [entry.name for entry in report.entries] == ["theta"]

    def test_perturbation_restored(self, rng):
        store = ParamStore()
        value = rng.normal(size=6)
        store.add("theta", value)
        grad_check(*quadratic(store), store)
        np.testing.assert_array_equal(store.value("theta"), value)

    @pytest.mark.parametrize("eps", [1e-8, 1e-2])
    def test_step_out_of_range(self, eps):
        store = ParamStore()
        store.add("theta", np.zeros(1))
        with pytest.raises(ConfigurationError):
            grad_check(*quadratic(store), store, eps=eps)

    def test_non_finite_reported_not_raised(self):
        store = ParamStore()
        store.add("theta", np.array([0.0]))

        def loss_fn():
            theta = store.value("theta")[0]
            return float(np.log(theta)) if theta > 0 else float("nan")

        def backward_fn():
            pass

        report = grad_check(loss_fn, backward_fn, store)
        assert not report.passed
        assert report.loss is None
        assert report.entries[0].non_finite
