import zipfile

import numpy as np
import pytest

from core.errors import CheckpointError, ConfigurationError
from core.optimizer import Adam
from models.dataset import Split
from network.freqdino import FreqDino
from network.supervision import MultiTaskLoss
from services.checkpoint_service import CheckpointService
from services.evaluation_service import EvaluationService

from conftest import random_mask, tiny_config


def trained_step(model: FreqDino, rng) -> Adam:
    optimizer = Adam(model.store, model.config.adam)
    loss = MultiTaskLoss(model.config.loss)
    loss.forward(model.forward(rng.uniform(size=(2, 1, 32, 32))), random_mask(rng, (2, 1, 32, 32), 0.3))
    model.backward(*loss.backward())
    optimizer.step()
    return optimizer


def rewrite_member(path, member_filter, transform):
    with zipfile.ZipFile(path) as archive:
        members = {name: archive.read(name) for name in archive.namelist()}
    for name in members:
        if member_filter(name):
            members[name] = transform(members[name])
            break
    with zipfile.ZipFile(path, "w") as archive:
        for name, payload in members.items():
            archive.writestr(name, payload)


class TestCheckpointService:

    def test_round_trip_restores_every_tensor(self, tmp_path, config, rng):
        model = FreqDino(config)
        trained_step(model, rng)
        service = CheckpointService()
        manifest = service.save(tmp_path / "model.ckpt", model, epoch=3, best_val_dice=0.5)
        restored, optimizer, loaded = service.restore(tmp_path / "model.ckpt")
        assert optimizer is None
        assert (loaded.epoch, loaded.best_val_dice, loaded.config_hash) == (3, 0.5, config.config_hash())
        assert len(manifest.tensors) == len(model.store)
        for name, entry in model.store.items():
            np.testing.assert_array_equal(restored.store.value(name), entry.value)
            assert restored.store[name].trainable == entry.trainable

    def test_evaluation_is_bitwise_reproduced(self, tmp_path, config, tiny_dataset, rng):
        model = FreqDino(config)
        trained_step(model, rng)
        service = CheckpointService()
        service.save(tmp_path / "model.ckpt", model)
        restored, _, _ = service.restore(tmp_path / "model.ckpt")
        data = tiny_dataset.load_split(Split.TRAIN)
        evaluator = EvaluationService()
        before = evaluator.evaluate(model, data)
        after = evaluator.evaluate(restored, data)
        assert before.model_dump() == after.model_dump()
        np.testing.assert_array_equal(model.predict(data.images).mask_logits,
                                      restored.predict(data.images).mask_logits)

    def test_members_are_sectioned(self, tmp_path, config):
        model = FreqDino(config)
        CheckpointService().save(tmp_path / "model.ckpt", model)
        with zipfile.ZipFile(tmp_path / "model.ckpt") as archive:
            names = archive.namelist()
        assert "MANIFEST.json" in names
        assert {name.split("/", 1)[0] for name in names if name != "MANIFEST.json"} == {
            "backbone", "mfea", "fgbr", "mbgd"
        }

    def test_tampered_tensor_detected(self, tmp_path, config):
        path = tmp_path / "model.ckpt"
        CheckpointService().save(path, FreqDino(config))
        rewrite_member(path, lambda name: name.startswith("mfea/"),
                       lambda payload: payload[:-1] + bytes([payload[-1] ^ 0xFF]))
        with pytest.raises(CheckpointError, match="digest"):
            CheckpointService().read(path)

    def test_not_a_container(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_bytes(b"not a zip")
        with pytest.raises(CheckpointError):
            CheckpointService().read(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            CheckpointService().read(tmp_path / "absent.ckpt")

    def test_mismatched_model_rejected(self, tmp_path, config):
        service = CheckpointService()
        service.save(tmp_path / "model.ckpt", FreqDino(config))
        _, tensors = service.read(tmp_path / "model.ckpt")
        with pytest.raises(ConfigurationError):
            service.load_into(FreqDino(tiny_config(use_mbgd=False)), tensors)

    def test_optimizer_state_round_trip(self, tmp_path, config, rng):
        model = FreqDino(config)
        optimizer = trained_step(model, rng)
        optimizer.set_epoch(1)
        service = CheckpointService()
        service.save(tmp_path / "last.ckpt", model, optimizer, epoch=1)
        _, restored, _ = service.restore(tmp_path / "last.ckpt", with_optimizer=True)
        assert (restored.state.step, restored.state.epoch) == (1, 1)
        assert set(restored.state.first) == set(optimizer.state.first)
        for name in optimizer.state.first:
            np.testing.assert_array_equal(restored.state.first[name], optimizer.state.first[name])
            np.testing.assert_array_equal(restored.state.second[name], optimizer.state.second[name])

    def test_missing_optimizer_moments(self, tmp_path, config):
        service = CheckpointService()
        service.save(tmp_path / "best.ckpt", FreqDino(config))
        with pytest.raises(CheckpointError, match="optimizer"):
            service.restore(tmp_path / "best.ckpt", with_optimizer=True)

    def test_environment_does_not_rewrite_stored_config(self, tmp_path, config, monkeypatch):
        service = CheckpointService()
        service.save(tmp_path / "model.ckpt", FreqDino(config))
        monkeypatch.setenv("FREQSEG_SEED", "5")
        restored, _, _ = service.restore(tmp_path / "model.ckpt")
        assert restored.config == config
