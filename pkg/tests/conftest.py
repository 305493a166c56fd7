import numpy as np
import pytest

from models.config import RunConfig
from services.dataset_service import DatasetService


def tiny_config(**overrides) -> RunConfig:
    """32x32 images, patch 8, three up-blocks, C=16: a 4x4 feature grid"""
    values = dict(
        image_size=32,
        patch=8,
        num_up_blocks=3,
        embed_dim=16,
        adapter_dim=4,
        depth=1,
        heads=8,
        batch_size=4,
        epochs=2,
        lr=3e-3,
        seed=0
    )
    values.update(overrides)
    return RunConfig(**values)


def random_mask(rng: np.random.Generator, shape, density: float = 0.5) -> np.ndarray:
    return (rng.uniform(size=shape) < density).astype(np.uint8)


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("FREQSEG_SEED", "FREQSEG_CHECKPOINT", "FREQSEG_IMAGE_SIZE", "FREQSEG_LAMBDA_B", "FREQSEG_USE_MBGD"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def config():
    return tiny_config()


@pytest.fixture
def tiny_dataset(tmp_path, config):
    """Ten 32x32 samples split 8:1:1"""
    service = DatasetService(tmp_path / "data")
    service.generate(10, config)
    return service
