import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from api import main as api
from network.freqdino import FreqDino
from services.checkpoint_service import CheckpointService


def png_bytes(array: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(array.astype(np.uint8)).save(buffer, format="PNG")
    return buffer.getvalue()


@pytest.fixture
def client(config, monkeypatch):
    monkeypatch.setattr(api.settings, "checkpoint", None)
    api.use_model(FreqDino(config))
    yield TestClient(api.app)
    api.use_model(None)


@pytest.fixture
def upload(rng):
    return {"image": ("scan.png", png_bytes(rng.integers(0, 256, size=(32, 32))), "image/png")}


class TestApi:

    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "healthy"
        assert body["model_loaded"] is True

    def test_config(self, client, config):
        body = client.get("/config").json()
        assert body["config_hash"] == config.config_hash()
        assert body["constants"]["lambda_b"] == 0.3
        assert set(body["parameters"]) == {"backbone", "mfea", "fgbr", "mbgd"}

    def test_infer(self, client, upload):
        response = client.post("/infer", files=upload)
        assert response.status_code == 200
        body = response.json()
        assert (body["height"], body["width"]) == (32, 32)
        assert 0.0 <= body["foreground_fraction"] <= 1.0
        assert len(body["prototype"]) == 1 and len(body["prototype"][0]) == 64

    def test_infer_mask_png(self, client, upload):
        response = client.post("/infer/mask", files=upload)
        assert response.headers["content-type"] == "image/png"
        with Image.open(io.BytesIO(response.content)) as mask:
            assert mask.size == (32, 32)
            assert set(np.unique(np.asarray(mask))) <= {0, 255}

    def test_unreadable_upload(self, client):
        response = client.post("/infer", files={"image": ("scan.png", b"not an image", "image/png")})
        assert response.status_code == 400

    def test_indivisible_image(self, client, rng):
        files = {"image": ("scan.png", png_bytes(rng.integers(0, 256, size=(30, 30))), "image/png")}
        assert client.post("/infer", files=files).status_code == 422

    def test_no_model(self, monkeypatch, upload):
        monkeypatch.setattr(api.settings, "checkpoint", None)
        api.use_model(None)
        client = TestClient(api.app)
        assert client.get("/health").json()["model_loaded"] is False
        assert client.post("/infer", files=upload).status_code == 404

    def test_loads_configured_checkpoint(self, tmp_path, config, monkeypatch, upload):
        path = tmp_path / "best.ckpt"
        CheckpointService().save(path, FreqDino(config))
        monkeypatch.setattr(api.settings, "checkpoint", path)
        api.use_model(None)
        try:
            assert TestClient(api.app).post("/infer", files=upload).status_code == 200
        finally:
            api.use_model(None)

    def test_corrupt_checkpoint(self, tmp_path, monkeypatch, upload):
        path = tmp_path / "best.ckpt"
        path.write_bytes(b"not a checkpoint")
        monkeypatch.setattr(api.settings, "checkpoint", path)
        api.use_model(None)
        assert TestClient(api.app).post("/infer", files=upload).status_code == 422
