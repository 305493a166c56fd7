import json

import pytest

from cli.main import main, parse_overrides
from core.errors import ConfigurationError
from core.tensor_io import load_tensor
from models.report import GradCheckReport
from network.freqdino import FreqDino
from services.checkpoint_service import CheckpointService
from services.image_io import write_image

from conftest import tiny_config

TINY = ["--quiet", "--set", "image_size=32", "--set", "patch=8", "--set", "num_up_blocks=3",
        "--set", "embed_dim=16", "--set", "adapter_dim=4", "--set", "depth=1", "--set", "epochs=1",
        "--set", "batch_size=4", "--set", "lr=0.003"]


@pytest.fixture
def image_path(tmp_path, rng):
    path = tmp_path / "scan.pgm"
    write_image(path, rng.uniform(size=(32, 32)))
    return path


def last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


class TestCli:

    def test_gen(self, tmp_path, capsys):
        assert main(TINY + ["gen", "--out", str(tmp_path / "data"), "-n", "10"]) == 0
        assert last_json(capsys)["splits"] == {"train": 8, "val": 1, "test": 1}
        assert (tmp_path / "data" / "manifest.json").is_file()

    def test_train_eval_infer(self, tmp_path, capsys, image_path):
        data, run = str(tmp_path / "data"), tmp_path / "run"
        assert main(TINY + ["gen", "--out", data, "-n", "10"]) == 0
        assert main(TINY + ["train", "--data", data, "--out", str(run)]) == 0
        assert last_json(capsys)["epochs"] == 1

        report = tmp_path / "eval.jsonl"
        assert main(["eval", "--checkpoint", str(run / "best.ckpt"), "--data", data, "--split", "train",
                     "--report", str(report)]) == 0
        assert last_json(capsys)["count"] == 8
        assert len(report.read_text().splitlines()) == 9

        out = tmp_path / "out"
        assert main(["infer", "--checkpoint", str(run / "best.ckpt"), "--image", str(image_path),
                     "--out", str(out), "--dump-bands", "--png"]) == 0
        assert (out / "scan_mask.png").is_file()
        assert (out / "scan_coarse_attn_structure.png").is_file()

    def test_dependency_violation_exits_2(self, tmp_path):
        argv = ["--set", "use_mfea=false", "gen", "--out", str(tmp_path / "data"), "-n", "2"]
        assert main(argv) == 2
        assert not (tmp_path / "data").exists()

    def test_bad_override_exits_2(self, tmp_path):
        assert main(["--set", "seed", "gen", "--out", str(tmp_path), "-n", "2"]) == 2

    def test_missing_checkpoint_exits_1(self, tmp_path, image_path):
        argv = ["infer", "--checkpoint", str(tmp_path / "absent.ckpt"), "--image", str(image_path),
                "--out", str(tmp_path / "out")]
        assert main(argv) == 1

    def test_dump_and_load(self, tmp_path, capsys, image_path):
        tensor = tmp_path / "scan.fqt"
        assert main(["dump", "--image", str(image_path), "--out", str(tensor)]) == 0
        assert load_tensor(tensor).shape == (1, 1, 32, 32)
        capsys.readouterr()
        assert main(["load", str(tensor)]) == 0
        stats = last_json(capsys)
        assert stats["shape"] == [1, 1, 32, 32]
        assert 0.0 <= stats["min"] <= stats["mean"] <= stats["max"] <= 1.0

    def test_dwt(self, tmp_path, image_path):
        assert main(["dwt", "--image", str(image_path), "--out", str(tmp_path / "bands"), "--levels", "2"]) == 0
        written = sorted(p.name for p in (tmp_path / "bands").iterdir())
        assert len(written) == 8
        assert "scan_level1_hh.pgm" in written

    def test_dwt_with_checkpoint_dumps_attention(self, tmp_path, image_path):
        checkpoint = tmp_path / "model.ckpt"
        CheckpointService().save(checkpoint, FreqDino(tiny_config()))
        out = tmp_path / "bands"
        assert main(["dwt", "--image", str(image_path), "--out", str(out), "--checkpoint", str(checkpoint)]) == 0
        written = sorted(p.name for p in out.iterdir())
        assert len(written) == 12
        assert {"scan_fine_attn_boundary.pgm", "scan_coarse_attn_structure.pgm", "scan_fine_hh.pgm"} <= set(written)

    def test_truncated_tensor_exits_2(self, tmp_path):
        path = tmp_path / "short.fqt"
        path.write_bytes(b"FQT1\x02\x00")
        assert main(["load", str(path)]) == 2

    def test_failed_gradcheck_exits_2(self, monkeypatch, capsys):
        failed = GradCheckReport(eps=1e-5, tol=1e-4, passed=False)
        monkeypatch.setattr(FreqDino, "grad_check", lambda self, *args, **kwargs: failed)
        assert main(TINY + ["gradcheck"]) == 2
        assert json.loads(capsys.readouterr().out)["passed"] is False

    def test_gradcheck(self, capsys):
        assert main(TINY + ["gradcheck"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["passed"] is True
        assert max(entry["checked"] for entry in report["entries"]) == 32

    @pytest.mark.slow
    def test_gradcheck_on_eight_by_eight_grid(self, capsys):
        assert main(TINY + ["--set", "image_size=64", "gradcheck", "--coords", "32"]) == 0
        assert json.loads(capsys.readouterr().out)["passed"] is True


def test_parse_overrides():
    assert parse_overrides(["seed=3", " lr = 0.1"]) == {"seed": "3", "lr": "0.1"}
    with pytest.raises(ConfigurationError):
        parse_overrides(["seed"])
