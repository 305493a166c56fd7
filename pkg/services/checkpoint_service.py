import hashlib
import io
import logging
import zipfile
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from core.errors import CheckpointError, ConfigurationError
from core.optimizer import Adam
from core.tensor_io import decode_tensor, encode_tensor
from models.checkpoint import CHECKPOINT_FORMAT, CheckpointManifest, TensorEntry
from models.config import RunConfig
from network.freqdino import FreqDino

logger = logging.getLogger(__name__)

OPTIMIZER_SECTION = "optimizer"


class CheckpointService:
    """Sectioned ZIP container of FQT1 tensors with a digest-bearing manifest"""

    def compute_hash(self, payload: bytes) -> str:
        return hashlib.sha256(payload).hexdigest()

    def save(
        self,
        path: Union[str, Path],
        model: FreqDino,
        optimizer: Optional[Adam] = None,
        epoch: int = 0,
        best_val_dice: Optional[float] = None
    ) -> CheckpointManifest:
        manifest = CheckpointManifest(
            config=model.config.model_dump(),
            config_hash=model.config.config_hash(),
            epoch=epoch,
            optimizer_step=optimizer.state.step if optimizer else 0,
            best_val_dice=best_val_dice
        )
        buffer = io.BytesIO()
        with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:
            for name, entry in model.store.items():
                manifest.tensors.append(
                    self._write_tensor(archive, name, entry.section, entry.value, entry.trainable)
                )
            if optimizer is not None:
                for name in sorted(optimizer.state.first):
                    manifest.tensors.append(self._write_tensor(
                        archive, f"{name}.m", OPTIMIZER_SECTION, optimizer.state.first[name], True
                    ))
                    manifest.tensors.append(self._write_tensor(
                        archive, f"{name}.v", OPTIMIZER_SECTION, optimizer.state.second[name], True
                    ))
            archive.writestr("MANIFEST.json", manifest.model_dump_json(indent=2))

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(buffer.getvalue())
        logger.info("saved checkpoint %s epoch=%d tensors=%d", path, epoch, len(manifest.tensors))
        return manifest

    def _write_tensor(
        self,
        archive: zipfile.ZipFile,
        name: str,
        section: str,
        value: np.ndarray,
        trainable: bool
    ) -> TensorEntry:
        payload = encode_tensor(value)
        member = f"{section}/{name}.fqt"
        archive.writestr(member, payload)
        return TensorEntry(
            name=name,
            section=section,
            shape=list(value.shape),
            trainable=trainable,
            path=member,
            sha256=self.compute_hash(payload)
        )

    def read(self, path: Union[str, Path]) -> Tuple[CheckpointManifest, Dict[str, np.ndarray]]:
        """Load manifest and tensors, verifying every digest"""
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        try:
            with zipfile.ZipFile(path) as archive:
                manifest = CheckpointManifest.model_validate_json(archive.read("MANIFEST.json"))
                if manifest.format != CHECKPOINT_FORMAT:
                    raise CheckpointError(f"unsupported checkpoint format {manifest.format!r}")
                tensors: Dict[str, np.ndarray] = {}
                for entry in manifest.tensors:
                    payload = archive.read(entry.path)
                    if self.compute_hash(payload) != entry.sha256:
                        raise CheckpointError(f"digest mismatch for {entry.name} in {path}")
                    value = decode_tensor(payload)
                    if list(value.shape) != entry.shape:
                        raise CheckpointError(f"shape mismatch for {entry.name}: {value.shape} vs {entry.shape}")
                    key = f"{OPTIMIZER_SECTION}/{entry.name}" if entry.section == OPTIMIZER_SECTION else entry.name
                    tensors[key] = value
        except (zipfile.BadZipFile, KeyError) as exc:
            raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc
        return manifest, tensors

    def config_of(self, manifest: CheckpointManifest) -> RunConfig:
        # validated directly so environment overrides do not rewrite a stored run
        return RunConfig.model_validate(manifest.config)

    def restore(
        self,
        path: Union[str, Path],
        with_optimizer: bool = False
    ) -> Tuple[FreqDino, Optional[Adam], CheckpointManifest]:
        """Rebuild the model (and optionally its optimizer) from a checkpoint"""
        manifest, tensors = self.read(path)
        model = FreqDino(self.config_of(manifest))
        self.load_into(model, tensors)
        optimizer = None
        if with_optimizer:
            optimizer = Adam(model.store, model.config.adam)
            self.load_optimizer(optimizer, tensors, manifest)
        logger.info("restored %s epoch=%d", path, manifest.epoch)
        return model, optimizer, manifest

    def load_into(self, model: FreqDino, tensors: Dict[str, np.ndarray]) -> None:
        expected = set(model.store.names())
        stored = {key for key in tensors if not key.startswith(f"{OPTIMIZER_SECTION}/")}
        if expected != stored:
            missing = sorted(expected - stored)[:5]
            extra = sorted(stored - expected)[:5]
            raise ConfigurationError(f"checkpoint does not match model: missing={missing} unexpected={extra}")
        for name in model.store.names():
            model.store.set_value(name, tensors[name])

    def load_optimizer(self, optimizer: Adam, tensors: Dict[str, np.ndarray], manifest: CheckpointManifest) -> None:
        for name in optimizer.state.first:
            first = tensors.get(f"{OPTIMIZER_SECTION}/{name}.m")
            second = tensors.get(f"{OPTIMIZER_SECTION}/{name}.v")
            if first is None or second is None:
                raise CheckpointError(f"optimizer moments missing for {name}")
            optimizer.state.first[name][...] = first
            optimizer.state.second[name][...] = second
        optimizer.state.step = manifest.optimizer_step
        optimizer.state.epoch = manifest.epoch
