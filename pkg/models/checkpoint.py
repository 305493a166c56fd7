from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

CHECKPOINT_FORMAT = "freqseg-ckpt/1"


class TensorEntry(BaseModel):
    """Manifest line for one stored tensor"""
    name: str = Field(..., description="Parameter or optimizer-slot name")
    section: str = Field(..., description="Module section (backbone, mfea, fgbr, mbgd, decoder, optimizer)")
    shape: List[int]
    trainable: bool
    path: str = Field(..., description="Member path inside the container")
    sha256: str = Field(..., description="Digest of the FQT1 payload")


class CheckpointManifest(BaseModel):
    """Text manifest stored as MANIFEST.json in the checkpoint container"""
    format: str = CHECKPOINT_FORMAT
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    config: Dict[str, Any]
    config_hash: str
    epoch: int = Field(0, description="Epochs completed")
    optimizer_step: int = 0
    best_val_dice: Optional[float] = None
    tensors: List[TensorEntry] = Field(default_factory=list)
