from enum import Enum
from typing import Dict, List

from pydantic import BaseModel, Field


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class SampleRecord(BaseModel):
    """Manifest entry for one synthetic image/mask pair"""
    sample_id: str
    image: str = Field(..., description="Image path relative to the dataset root")
    mask: str = Field(..., description="Mask path relative to the dataset root")
    split: Split
    ellipses: int
    blur_sigma: float
    speckle_std: float
    contrast_gap: float
    foreground_fraction: float


class DatasetManifest(BaseModel):
    seed: int
    image_size: int
    generator: str
    count: int
    samples: List[SampleRecord] = Field(default_factory=list)

    def split(self, split: Split) -> List[SampleRecord]:
        return [s for s in self.samples if s.split == split]

    def split_counts(self) -> Dict[str, int]:
        return {split.value: len(self.split(split)) for split in Split}
