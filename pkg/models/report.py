from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class GradCheckEntry(BaseModel):
    """Finite-difference comparison for one parameter tensor"""
    name: str = Field(..., description="Parameter name")
    checked: int = Field(..., description="Coordinates compared")
    max_rel_error: Optional[float] = Field(None, description="Worst relative error (None if non-finite)")
    non_finite: bool = Field(False, description="Loss became NaN/Inf under perturbation")
    passed: bool = Field(..., description="max_rel_error <= tol")


class GradCheckReport(BaseModel):
    eps: float
    tol: float
    loss: Optional[float] = Field(None, description="Unperturbed loss")
    entries: List[GradCheckEntry] = Field(default_factory=list)
    skipped_frozen: List[str] = Field(default_factory=list, description="Frozen entries not checked")
    passed: bool

    def failures(self) -> List[GradCheckEntry]:
        return [entry for entry in self.entries if not entry.passed]


class EvalRecord(BaseModel):
    """Per-image evaluation record"""
    sample_id: str
    dice: float = Field(..., ge=0.0, le=1.0)
    miou: float = Field(..., ge=0.0, le=1.0)
    hd: float = Field(..., ge=0.0, description="Hausdorff distance (pixels x spacing)")
    hd95: float = Field(..., ge=0.0)
    hd_sentinel: bool = Field(False, description="HD replaced by the image diagonal (empty mask)")


class EvalReport(BaseModel):
    """Aggregate over a split"""
    split: str
    count: int
    dice: float = Field(..., ge=0.0, le=1.0)
    miou: float = Field(..., ge=0.0, le=1.0)
    hd: float = Field(..., ge=0.0)
    hd95: float = Field(..., ge=0.0)
    sentinel_count: int = 0
    trivial_baseline_dice: Optional[float] = Field(None, description="Dice of an all-foreground predictor")
    config_hash: Optional[str] = None
    records: List[EvalRecord] = Field(default_factory=list)


class EpochRecord(BaseModel):
    """One line of the training log"""
    epoch: int
    lr: float
    total_loss: float
    mask_loss: float
    boundary_loss: float
    val_dice: Optional[float] = None
    best: bool = False


class AblationRow(BaseModel):
    name: str
    toggles: Dict[str, bool]
    config_hashes: List[str]
    seeds: List[int]
    dice: float
    miou: float
    hd: float
    per_seed_dice: List[float]
    delta_dice: float = 0.0
    delta_miou: float = 0.0
    delta_hd: float = 0.0


class AblationReport(BaseModel):
    rows: List[AblationRow]
    dataset: str
    seeds: List[int]
