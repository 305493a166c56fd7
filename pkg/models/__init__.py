from .config import RunConfig, BackboneConfig, MfeaConfig, FgbrConfig, MbgdConfig, LossWeights, AdamConfig, GeneratorConfig
from .report import GradCheckReport, EvalRecord, EvalReport, EpochRecord, AblationRow, AblationReport
from .checkpoint import CheckpointManifest, TensorEntry
from .dataset import DatasetManifest, SampleRecord, Split

__all__ = [
    "RunConfig",
    "BackboneConfig",
    "MfeaConfig",
    "FgbrConfig",
    "MbgdConfig",
    "LossWeights",
    "AdamConfig",
    "GeneratorConfig",
    "GradCheckReport",
    "EvalRecord",
    "EvalReport",
    "EpochRecord",
    "AblationRow",
    "AblationReport",
    "CheckpointManifest",
    "TensorEntry",
    "DatasetManifest",
    "SampleRecord",
    "Split"
]
