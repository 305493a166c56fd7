from .dataset_service import DatasetService
from .checkpoint_service import CheckpointService
from .report_service import ReportService
from .evaluation_service import EvaluationService
from .training_service import TrainingService
from .ablation_service import AblationService
from .inference_service import InferenceService

__all__ = [
    "DatasetService",
    "CheckpointService",
    "ReportService",
    "EvaluationService",
    "TrainingService",
    "AblationService",
    "InferenceService"
]
