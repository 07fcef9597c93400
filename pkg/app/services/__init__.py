from .alignment_service import AlignmentService
from .dataset_service import DatasetService
from .evaluation_service import EvaluationService
from .report_service import ReportService
from .training_service import TrainingService

__all__ = [
    "DatasetService",
    "TrainingService",
    "EvaluationService",
    "AlignmentService",
    "ReportService",
]
