from .run_repository import (
    AlignmentResultRepository,
    EvalResultRepository,
    TrainRunRepository,
)

__all__ = ["TrainRunRepository", "EvalResultRepository", "AlignmentResultRepository"]
