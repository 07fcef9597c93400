from .run import (
    AlignmentResult,
    AlignmentResultCreate,
    AlignmentResultRead,
    EvalResult,
    EvalResultCreate,
    EvalResultRead,
    RunStage,
    RunStatus,
    TrainRun,
    TrainRunCreate,
    TrainRunRead,
)

__all__ = [
    "TrainRun",
    "TrainRunCreate",
    "TrainRunRead",
    "RunStage",
    "RunStatus",
    "EvalResult",
    "EvalResultCreate",
    "EvalResultRead",
    "AlignmentResult",
    "AlignmentResultCreate",
    "AlignmentResultRead",
]
