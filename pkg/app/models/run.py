from datetime import datetime, timezone
from enum import Enum

from sqlalchemy import JSON
from sqlmodel import Column, Field, SQLModel


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


class RunStage(str, Enum):
    PRETRAIN = "pretrain"
    SFT = "sft"

    def __str__(self):
        return self.value


class RunStatus(str, Enum):
    RUNNING = "running"
    COMPLETED = "completed"
    DIVERGED = "diverged"
    FAILED = "failed"


class CellKey(SQLModel):
    """Координаты ячейки свипа: общая часть всех таблиц журнала"""

    run_name: str = Field(max_length=255, index=True)
    head_mode: str = Field(max_length=32)
    g: int = Field(ge=1)
    speaker_mode: str = Field(max_length=32)
    seed: int = 0


class TrainRunBase(CellKey):
    stage: RunStage
    steps: int = Field(ge=0)
    final_loss: float | None = None
    checkpoint_path: str | None = None
    curve_path: str | None = None
    status: RunStatus = Field(default=RunStatus.RUNNING)
    error: str | None = None


class TrainRun(TrainRunBase, table=True):
    id: int | None = Field(default=None, primary_key=True)
    created_at: datetime = Field(default_factory=utc_now)
    updated_at: datetime = Field(default_factory=utc_now)


class TrainRunCreate(TrainRunBase):
    pass


class TrainRunRead(TrainRunBase):
    id: int
    created_at: datetime
    updated_at: datetime


class EvalResultBase(CellKey):
    split: str = Field(max_length=64)
    task: str = Field(max_length=32)
    n_examples: int = Field(ge=0)

    # Метрики (None, если к задаче не применимы)
    success_rate: float | None = Field(default=None, ge=0, le=1)
    ter: float | None = Field(default=None, ge=0)
    speaker_match: float | None = Field(default=None, ge=0, le=1)
    exact_match: float | None = Field(default=None, ge=0, le=1)
    f1: float | None = Field(default=None, ge=0, le=1)
    steps_per_token: float | None = Field(default=None, ge=0)
    speech_steps: int | None = Field(default=None, ge=0)
    speech_tokens: int | None = Field(default=None, ge=0)

    checkpoint_path: str | None = None
    predictions_path: str | None = None


class EvalResult(EvalResultBase, table=True):
    id: int | None = Field(default=None, primary_key=True)
    created_at: datetime = Field(default_factory=utc_now)


class EvalResultCreate(EvalResultBase):
    pass


class EvalResultRead(EvalResultBase):
    id: int
    created_at: datetime


class AlignmentResultBase(CellKey):
    layer: int = Field(ge=0)
    layer_name: str = Field(max_length=32)
    tt_sim: float | None = None
    ss_sim: float | None = None
    st_sim: float | None = None
    tt_dist: float | None = None
    ss_dist: float | None = None
    st_dist: float | None = None
    riemannian: float | None = None
    meta: dict | None = Field(default=None, sa_column=Column(JSON))
    report_path: str | None = None


class AlignmentResult(AlignmentResultBase, table=True):
    id: int | None = Field(default=None, primary_key=True)
    created_at: datetime = Field(default_factory=utc_now)


class AlignmentResultCreate(AlignmentResultBase):
    pass


class AlignmentResultRead(AlignmentResultBase):
    id: int
    created_at: datetime
