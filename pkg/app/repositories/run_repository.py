
from sqlalchemy import select
from sqlalchemy.orm import Session

from app.models.run import (
    AlignmentResult,
    EvalResult,
    RunStage,
    RunStatus,
    TrainRun,
    utc_now,
)
from app.repositories.base_repository import BaseRepository


class TrainRunRepository(BaseRepository[TrainRun]):
    def __init__(self, session: Session):
        super().__init__(TrainRun, session)

    def get_latest(self, run_name: str, stage: RunStage) -> TrainRun | None:
        """Последний прогон стадии для ячейки"""
        statement = (
            select(TrainRun)
            .where(TrainRun.run_name == run_name, TrainRun.stage == stage)
            .order_by(TrainRun.id.desc())
            .limit(1)
        )
        return self._session.execute(statement).scalar_one_or_none()

    def mark_finished(
        self,
        run_id: int,
        status: RunStatus,
        final_loss: float | None = None,
        checkpoint_path: str | None = None,
        curve_path: str | None = None,
        error: str | None = None,
    ) -> TrainRun | None:
        """Зафиксировать итог стадии обучения"""
        return self.update(
            run_id,
            {
                "status": status,
                "final_loss": final_loss,
                "checkpoint_path": checkpoint_path,
                "curve_path": curve_path,
                "error": error,
                "updated_at": utc_now(),
            },
        )


class EvalResultRepository(BaseRepository[EvalResult]):
    def __init__(self, session: Session):
        super().__init__(EvalResult, session)

    def get_latest_rows(self) -> list[EvalResult]:
        """Последняя строка на каждую (ячейку, split, задачу)"""
        rows = self._session.execute(
            select(EvalResult).order_by(EvalResult.id)
        ).scalars()
        latest: dict[tuple, EvalResult] = {}
        for row in rows:
            latest[(row.run_name, row.split, row.task)] = row
        return list(latest.values())


class AlignmentResultRepository(BaseRepository[AlignmentResult]):
    def __init__(self, session: Session):
        super().__init__(AlignmentResult, session)

    def get_latest_rows(self) -> list[AlignmentResult]:
        """Последняя строка на каждую (ячейку, слой)"""
        rows = self._session.execute(
            select(AlignmentResult).order_by(AlignmentResult.id)
        ).scalars()
        latest: dict[tuple, AlignmentResult] = {}
        for row in rows:
            latest[(row.run_name, row.layer)] = row
        return list(latest.values())
