import logging
from pathlib import Path

from app.core.config import settings
from app.core.database import get_sync_session
from app.core.errors import ConfigError, DivergenceError
from app.models.run import RunStage, RunStatus, TrainRunCreate
from app.repositories.run_repository import TrainRunRepository
from app.services.dataset_service import DatasetService
from slm.checkpoint import Checkpoint, load_checkpoint
from slm.config import RunConfig
from slm.registry import registry
from slm.trainer import FINAL_CHECKPOINT, StageResult, run_stage, stage_steps

logger = logging.getLogger(__name__)


def run_dir_for(config: RunConfig, out_dir: str | Path | None = None) -> Path:
    return Path(out_dir) if out_dir else Path(settings.runs_dir) / config.cell_name


def cell_key(config: RunConfig) -> dict:
    return {
        "run_name": config.cell_name,
        "head_mode": str(config.model.head_mode),
        "g": config.model.g,
        "speaker_mode": str(config.model.speaker_mode),
        "seed": config.train.seed,
    }


class TrainingService:
    """Двухэтапное обучение ячейки с записью в журнал"""

    def __init__(
        self,
        config: RunConfig,
        data_dir: str | Path | None = None,
        out_dir: str | Path | None = None,
        database_url: str | None = None,
        device: str | None = None,
        progress: bool = True,
    ):
        self.config = config
        self.dataset = DatasetService(config, data_dir)
        self.out_dir = run_dir_for(config, out_dir)
        self.database_url = database_url
        self.device = device or settings.device
        self.progress = progress

    def train(
        self, stages: tuple[str, ...] = ("pretrain", "sft"), init_checkpoint: str | None = None
    ) -> list[StageResult]:
        results = []
        init = None
        if init_checkpoint:
            init = load_checkpoint(init_checkpoint, self.device, expect=self.config)

        for stage in stages:
            if stage == "sft" and init is None:
                stage1 = self.out_dir / FINAL_CHECKPOINT["pretrain"]
                if not stage1.exists():
                    raise ConfigError(f"sft needs a pretrain checkpoint, {stage1} is missing")
                init = load_checkpoint(stage1, self.device, expect=self.config)

            result = self._run_stage(stage, init)
            results.append(result)
            registry.evict(result.checkpoint_path)
            init = load_checkpoint(result.checkpoint_path, self.device)
        return results

    def _run_stage(self, stage: str, init: Checkpoint | None) -> StageResult:
        split = "pretrain" if stage == "pretrain" else "qa_train"
        records = self.dataset.load_split(split)

        with get_sync_session(self.database_url) as session:
            row = TrainRunRepository(session).create(
                TrainRunCreate(
                    **cell_key(self.config),
                    stage=RunStage(stage),
                    steps=stage_steps(self.config, stage),
                )
            )
            run_id = row.id

        try:
            result = run_stage(
                stage,
                records,
                self.config,
                self.out_dir,
                init=init,
                device=self.device,
                progress=self.progress,
            )
        except DivergenceError as e:
            logger.error(f"[TRAIN] {self.config.cell_name} diverged: {e}")
            self._finish(run_id, RunStatus.DIVERGED, error=str(e))
            raise
        except Exception as e:
            logger.error(f"[TRAIN] {self.config.cell_name} failed: {e}")
            self._finish(run_id, RunStatus.FAILED, error=str(e))
            raise

        self._finish(
            run_id,
            RunStatus.COMPLETED,
            final_loss=result.final_loss,
            checkpoint_path=str(result.checkpoint_path),
            curve_path=str(result.curve_path),
        )
        return result

    def _finish(self, run_id: int, status: RunStatus, **fields) -> None:
        with get_sync_session(self.database_url) as session:
            TrainRunRepository(session).mark_finished(run_id, status, **fields)
