import itertools
import logging
from pathlib import Path

from app.core.config import settings
from app.services.dataset_service import data_dir_for
from celery_worker.tasks import run_sweep_cell
from slm.config import RunConfig

logger = logging.getLogger(__name__)


class SweepService:
    """{head_mode} × {g} × {speaker_mode}; каждая ячейка - Celery-задача"""

    def __init__(
        self,
        config: RunConfig,
        data_dir: str | Path | None = None,
        out_dir: str | Path | None = None,
        database_url: str | None = None,
    ):
        self.config = config
        self.data_dir = data_dir_for(config, data_dir)
        self.out_root = Path(out_dir) if out_dir else Path(settings.runs_dir)
        self.database_url = database_url

    def cells(self) -> list[RunConfig]:
        ev = self.config.eval
        return [
            self.config.with_overrides(g=g, head_mode=head, speaker_mode=speaker)
            for head, g, speaker in itertools.product(
                ev.sweep_heads, ev.sweep_g, ev.sweep_speaker_modes
            )
        ]

    def run(self, eval_splits: list[str] | None = None) -> list[dict]:
        cells = self.cells()
        logger.info(f"[SWEEP] dispatching {len(cells)} cells (eager={settings.celery_always_eager})")
        results: dict[str, dict] = {}
        pending = []
        for cell in cells:
            try:
                task = run_sweep_cell.delay(
                    cell.to_dict(),
                    str(self.data_dir),
                    str(self.out_root / cell.cell_name),
                    self.database_url,
                    eval_splits,
                )
                pending.append((cell, task))
            except Exception as e:
                # eager-режим пробрасывает ошибку ячейки сразу из delay
                results[cell.cell_name] = self._failed(cell, e)

        for cell, task in pending:
            try:
                results[cell.cell_name] = task.get()
            except Exception as e:
                results[cell.cell_name] = self._failed(cell, e)

        ordered = [results[cell.cell_name] for cell in cells]
        done = sum(r["status"] == "completed" for r in ordered)
        logger.info(f"[SWEEP] {done}/{len(ordered)} cells completed")
        return ordered

    @staticmethod
    def _failed(cell: RunConfig, error: Exception) -> dict:
        logger.error(f"[SWEEP] {cell.cell_name}: {error}")
        return {"cell": cell.cell_name, "status": "failed", "error": str(error)}
