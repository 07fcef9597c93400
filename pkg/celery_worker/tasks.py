import logging
from typing import Any

from celery_worker.celery_app import celery_app
from slm.config import RunConfig
from slm.corpus import PRETRAIN_SPLITS

logger = logging.getLogger(__name__)


def _progress(task, state: str, **meta) -> None:
    """update_state только у воркера: у eager-задачи нет доступного backend"""
    if task.request.is_eager:
        logger.debug(f"[SWEEP] {meta.get('cell')}: {meta.get('status')}")
        return
    task.update_state(state=state, meta=meta)


@celery_app.task(bind=True)
def run_sweep_cell(
    self,
    config_data: dict[str, Any],
    data_dir: str | None = None,
    out_dir: str | None = None,
    database_url: str | None = None,
    eval_splits: list[str] | None = None,
):
    """
    Ячейка свипа: train → eval → align

    Args:
        config_data: RunConfig ячейки (JSON-словарь)
        data_dir: каталог корпуса
        out_dir: каталог прогона ячейки
    """
    from app.services.alignment_service import AlignmentService
    from app.services.evaluation_service import EvaluationService, default_eval_splits
    from app.services.training_service import TrainingService

    config = RunConfig.model_validate(config_data)
    cell = config.cell_name
    try:
        _progress(self, "PROGRESS", cell=cell, status="train", progress=10)
        training = TrainingService(
            config, data_dir, out_dir, database_url=database_url, progress=False
        )
        results = training.train()
        checkpoint = results[-1].checkpoint_path
        pretrain_checkpoint = results[0].checkpoint_path

        summaries = []
        splits = eval_splits or default_eval_splits()
        for i, split in enumerate(splits):
            _progress(
                self,
                "PROGRESS",
                cell=cell,
                status=f"eval {split}",
                progress=50 + 30 * i // len(splits),
            )
            # TTS-сплиты оцениваются чекпоинтом предобучения
            split_checkpoint = pretrain_checkpoint if split in PRETRAIN_SPLITS else checkpoint
            evaluation = EvaluationService(
                config,
                split_checkpoint,
                data_dir,
                out_dir,
                database_url=database_url,
                progress=False,
            )
            summaries.append(evaluation.evaluate(split))

        _progress(self, "PROGRESS", cell=cell, status="align", progress=85)
        report = AlignmentService(config, checkpoint, data_dir, out_dir, database_url).align()

        return {
            "cell": cell,
            "status": "completed",
            "checkpoint": str(checkpoint),
            "eval": summaries,
            "riemannian": {layer.name: layer.riemannian for layer in report.layers},
        }

    except Exception as e:
        logger.error(f"[SWEEP] cell {cell} failed: {e}")
        _progress(self, "FAILURE", cell=cell, status=f"failed: {e}", progress=0, error=str(e))
        raise
