import logging
import math
from datetime import datetime, timezone
from pathlib import Path

import pandas as pd
from jinja2 import Environment, FileSystemLoader

from app.core.config import settings
from app.core.database import get_sync_session
from app.models.run import AlignmentResultRead, EvalResultRead, RunStage, TrainRunRead
from app.repositories.run_repository import (
    AlignmentResultRepository,
    EvalResultRepository,
    TrainRunRepository,
)

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).resolve().parents[2] / "templates"
REPORT_TEMPLATE = "sweep_report.md.j2"

_EVAL_COLUMNS = [
    "run_name",
    "head_mode",
    "g",
    "speaker_mode",
    "seed",
    "split",
    "task",
    "n_examples",
    "success_rate",
    "ter",
    "speaker_match",
    "exact_match",
    "f1",
    "steps_per_token",
    "speech_steps",
    "speech_tokens",
    "checkpoint_path",
]
_ALIGN_COLUMNS = [
    "run_name",
    "head_mode",
    "g",
    "speaker_mode",
    "seed",
    "layer",
    "layer_name",
    "tt_sim",
    "ss_sim",
    "st_sim",
    "tt_dist",
    "ss_dist",
    "st_dist",
    "riemannian",
]
_LOSS_COLUMNS = ["run_name", "loss_pretrain", "loss_sft"]


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "–"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


class ReportService:
    """Сводка журнала: одна строка на конфигурацию, CSV / JSON / markdown"""

    def __init__(self, out_dir: str | Path | None = None, database_url: str | None = None):
        self.out_dir = Path(out_dir) if out_dir else Path(settings.runs_dir)
        self.database_url = database_url or settings.database_url

    def collect(self) -> tuple[pd.DataFrame, pd.DataFrame]:
        with get_sync_session(self.database_url) as session:
            eval_rows = [
                EvalResultRead.model_validate(r).model_dump()
                for r in EvalResultRepository(session).get_latest_rows()
            ]
            align_rows = [
                AlignmentResultRead.model_validate(r).model_dump()
                for r in AlignmentResultRepository(session).get_latest_rows()
            ]
            losses = self._final_losses(
                TrainRunRepository(session), {r["run_name"] for r in eval_rows}
            )
        evals = pd.DataFrame(eval_rows, columns=_EVAL_COLUMNS).merge(
            losses, on="run_name", how="left"
        )
        aligns = pd.DataFrame(align_rows, columns=_ALIGN_COLUMNS)
        evals = evals.sort_values(["head_mode", "g", "speaker_mode", "split"], kind="stable")
        aligns = aligns.sort_values(["head_mode", "g", "speaker_mode", "layer"], kind="stable")
        return evals.reset_index(drop=True), aligns.reset_index(drop=True)

    @staticmethod
    def _final_losses(repository: TrainRunRepository, run_names: set[str]) -> pd.DataFrame:
        """Итоговая потеря последнего прогона каждой стадии"""
        rows = []
        for run_name in sorted(run_names):
            row: dict = {"run_name": run_name}
            for stage in RunStage:
                run = repository.get_latest(run_name, stage)
                row[f"loss_{stage.value}"] = (
                    TrainRunRead.model_validate(run).final_loss if run else None
                )
            rows.append(row)
        return pd.DataFrame(rows, columns=_LOSS_COLUMNS)

    def build(self, title: str | None = None) -> dict[str, Path]:
        evals, aligns = self.collect()
        self.out_dir.mkdir(parents=True, exist_ok=True)

        # одна строка на (ячейка, split); riemannian последнего слоя приклеивается к ячейке
        last = aligns.sort_values("layer").groupby("run_name", as_index=False).last()
        table = evals.merge(
            last[["run_name", "st_sim", "riemannian"]], on="run_name", how="left"
        )

        paths = {
            "csv": self.out_dir / "report.csv",
            "json": self.out_dir / "report.json",
            "md": self.out_dir / "report.md",
        }
        table.to_csv(paths["csv"], index=False)
        table.to_json(paths["json"], orient="records", indent=2)

        env = Environment(
            loader=FileSystemLoader(TEMPLATES_DIR), keep_trailing_newline=True
        )
        env.filters["fmt"] = _fmt
        markdown = env.get_template(REPORT_TEMPLATE).render(
            title=title,
            generated_at=datetime.now(timezone.utc).strftime("%Y-%m-%d %H:%M UTC"),
            database_url=self.database_url,
            eval_rows=evals.to_dict("records"),
            align_rows=aligns.to_dict("records"),
        )
        paths["md"].write_text(markdown, encoding="utf-8")

        logger.info(
            f"[REPORT] {len(table)} rows, {len(aligns)} alignment rows → {self.out_dir}"
        )
        return paths
