import json
import logging
from pathlib import Path

import pandas as pd
from tqdm import tqdm

from app.core.database import get_sync_session
from app.core.errors import DataError
from app.models.run import EvalResultCreate
from app.repositories.run_repository import EvalResultRepository
from app.services.dataset_service import DatasetService
from app.services.training_service import cell_key, run_dir_for
from slm.codec import speaker_match, token_error_rate
from slm.config import RunConfig
from slm.corpus import ALL_SPLITS, PRETRAIN_SPLITS
from slm.data import StreamEncoder
from slm.generation import SynthesisResult, synthesize_answer, synthesize_speech
from slm.metrics import exact_match, f1_score, success_rate
from slm.registry import registry

logger = logging.getLogger(__name__)


class EvaluationService:
    """Декодирование сплита и строка метрик: SR, TER, speaker-match, EM, F1, шаги"""

    def __init__(
        self,
        config: RunConfig,
        checkpoint_path: str | Path,
        data_dir: str | Path | None = None,
        out_dir: str | Path | None = None,
        database_url: str | None = None,
        progress: bool = True,
    ):
        self.checkpoint_path = Path(checkpoint_path)
        self.checkpoint = registry.get_checkpoint(self.checkpoint_path)
        # модель/кодек берём из чекпоинта, eval-секцию из текущего конфига
        self.config = self.checkpoint.run_config.model_copy(update={"eval": config.eval})
        self.encoder = StreamEncoder(self.config, registry.get_codec(self.config.codec))
        self.dataset = DatasetService(config, data_dir)
        self.out_dir = run_dir_for(self.config, out_dir) / "eval"
        self.database_url = database_url
        self.progress = progress

    def evaluate(self, split: str) -> dict:
        if split not in ALL_SPLITS or split == "pretrain":
            raise DataError(f"Unknown evaluation split '{split}'")
        records = self.dataset.load_split(split, limit=self.config.eval.eval_examples)
        is_tts = split in PRETRAIN_SPLITS
        model = self.checkpoint.model
        codec = self.encoder.codec

        predictions, rows = [], []
        for record in tqdm(records, desc=f"eval {split}", disable=not self.progress, leave=False):
            if is_tts:
                result = synthesize_speech(
                    model, self.encoder, record.text, record.speaker_id, self.config.eval
                )
                reference = record.text
            else:
                result = synthesize_answer(
                    model, self.encoder, record.question, record.speaker_id, self.config.eval
                )
                reference = record.answer

            target = codec.speaker(record.speaker_id)
            ref_frames = codec.encode(reference, target)
            row = {
                "success": result.success,
                "ter": token_error_rate(codec, ref_frames, result.frames),
                "speaker_match": speaker_match(codec, result.frames, target),
                "speech_steps": result.speech_steps,
                "speech_tokens": result.speech_tokens,
                "forward_passes": result.forward_passes,
            }
            if not is_tts:
                row["exact_match"] = exact_match(result.text, reference)
                row["f1"] = f1_score(result.text, reference)
            rows.append(row)
            predictions.append(self._prediction(record, result, row))

        summary = self._summarize(split, "tts" if is_tts else "role_qa", rows)
        self._write(split, predictions, summary)
        return summary

    @staticmethod
    def _prediction(record, result: SynthesisResult, row: dict) -> dict:
        return {
            **record.model_dump(),
            "text": result.text,
            "frames": result.frames,
            "success": result.success,
            "steps": result.forward_passes,
            "speech_steps": result.speech_steps,
            "speaker_estimate": result.speaker_estimate,
            **{k: row[k] for k in ("ter", "speaker_match", "exact_match", "f1") if k in row},
        }

    def _summarize(self, split: str, task: str, rows: list[dict]) -> dict:
        frame = pd.DataFrame(rows)
        speech_tokens = int(frame["speech_tokens"].sum())
        speech_steps = int(frame["speech_steps"].sum())
        summary = {
            **cell_key(self.config),
            "split": split,
            "task": task,
            "n_examples": len(rows),
            "success_rate": success_rate(frame["success"].tolist()),
            "ter": float(frame["ter"].mean()),
            "speaker_match": float(frame["speaker_match"].mean()),
            "exact_match": float(frame["exact_match"].mean()) if "exact_match" in frame else None,
            "f1": float(frame["f1"].mean()) if "f1" in frame else None,
            "steps_per_token": speech_steps / speech_tokens if speech_tokens else None,
            "speech_steps": speech_steps,
            "speech_tokens": speech_tokens,
            "checkpoint_path": str(self.checkpoint_path),
        }
        logger.info(
            f"[EVAL] {self.config.cell_name} {split}: SR={summary['success_rate']:.3f} "
            f"TER={summary['ter']:.3f} SPK={summary['speaker_match']:.3f} "
            f"EM={summary['exact_match']} steps/token={summary['steps_per_token']}"
        )
        return summary

    def _write(self, split: str, predictions: list[dict], summary: dict) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        predictions_path = self.out_dir / f"{split}.predictions.jsonl"
        with open(predictions_path, "w", encoding="utf-8") as f:
            for item in predictions:
                f.write(json.dumps(item) + "\n")
        summary["predictions_path"] = str(predictions_path)

        frame = pd.DataFrame([summary])
        frame.to_csv(self.out_dir / f"{split}.metrics.csv", index=False)
        frame.to_json(self.out_dir / f"{split}.metrics.json", orient="records", indent=2)

        with get_sync_session(self.database_url) as session:
            EvalResultRepository(session).create(EvalResultCreate(**summary))


def default_eval_splits() -> list[str]:
    return ["tts_test", "tts_unseen", "qa_id", "qa_id_unseen", "qa_ood"]


def checkpoint_for(config: RunConfig, out_dir: str | Path | None, stage: str = "sft") -> Path:
    name = "stage2.pt" if stage == "sft" else "stage1.pt"
    return run_dir_for(config, out_dir) / name

