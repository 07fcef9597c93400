import json
from datetime import timezone

import pandas as pd
import pytest

from app.core.database import get_sync_session
from app.core.errors import ConfigError, DataError
from app.models.run import RunStatus, utc_now
from app.repositories.run_repository import (
    AlignmentResultRepository,
    EvalResultRepository,
    TrainRunRepository,
)
from app.services.alignment_service import AlignmentService
from app.services.dataset_service import DatasetService
from app.services.evaluation_service import EvaluationService, default_eval_splits
from app.services.report_service import ReportService
from app.services.sweep_service import SweepService
from app.services.training_service import TrainingService
from main import main
from slm.codec import ToyCodec
from slm.config import RunConfig
from slm.corpus import ALL_SPLITS


class TestConfig:
    def test_round_trip(self, config, tmp_path):
        assert RunConfig.load(config.dump(tmp_path / "config.json")) == config

    def test_overrides(self, config):
        changed = config.with_overrides(seed=7, g=6, head_mode="coupled", speaker_mode="off")
        assert (changed.train.seed, changed.model.g) == (7, 6)
        assert changed.cell_name == "micro-coupled-g6-spk_off-s7"
        with pytest.raises(ConfigError):
            config.with_overrides(g=4)

    def test_bad_files(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(tmp_path / "missing.json")
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"model": {"d_model": 30, "n_heads": 4}}))
        with pytest.raises(ConfigError):
            RunConfig.load(path)


class TestDataset:
    def test_fixed_seed_gives_identical_corpora(self, config, tmp_path):
        DatasetService(config, tmp_path / "a").generate()
        DatasetService(config, tmp_path / "b").generate()
        for split in ALL_SPLITS:
            name = f"{split}.jsonl"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a" / "kb.jsonl").exists()
        assert (tmp_path / "a" / "pretrain.streams.txt").exists()

    def test_speaker_splits_and_oracle(self, config, data_dir):
        service = DatasetService(config, data_dir)
        service.generate(export_streams=False)
        seen = set(config.codec.seen_speaker_ids)
        unseen = set(config.codec.unseen_speaker_ids)
        assert not seen & unseen

        assert {r.speaker_id for r in service.load_split("qa_train")} <= seen
        assert {r.speaker_id for r in service.load_split("tts_test")} <= seen
        assert {r.speaker_id for r in service.load_split("qa_ood")} <= unseen

        heldout = {e.qid for e in service.load_knowledge_base() if e.heldout}
        assert {r.qid for r in service.load_split("qa_ood")} <= heldout
        assert not {r.qid for r in service.load_split("qa_train")} & heldout

        codec = ToyCodec(config.codec)
        for record in service.load_split("qa_train"):
            frames = codec.encode(record.answer, codec.speaker(record.speaker_id))
            assert codec.decode(frames).text == record.answer

    def test_missing_split(self, config, data_dir):
        with pytest.raises(DataError):
            DatasetService(config, data_dir).load_split("qa_id")


@pytest.fixture
def trained(config, data_dir, run_dir, ledger_url):
    DatasetService(config, data_dir).generate(export_streams=False)
    TrainingService(
        config, data_dir, run_dir, database_url=ledger_url, progress=False
    ).train()
    return config


class TestPipeline:
    def test_training_is_recorded(self, trained, run_dir, ledger_url):
        assert (run_dir / "stage1.pt").exists() and (run_dir / "stage2.pt").exists()
        with get_sync_session(ledger_url) as session:
            rows = TrainRunRepository(session).get_all()
        assert [str(r.stage) for r in rows] == ["pretrain", "sft"]
        assert all(r.status == RunStatus.COMPLETED for r in rows)

    def test_evaluation_rows_and_files(self, trained, data_dir, run_dir, ledger_url):
        service = EvaluationService(
            trained, run_dir / "stage2.pt", data_dir, run_dir, ledger_url, progress=False
        )
        first = service.evaluate("qa_id")
        second = service.evaluate("qa_id")
        assert first["n_examples"] == 2
        for key in ("success_rate", "ter", "speaker_match", "exact_match", "f1"):
            assert first[key] == second[key]
        assert (run_dir / "eval" / "qa_id.metrics.csv").exists()
        predictions = (run_dir / "eval" / "qa_id.predictions.jsonl").read_text().splitlines()
        assert len(predictions) == 2

        with get_sync_session(ledger_url) as session:
            assert len(EvalResultRepository(session).get_latest_rows()) == 1

        with pytest.raises(DataError):
            service.evaluate("pretrain")

    def test_alignment_report(self, trained, data_dir, run_dir, ledger_url):
        report = AlignmentService(
            trained, run_dir / "stage2.pt", data_dir, run_dir, ledger_url
        ).align()
        assert [layer.name for layer in report.layers] == ["embedding", "middle", "last"]
        assert report.meta["log_base"] == "e"
        assert (run_dir / "align" / "hidden_last.npy").exists()
        with get_sync_session(ledger_url) as session:
            assert len(AlignmentResultRepository(session).get_latest_rows()) == 3

    def test_report_from_ledger(self, trained, data_dir, run_dir, ledger_url, tmp_path):
        EvaluationService(
            trained, run_dir / "stage1.pt", data_dir, run_dir, ledger_url, progress=False
        ).evaluate("tts_test")
        AlignmentService(trained, run_dir / "stage2.pt", data_dir, run_dir, ledger_url).align()

        paths = ReportService(tmp_path / "report", ledger_url).build(title="micro")
        table = pd.read_csv(paths["csv"])
        assert table["split"].tolist() == ["tts_test"]
        assert "riemannian" in table.columns
        assert table[["loss_pretrain", "loss_sft"]].notna().to_numpy().all()
        markdown = paths["md"].read_text()
        assert "tts_test" in markdown and "last" in markdown


def test_sweep_runs_every_cell(config, data_dir, tmp_path, ledger_url):
    DatasetService(config, data_dir).generate(export_streams=False)
    service = SweepService(config, data_dir, tmp_path / "runs", ledger_url)
    assert [c.model.g for c in service.cells()] == [1, 3]

    results = service.run(eval_splits=["tts_test"])
    assert [r["status"] for r in results] == ["completed", "completed"]
    assert set(results[0]["riemannian"]) == {"embedding", "middle", "last"}


def test_sweep_defaults_to_every_eval_split(config, data_dir, tmp_path, ledger_url):
    config = config.model_copy(update={"eval": config.eval.model_copy(update={"sweep_g": [3]})})
    DatasetService(config, data_dir).generate(export_streams=False)
    results = SweepService(config, data_dir, tmp_path / "runs", ledger_url).run()
    assert results[0]["status"] == "completed"
    assert {s["split"] for s in results[0]["eval"]} == set(default_eval_splits())


def test_ledger_timestamps_are_utc():
    assert utc_now().tzinfo is timezone.utc


class TestCli:
    def test_gen_data_and_user_errors(self, config, tmp_path, ledger_url):
        config_path = config.dump(tmp_path / "config.json")
        data = tmp_path / "data"
        assert main(["gen-data", "--config", str(config_path), "--data-dir", str(data)]) == 0
        assert (data / "qa_train.jsonl").exists()

        missing = tmp_path / "nope"
        code = main(
            [
                "eval",
                "--config",
                str(config_path),
                "--out",
                str(missing),
                "--split",
                "tts_test",
                "--database-url",
                ledger_url,
            ]
        )
        assert code == 2

    def test_invalid_override_exit_code(self, config, tmp_path):
        config_path = config.dump(tmp_path / "config.json")
        assert main(["gen-data", "--config", str(config_path), "--g", "4"]) == 2
