"""Долгие прогоны на конфиге по умолчанию: запуск только через `pytest -m slow`"""

from pathlib import Path

import pytest

from app.services.dataset_service import DatasetService
from app.services.evaluation_service import EvaluationService, checkpoint_for
from app.services.training_service import TrainingService
from slm.config import RunConfig

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def workspace(tmp_path_factory) -> dict:
    root = tmp_path_factory.mktemp("convergence")
    base = RunConfig().with_overrides(seed=0)
    DatasetService(base, root / "data").generate(export_streams=False)
    return {"root": root, "ledger": f"sqlite:///{root / 'ledger.db'}", "cells": {}}


def _trained(workspace: dict, **overrides) -> tuple[RunConfig, Path]:
    config = RunConfig().with_overrides(seed=0, head_mode="decoupled", **overrides)
    out_dir = workspace["root"] / config.cell_name
    if config.cell_name not in workspace["cells"]:
        TrainingService(
            config,
            workspace["root"] / "data",
            out_dir,
            database_url=workspace["ledger"],
            progress=False,
        ).train()
        workspace["cells"][config.cell_name] = out_dir
    return config, out_dir


def _evaluate(workspace: dict, config: RunConfig, out_dir: Path, split: str, stage: str) -> dict:
    return EvaluationService(
        config,
        checkpoint_for(config, out_dir, stage),
        workspace["root"] / "data",
        out_dir,
        database_url=workspace["ledger"],
        progress=False,
    ).evaluate(split)


@pytest.mark.parametrize("g", [1, 3, 6, 12])
def test_tts_converges(workspace, g):
    config, out_dir = _trained(workspace, g=g)
    summary = _evaluate(workspace, config, out_dir, "tts_test", "pretrain")
    assert summary["ter"] <= 0.05
    assert summary["success_rate"] >= 0.95


def test_speaker_context_effect(workspace):
    on, on_dir = _trained(workspace, g=3, speaker_mode="vector")
    off, off_dir = _trained(workspace, g=3, speaker_mode="off")
    assert _evaluate(workspace, on, on_dir, "tts_test", "pretrain")["speaker_match"] >= 0.90
    assert _evaluate(workspace, off, off_dir, "tts_test", "pretrain")["speaker_match"] <= 0.30


def test_role_qa_end_to_end(workspace):
    config, out_dir = _trained(workspace, g=3)
    seen = _evaluate(workspace, config, out_dir, "qa_id", "sft")
    unseen = _evaluate(workspace, config, out_dir, "qa_id_unseen", "sft")
    assert seen["exact_match"] >= 0.8
    assert abs(unseen["speaker_match"] - seen["speaker_match"]) <= 0.1
