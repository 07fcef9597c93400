"""Общие фикстуры: микро-конфиг, каталоги прогона и журнал в tmp_path"""

from pathlib import Path

import pytest

from slm.config import (
    DataConfig,
    EvalConfig,
    HeadMode,
    ModelConfig,
    RunConfig,
    SpeakerMode,
    TrainConfig,
)


def micro_config(**model_overrides) -> RunConfig:
    model = {
        "d_model": 32,
        "n_layers": 2,
        "n_heads": 2,
        "d_ff": 64,
        "max_positions": 512,
        "g": 3,
        "head_mode": HeadMode.DECOUPLED,
    }
    model.update(model_overrides)
    return RunConfig(
        name="micro",
        model=ModelConfig(**model),
        train=TrainConfig(
            batch_size=2,
            steps_stage1=3,
            steps_stage2=2,
            log_every=1,
            checkpoint_every=1000,
            data=DataConfig(
                pretrain_examples=20,
                test_examples=4,
                text_len_min=4,
                text_len_max=6,
                kb_size=20,
            ),
        ),
        eval=EvalConfig(
            max_new=40,
            eval_examples=2,
            probe_examples=4,
            sweep_g=[1, 3],
            sweep_heads=[HeadMode.DECOUPLED],
            sweep_speaker_modes=[SpeakerMode.VECTOR],
        ),
    )


@pytest.fixture
def config() -> RunConfig:
    return micro_config()


@pytest.fixture
def data_dir(tmp_path: Path) -> Path:
    return tmp_path / "data"


@pytest.fixture
def run_dir(tmp_path: Path) -> Path:
    return tmp_path / "run"


@pytest.fixture
def ledger_url(tmp_path: Path) -> str:
    return f"sqlite:///{tmp_path / 'ledger.db'}"
