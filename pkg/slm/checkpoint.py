"""Чекпоинт = torch.save словаря {run_config, model_config, state_dict, stage, step}"""

import logging
from dataclasses import dataclass
from pathlib import Path

import torch

from app.core.errors import ConfigError, DataError
from slm.config import RunConfig
from slm.model import SpeechLM
from slm.tokens import FrameLayout, Vocabulary

logger = logging.getLogger(__name__)


@dataclass
class Checkpoint:
    model: SpeechLM
    run_config: RunConfig
    stage: str
    step: int
    path: Path | None = None


def build_model(config: RunConfig) -> SpeechLM:
    vocab = Vocabulary.from_codec(config.codec)
    layout = FrameLayout(vocab, tuple(config.codec.slot_roles))
    return SpeechLM(config.model, layout)


def save_checkpoint(
    path: str | Path, model: SpeechLM, config: RunConfig, stage: str, step: int
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "run_config": config.to_dict(),
            "model_config": config.model.model_dump(mode="json"),
            "state_dict": model.state_dict(),
            "stage": stage,
            "step": step,
        },
        path,
    )
    logger.debug(f"[CKPT] saved {path} (stage={stage}, step={step})")
    return path


def load_checkpoint(
    path: str | Path, device: str = "cpu", expect: RunConfig | None = None
) -> Checkpoint:
    """Восстановить модель; expect проверяет совместимость с текущим конфигом"""
    path = Path(path)
    if not path.exists():
        raise DataError(f"Checkpoint not found: {path}")
    payload = torch.load(path, map_location=device, weights_only=False)
    config = RunConfig.model_validate(payload["run_config"])
    if expect is not None and (
        expect.model != config.model or expect.codec != config.codec
    ):
        raise ConfigError(
            f"Checkpoint {path} was trained with a different model/codec config"
        )
    model = build_model(config)
    model.load_state_dict(payload["state_dict"])
    model.to(device)
    model.eval()
    return Checkpoint(model, config, payload["stage"], int(payload["step"]), path)
