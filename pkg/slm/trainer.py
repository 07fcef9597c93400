import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd
import torch
from tqdm import tqdm

from app.core.errors import ConfigError, DivergenceError
from slm.checkpoint import Checkpoint, build_model, save_checkpoint
from slm.config import RunConfig
from slm.corpus import PretrainRecord, QARecord
from slm.data import StageSampler, StreamEncoder
from slm.losses import sequence_loss
from slm.optim import build_optimizer

logger = logging.getLogger(__name__)

STAGES = ("pretrain", "sft")
FINAL_CHECKPOINT = {"pretrain": "stage1.pt", "sft": "stage2.pt"}


@dataclass
class StageResult:
    stage: str
    steps: int
    checkpoint_path: Path
    curve_path: Path
    final_loss: float | None
    curve: list[dict] = field(default_factory=list)


def stage_steps(config: RunConfig, stage: str) -> int:
    return config.train.steps_stage1 if stage == "pretrain" else config.train.steps_stage2


def run_stage(
    stage: str,
    records: Sequence[PretrainRecord | QARecord],
    config: RunConfig,
    out_dir: str | Path,
    init: Checkpoint | None = None,
    device: str = "cpu",
    progress: bool = True,
) -> StageResult:
    """Один этап обучения; детерминирован при фиксированном seed"""
    if stage not in STAGES:
        raise ConfigError(f"Unknown stage '{stage}', expected one of {STAGES}")
    if stage == "sft" and init is None:
        raise ConfigError("sft stage requires a pretrain checkpoint")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    total = stage_steps(config, stage)
    seed = config.train.seed

    torch.manual_seed(seed)
    model = build_model(config)
    if init is not None:
        model.load_state_dict(init.model.state_dict())
    model.to(device)
    model.train()

    encoder = StreamEncoder(config)
    sampler = StageSampler(encoder, records, stage, seed)
    optimizer, scheduler = build_optimizer(model, config.train, total)

    curve: list[dict] = []
    final_loss = None
    logger.info(
        f"[TRAIN] {config.cell_name} stage={stage} steps={total} "
        f"params={model.num_parameters() / 1e6:.2f}M device={device}"
    )

    bar = tqdm(range(total), desc=f"{stage}", disable=not progress, leave=False)
    for step in bar:
        batch = sampler.next_batch().to(device)
        output = model.forward_batch(batch)
        loss, _ = sequence_loss(
            output.text_logits,
            output.speech_logits,
            batch.text_targets,
            batch.speech_targets,
        )
        value = loss.item()
        if not math.isfinite(value):
            raise DivergenceError(
                f"Loss became {value} at step {step} of stage {stage}", step=step
            )

        lr = scheduler.get_last_lr()[0]
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), config.train.grad_clip)
        optimizer.step()
        scheduler.step()
        final_loss = value

        if step % config.train.log_every == 0 or step == total - 1:
            curve.append({"step": step, "loss": value, "lr": lr})
            bar.set_postfix(loss=f"{value:.4f}")
            logger.info(f"[TRAIN] {stage} step={step} loss={value:.4f} lr={lr:.2e}")

        if (step + 1) % config.train.checkpoint_every == 0 and step + 1 < total:
            save_checkpoint(out_dir / f"{stage}_step{step + 1}.pt", model, config, stage, step + 1)

    model.eval()
    checkpoint_path = save_checkpoint(
        out_dir / FINAL_CHECKPOINT[stage], model, config, stage, total
    )
    curve_path = out_dir / f"curve_{stage}.csv"
    pd.DataFrame(curve, columns=["step", "loss", "lr"]).to_csv(curve_path, index=False)

    logger.info(f"[TRAIN] {stage} finished: loss={final_loss} checkpoint={checkpoint_path}")
    return StageResult(stage, total, checkpoint_path, curve_path, final_loss, curve)
