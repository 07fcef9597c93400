import math

import torch
import torch.nn as nn

from slm.config import TrainConfig


def cosine_lr(step: int, total_steps: int, lr_init: float) -> float:
    """Косинусное затухание от lr_init до 0 за total_steps шагов"""
    if total_steps <= 0:
        return lr_init
    progress = min(max(step, 0), total_steps) / total_steps
    return 0.5 * lr_init * (1.0 + math.cos(math.pi * progress))


def param_groups(model: nn.Module, weight_decay: float) -> list[dict]:
    """Decay только для матриц Linear; bias, LayerNorm и эмбеддинги без decay"""
    decay, no_decay = [], []
    for module in model.modules():
        for name, param in module.named_parameters(recurse=False):
            if not param.requires_grad:
                continue
            if isinstance(module, nn.Linear) and name == "weight":
                decay.append(param)
            else:
                no_decay.append(param)
    groups = []
    if decay:
        groups.append({"params": decay, "weight_decay": weight_decay})
    if no_decay:
        groups.append({"params": no_decay, "weight_decay": 0.0})
    return groups


def build_optimizer(
    model: nn.Module, config: TrainConfig, total_steps: int
) -> tuple[torch.optim.AdamW, torch.optim.lr_scheduler.LambdaLR]:
    optimizer = torch.optim.AdamW(
        param_groups(model, config.weight_decay),
        lr=config.lr_init,
        betas=(config.beta1, config.beta2),
        eps=config.eps,
    )
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lambda step: cosine_lr(step, total_steps, 1.0),
    )
    return optimizer, scheduler
