from collections.abc import Sequence

import torch
from torch.nn import functional as F

from app.core.errors import EmptyInputError
from slm.tokens.grouping import IGNORE_INDEX


def text_loss(logits: torch.Tensor, target: torch.Tensor | int) -> torch.Tensor:
    """−log softmax(logits)[target]"""
    target = torch.as_tensor(target, device=logits.device)
    if logits.dim() == 1:
        return F.cross_entropy(logits.unsqueeze(0), target.view(1))
    return F.cross_entropy(logits, target)


def group_losses(
    slice_logits: Sequence[torch.Tensor], targets: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Средний CE по не-PAD членам каждой группы.

    slice_logits[k]: (..., V_k), targets: (..., n_slices) с IGNORE_INDEX.
    Возвращает (loss на позицию, маска позиций хотя бы с одним членом).
    """
    per_slice = []
    for k, logits in enumerate(slice_logits):
        t = targets[..., k]
        ce = F.cross_entropy(
            logits.reshape(-1, logits.size(-1)),
            t.reshape(-1),
            ignore_index=IGNORE_INDEX,
            reduction="none",
        )
        per_slice.append(ce.view(t.shape))
    ce = torch.stack(per_slice, dim=-1)
    real = targets != IGNORE_INDEX
    count = real.sum(dim=-1)
    total = torch.where(real, ce, torch.zeros_like(ce)).sum(dim=-1)
    loss = total / count.clamp(min=1).to(total.dtype)
    return loss, count > 0


def speech_group_loss(
    slice_logits: Sequence[torch.Tensor], targets: Sequence[int] | torch.Tensor
) -> torch.Tensor:
    """(1/g) Σ −log P(s_k) по реальным членам одной группы; все PAD → 0"""
    targets = torch.as_tensor(targets, device=slice_logits[0].device)
    loss, _ = group_losses([s.unsqueeze(0) for s in slice_logits], targets.unsqueeze(0))
    return loss[0]


def sequence_loss(
    text_logits: torch.Tensor,
    speech_logits: Sequence[torch.Tensor],
    text_targets: torch.Tensor,
    speech_targets: torch.Tensor,
) -> tuple[torch.Tensor, int]:
    """Σ text CE + Σ group CE, делённые на число маскированных предсказаний"""
    text_mask = text_targets != IGNORE_INDEX
    n_text = int(text_mask.sum())
    if n_text:
        text_sum = F.cross_entropy(
            text_logits[text_mask], text_targets[text_mask], reduction="sum"
        )
    else:
        text_sum = text_logits.sum() * 0.0

    group_loss, group_mask = group_losses(speech_logits, speech_targets)
    n_groups = int(group_mask.sum())
    group_sum = torch.where(group_mask, group_loss, torch.zeros_like(group_loss)).sum()

    count = n_text + n_groups
    if count == 0:
        raise EmptyInputError("Loss mask selects no prediction targets")
    return (text_sum + group_sum) / count, count
