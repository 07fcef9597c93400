"""Сбор скрытых состояний по позициям текста и речи на парных TTS-контекстах"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import torch

from slm.corpus import PretrainRecord
from slm.data import StreamEncoder
from slm.metrics.alignment import SPEECH, TEXT
from slm.model import SpeechLM
from slm.tokens import SegmentTag, Task


@dataclass
class ProbeStates:
    # layer → (rows, d_model); modalities параллельны строкам
    layers: dict[int, np.ndarray]
    modalities: list[str]


def probe_layers(n_layers: int) -> dict[int, str]:
    """Эмбеддинги, средний и последний блок"""
    return {0: "embedding", max(1, n_layers // 2): "middle", n_layers: "last"}


def _modality(tag: SegmentTag) -> str | None:
    if tag is SegmentTag.TEXT_Q:
        return TEXT
    if tag is SegmentTag.SPEECH_A:
        return SPEECH
    return None


@torch.no_grad()
def collect_hidden(
    model: SpeechLM,
    encoder: StreamEncoder,
    records: Sequence[PretrainRecord],
    layers: Sequence[int],
    batch_size: int = 16,
) -> ProbeStates:
    device = next(model.parameters()).device
    rows: dict[int, list[np.ndarray]] = {layer: [] for layer in layers}
    modalities: list[str] = []

    for start in range(0, len(records), batch_size):
        chunk = records[start : start + batch_size]
        grouped = [encoder.group(encoder.stream(Task.TTS, r)) for r in chunk]
        hidden = model.hidden_states(encoder.collate(grouped, with_targets=False).to(device))
        for b, stream in enumerate(grouped):
            positions, tags = [], []
            for u, unit in enumerate(stream.units):
                modality = _modality(unit.tag)
                if modality is not None:
                    positions.append(u)
                    tags.append(modality)
            modalities.extend(tags)
            index = torch.tensor(positions, dtype=torch.long, device=device)
            for layer in layers:
                rows[layer].append(hidden.layers[layer][b].index_select(0, index).cpu().numpy())

    return ProbeStates(
        layers={layer: np.concatenate(parts, axis=0) for layer, parts in rows.items()},
        modalities=modalities,
    )
