"""Decoder-only трансформер с MTP-слиянием групп и речевыми срезами"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import torch
import torch.nn as nn
from torch.nn import functional as F

from app.core.errors import SequenceLengthError, ShapeError
from slm.config import FusionKind, ModelConfig, SpeakerMode, SpeechHeadArch
from slm.tokens.grouping import SliceVocab
from slm.tokens.vocabulary import FrameLayout, Vocabulary

if TYPE_CHECKING:
    from slm.data import Batch

logger = logging.getLogger(__name__)


class CausalSelfAttention(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.c_attn = nn.Linear(config.d_model, 3 * config.d_model)
        self.c_proj = nn.Linear(config.d_model, config.d_model)
        self.n_heads = config.n_heads
        self.d_model = config.d_model
        self.dropout = config.dropout
        self.resid_dropout = nn.Dropout(config.dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        B, T, C = x.size()
        q, k, v = self.c_attn(x).split(self.d_model, dim=2)
        k = k.view(B, T, self.n_heads, C // self.n_heads).transpose(1, 2)
        q = q.view(B, T, self.n_heads, C // self.n_heads).transpose(1, 2)
        v = v.view(B, T, self.n_heads, C // self.n_heads).transpose(1, 2)
        y = F.scaled_dot_product_attention(
            q,
            k,
            v,
            attn_mask=None,
            dropout_p=self.dropout if self.training else 0.0,
            is_causal=True,
        )
        y = y.transpose(1, 2).contiguous().view(B, T, C)
        return self.resid_dropout(self.c_proj(y))


class MLP(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.c_fc = nn.Linear(config.d_model, config.d_ff)
        self.gelu = nn.GELU()
        self.c_proj = nn.Linear(config.d_ff, config.d_model)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.dropout(self.c_proj(self.gelu(self.c_fc(x))))


class Block(nn.Module):
    """Pre-norm residual block"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.ln_1 = nn.LayerNorm(config.d_model)
        self.attn = CausalSelfAttention(config)
        self.ln_2 = nn.LayerNorm(config.d_model)
        self.mlp = MLP(config)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln_1(x))
        x = x + self.mlp(self.ln_2(x))
        return x


class Fusion(nn.Module):
    """Concat эмбеддингов g членов группы → один вектор d_model"""

    def __init__(self, g: int, d_model: int, kind: FusionKind):
        super().__init__()
        self.g = g
        if kind is FusionKind.MLP:
            self.net = nn.Sequential(
                nn.Linear(g * d_model, 2 * d_model),
                nn.GELU(),
                nn.Linear(2 * d_model, d_model),
            )
        else:
            self.net = nn.Linear(g * d_model, d_model)

    def forward(self, member_embeddings: torch.Tensor) -> torch.Tensor:
        # (..., g, d) -> (..., d)
        if member_embeddings.size(-2) != self.g:
            raise ShapeError(
                f"Group of {member_embeddings.size(-2)} members, fusion expects {self.g}"
            )
        return self.net(member_embeddings.flatten(-2))


class SpeechHead(nn.Module):
    """Срезы 3D-тензора речевой головы: по одному на член группы"""

    def __init__(self, slices: SliceVocab, d_model: int, arch: SpeechHeadArch):
        super().__init__()
        self.slices = slices
        layers = []
        for k in range(slices.n_slices):
            size = slices.slice_size(k)
            if arch is SpeechHeadArch.LINEAR:
                layers.append(nn.Linear(d_model, size, bias=False))
            else:
                layers.append(
                    nn.Sequential(
                        nn.Linear(d_model, d_model),
                        nn.GELU(),
                        nn.Linear(d_model, size, bias=False),
                    )
                )
        self.proj = nn.ModuleList(layers)

    def forward(self, h: torch.Tensor) -> list[torch.Tensor]:
        return [proj(h) for proj in self.proj]


@dataclass
class HiddenStates:
    # layers[0]: выход эмбеддингов, layers[l]: выход блока l
    layers: list[torch.Tensor]
    final: torch.Tensor


@dataclass
class ModelOutput:
    hidden: HiddenStates
    text_logits: torch.Tensor
    speech_logits: list[torch.Tensor]


class SpeechLM(nn.Module):
    def __init__(self, config: ModelConfig, layout: FrameLayout):
        super().__init__()
        self.config = config
        self.layout = layout
        self.vocab: Vocabulary = layout.vocab
        self.slices = SliceVocab(layout, config.head_mode, config.g)
        d = config.d_model

        self.tok_emb = nn.Embedding(self.vocab.total_size, d)
        self.pos_emb = nn.Embedding(config.max_positions, d)
        self.spk_proj = nn.Linear(config.d_spk, d)
        self.fusion = Fusion(config.g, d, config.fusion) if config.g > 1 else None
        self.drop = nn.Dropout(config.dropout)
        self.blocks = nn.ModuleList(Block(config) for _ in range(config.n_layers))
        self.ln_f = nn.LayerNorm(d)
        self.lm_head = nn.Linear(d, self.vocab.language_size, bias=False)
        self.speech_head = SpeechHead(self.slices, d, config.speech_head_arch)

        self.apply(self._init_weights)
        logger.debug(
            f"[MODEL] {self.num_parameters() / 1e6:.2f}M parameters, "
            f"g={config.g}, head={config.head_mode}, slices={self.slices.n_slices}"
        )

    def _init_weights(self, module: nn.Module) -> None:
        if isinstance(module, nn.Linear):
            nn.init.normal_(module.weight, mean=0.0, std=self.config.init_std)
            if module.bias is not None:
                nn.init.zeros_(module.bias)
        elif isinstance(module, nn.Embedding):
            nn.init.normal_(module.weight, mean=0.0, std=self.config.init_std)

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def embed_stream(
        self,
        unit_ids: torch.Tensor,
        is_group: torch.Tensor,
        speaker_slot: torch.Tensor | None = None,
        speaker_vec: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """(B, U, g) id позиций → (B, U, d) входные векторы без позиций"""
        g = self.config.g
        if unit_ids.size(-1) != g:
            raise ShapeError(f"Units carry {unit_ids.size(-1)} ids, model g={g}")

        members = self.tok_emb(unit_ids)
        x = members[..., 0, :]
        if self.fusion is not None:
            fused = self.fusion(members)
            x = torch.where(is_group.unsqueeze(-1), fused, x)

        if (
            self.config.speaker_mode is SpeakerMode.VECTOR
            and speaker_slot is not None
            and speaker_vec is not None
        ):
            spk = self.spk_proj(speaker_vec.to(x.dtype)).unsqueeze(1)
            x = torch.where(speaker_slot.unsqueeze(-1), spk.expand_as(x), x)
        return x

    def forward_hidden(self, vectors: torch.Tensor) -> HiddenStates:
        """Строго каузальный проход; возвращает все слои"""
        T = vectors.size(1)
        if T > self.config.max_positions:
            raise SequenceLengthError(
                f"Sequence of {T} positions exceeds max_positions={self.config.max_positions}"
            )
        pos = torch.arange(T, device=vectors.device)
        x = self.drop(vectors + self.pos_emb(pos))
        layers = [x]
        for block in self.blocks:
            x = block(x)
            layers.append(x)
        return HiddenStates(layers=layers, final=self.ln_f(x))

    def language_logits(self, h: torch.Tensor) -> torch.Tensor:
        return self.lm_head(h)

    def speech_logits(self, h: torch.Tensor, slot: int | None = None) -> list[torch.Tensor]:
        """g срезов; при g=1 и заданной фазе slot - один срез её роли"""
        if slot is not None and self.config.g == 1:
            k = self.slices.slice_for_slot(slot)
            return [self.speech_head.proj[k](h)]
        return self.speech_head(h)

    def forward(
        self,
        unit_ids: torch.Tensor,
        is_group: torch.Tensor,
        speaker_slot: torch.Tensor | None = None,
        speaker_vec: torch.Tensor | None = None,
    ) -> ModelOutput:
        vectors = self.embed_stream(unit_ids, is_group, speaker_slot, speaker_vec)
        hidden = self.forward_hidden(vectors)
        return ModelOutput(
            hidden=hidden,
            text_logits=self.language_logits(hidden.final),
            speech_logits=self.speech_logits(hidden.final),
        )

    def forward_batch(self, batch: "Batch") -> ModelOutput:
        return self(batch.unit_ids, batch.is_group, batch.speaker_slot, batch.speaker_vec)

    @torch.no_grad()
    def hidden_states(self, batch: "Batch") -> HiddenStates:
        """Все слои для анализа выравнивания (слой 0 - эмбеддинги)"""
        vectors = self.embed_stream(
            batch.unit_ids, batch.is_group, batch.speaker_slot, batch.speaker_vec
        )
        return self.forward_hidden(vectors)
