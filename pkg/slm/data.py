"""Записи корпуса → потоки → батчи тензоров для модели"""

from collections.abc import Sequence
from dataclasses import dataclass, fields

import numpy as np
import torch

from app.core.errors import DataError
from slm.codec import ToyCodec
from slm.config import RunConfig
from slm.corpus import PretrainRecord, QARecord
from slm.tokens import (
    IGNORE_INDEX,
    ContextBuilder,
    FrameLayout,
    GroupedStream,
    SliceVocab,
    SpeechFrame,
    Task,
    TaskParts,
    TokenStream,
    Vocabulary,
    group_stream,
)


@dataclass
class Batch:
    unit_ids: torch.Tensor  # (B, U, g)
    is_group: torch.Tensor  # (B, U)
    speaker_slot: torch.Tensor  # (B, U)
    speaker_vec: torch.Tensor  # (B, d_spk)
    text_targets: torch.Tensor  # (B, U)
    speech_targets: torch.Tensor  # (B, U, n_slices)
    lengths: torch.Tensor  # (B,)

    def to(self, device: str | torch.device) -> "Batch":
        return Batch(**{f.name: getattr(self, f.name).to(device) for f in fields(self)})

    @property
    def prediction_count(self) -> int:
        return int((self.text_targets != IGNORE_INDEX).sum()) + int(
            (self.speech_targets != IGNORE_INDEX).any(dim=-1).sum()
        )


class StreamEncoder:
    """Кодек, словарь, раскладка и сборщик контекстов одного прогона"""

    def __init__(self, config: RunConfig, codec: ToyCodec | None = None):
        self.config = config
        self.codec = codec or ToyCodec(config.codec)
        self.vocab = Vocabulary.from_codec(config.codec)
        self.layout = FrameLayout(self.vocab, tuple(config.codec.slot_roles))
        self.builder = ContextBuilder(
            self.vocab,
            self.layout,
            config.model.speaker_mode,
            config.train.qa_format,
        )
        self.slices = SliceVocab(self.layout, config.model.head_mode, config.model.g)

    @property
    def g(self) -> int:
        return self.config.model.g

    def frames(self, text: str, speaker_id: int) -> list[SpeechFrame]:
        """Кадры кодека в id словаря"""
        codec_frames = self.codec.encode(text, self.codec.speaker(speaker_id))
        return [self.vocab.frame_from_codec(f, self.layout) for f in codec_frames]

    def codec_frames(self, frames: Sequence[SpeechFrame]) -> list[list[int]]:
        return [self.vocab.frame_to_codec(f, self.layout) for f in frames]

    def parts(self, task: Task, record: PretrainRecord | QARecord) -> TaskParts:
        if task is Task.ROLE_QA:
            if not isinstance(record, QARecord):
                raise DataError("role_qa needs a QA record")
            return TaskParts(
                speaker_id=record.speaker_id,
                question=record.question,
                question_frames=self.frames(
                    record.question, self.config.codec.question_speaker
                ),
                answer=record.answer,
                answer_frames=self.frames(record.answer, record.speaker_id),
            )
        if not isinstance(record, PretrainRecord):
            raise DataError(f"{task} needs a pretraining record")
        return TaskParts(
            text=record.text,
            frames=self.frames(record.text, record.speaker_id),
            speaker_id=record.speaker_id,
        )

    def stream(self, task: Task, record: PretrainRecord | QARecord) -> TokenStream:
        return self.builder.assemble(task, self.parts(task, record))

    def prompt(self, task: Task, parts: TaskParts) -> TokenStream:
        return self.builder.prompt(task, parts)

    def group(self, stream: TokenStream) -> GroupedStream:
        return group_stream(stream, self.g, self.layout)

    def speaker_vector(self, speaker_id: int | None) -> np.ndarray:
        if speaker_id is None:
            return np.zeros(self.config.codec.d_spk, dtype=np.float32)
        return self.codec.speaker(speaker_id).embedding

    def collate(self, streams: Sequence[GroupedStream], with_targets: bool = True) -> Batch:
        """Правое дополнение PAD-позициями без целей"""
        if not streams:
            raise DataError("Cannot collate an empty batch")
        B, U, g = len(streams), max(len(s) for s in streams), self.g
        pad = self.vocab.pad
        unit_ids = torch.full((B, U, g), pad, dtype=torch.long)
        is_group = torch.zeros((B, U), dtype=torch.bool)
        speaker_slot = torch.zeros((B, U), dtype=torch.bool)
        speaker_vec = torch.zeros((B, self.config.codec.d_spk), dtype=torch.float32)
        text_targets = torch.full((B, U), IGNORE_INDEX, dtype=torch.long)
        speech_targets = torch.full((B, U, self.slices.n_slices), IGNORE_INDEX, dtype=torch.long)

        for b, grouped in enumerate(streams):
            n = len(grouped)
            unit_ids[b, :n] = torch.tensor(grouped.input_ids(pad), dtype=torch.long)
            is_group[b, :n] = torch.tensor([u.is_group for u in grouped.units])
            speaker_slot[b, :n] = torch.tensor(
                [not u.is_group and u.ids[0] == self.vocab.spk_slot for u in grouped.units]
            )
            speaker_vec[b] = torch.from_numpy(self.speaker_vector(grouped.speaker_id))
            if with_targets:
                tt, st = grouped.targets(self.slices)
                text_targets[b, :n] = torch.tensor(tt, dtype=torch.long)
                speech_targets[b, :n] = torch.tensor(st, dtype=torch.long)

        return Batch(
            unit_ids=unit_ids,
            is_group=is_group,
            speaker_slot=speaker_slot,
            speaker_vec=speaker_vec,
            text_targets=text_targets,
            speech_targets=speech_targets,
            lengths=torch.tensor([len(s) for s in streams], dtype=torch.long),
        )

    def batch(self, items: Sequence[tuple[Task, PretrainRecord | QARecord]]) -> Batch:
        return self.collate([self.group(self.stream(task, record)) for task, record in items])


class StageSampler:
    """Сэмплер шагов обучения: pretrain смешивает TTS и ASR, sft - только role-QA"""

    def __init__(
        self,
        encoder: StreamEncoder,
        records: Sequence[PretrainRecord | QARecord],
        stage: str,
        seed: int,
    ):
        if not records:
            raise DataError(f"No training records for stage '{stage}'")
        self.encoder = encoder
        self.records = records
        self.stage = stage
        self.rng = np.random.default_rng([seed, 1 if stage == "pretrain" else 2])
        self.batch_size = encoder.config.train.batch_size
        self.asr_fraction = encoder.config.train.asr_fraction

    def _task(self) -> Task:
        if self.stage != "pretrain":
            return Task.ROLE_QA
        return Task.ASR if self.rng.random() < self.asr_fraction else Task.TTS

    def next_batch(self) -> Batch:
        items = []
        for _ in range(self.batch_size):
            task = self._task()
            record = self.records[int(self.rng.integers(len(self.records)))]
            items.append((task, record))
        return self.encoder.batch(items)
