"""Поток токенов → позиции модели (токены и MTP-группы) и цели предсказания.

Речевой отрезок пакуется pack_groups; EOS_SPEECH, закрывающий отрезок,
встаёт на первый свободный член последней группы (это всегда начало кадра),
а если последняя группа полная - образует отдельную терминальную группу
[EOS_SPEECH, PAD, …]. Так речевая голова сама завершает отрезок.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field

from app.core.errors import ConfigError, ShapeError
from slm.config import HeadMode, SlotRole
from slm.tokens.context import TokenStream
from slm.tokens.interleave import check_group_size, pack_groups
from slm.tokens.vocabulary import FrameLayout, SegmentTag

IGNORE_INDEX = -100


@dataclass(frozen=True)
class SliceVocab:
    """Подсловари срезов речевой головы и перевод id ↔ локальный индекс"""

    layout: FrameLayout
    head_mode: HeadMode
    g: int

    def __post_init__(self):
        check_group_size(self.g, self.layout)
        if self.head_mode is HeadMode.COUPLED:
            prosody = self.layout.vocab.segment("prosody")
            content = self.layout.vocab.segment("content")
            if prosody.end != content.offset:
                raise ConfigError("coupled head needs adjacent prosody/content segments")

    @property
    def roles(self) -> tuple[SlotRole, ...]:
        """Различные роли слотов в порядке появления в раскладке"""
        return tuple(dict.fromkeys(self.layout.slot_roles))

    @property
    def eos_role(self) -> SlotRole:
        return self.layout.role_at(0)

    @property
    def n_slices(self) -> int:
        if self.g > 1:
            return self.g
        return len(self.roles) if self.head_mode is HeadMode.DECOUPLED else 1

    def slice_role(self, k: int) -> SlotRole | None:
        """Роль среза; None - плоский словарь coupled"""
        if self.head_mode is HeadMode.COUPLED:
            return None
        if self.g > 1:
            return self.layout.role_at(k)
        return self.roles[k]

    def slice_for_slot(self, slot: int, member: int = 0) -> int:
        """Срез, предсказывающий член группы; для g=1 выбирается фазой слота"""
        if self.g > 1:
            return member
        if self.head_mode is HeadMode.COUPLED:
            return 0
        return self.roles.index(self.layout.role_at(slot))

    def _base(self, k: int) -> tuple[int, int, bool]:
        vocab = self.layout.vocab
        role = self.slice_role(k)
        if role is None:
            offset = vocab.segment("prosody").offset
            return offset, vocab.segment("content").end - offset, True
        segment = vocab.segment(str(role))
        return segment.offset, segment.size, role is self.eos_role

    def slice_size(self, k: int) -> int:
        _, size, has_eos = self._base(k)
        return size + int(has_eos)

    def to_local(self, k: int, token_id: int) -> int | None:
        offset, size, has_eos = self._base(k)
        if has_eos and token_id == self.layout.vocab.eos_speech:
            return size
        if offset <= token_id < offset + size:
            return token_id - offset
        return None

    def to_global(self, k: int, index: int) -> int:
        offset, size, has_eos = self._base(k)
        if has_eos and index == size:
            return self.layout.vocab.eos_speech
        if not 0 <= index < size:
            raise IndexError(f"Index {index} outside slice {k}")
        return offset + index


@dataclass(frozen=True)
class Unit:
    ids: tuple[int, ...]
    is_group: bool
    tag: SegmentTag
    in_loss: bool
    # абсолютный номер слота в речевом отрезке для каждого члена группы
    slots: tuple[int, ...] = ()


@dataclass
class GroupedStream:
    units: list[Unit] = field(default_factory=list)
    g: int = 1
    speaker_id: int | None = None

    def __len__(self) -> int:
        return len(self.units)

    def input_ids(self, pad: int) -> list[list[int]]:
        """[U, g]: токены дополняются PAD до ширины группы"""
        return [list(u.ids) + [pad] * (self.g - len(u.ids)) for u in self.units]

    def targets(self, slices: SliceVocab) -> tuple[list[int], list[list[int]]]:
        """Цели для каждой позиции i - это позиция i+1"""
        if slices.g != self.g:
            raise ShapeError(f"Stream grouped with g={self.g}, head has g={slices.g}")
        vocab = slices.layout.vocab
        text_targets = [IGNORE_INDEX] * len(self.units)
        speech_targets = [[IGNORE_INDEX] * slices.n_slices for _ in self.units]

        for i, nxt in enumerate(self.units[1:]):
            if not nxt.in_loss:
                continue
            if not nxt.is_group:
                token_id = nxt.ids[0]
                if token_id < vocab.language_size and token_id != vocab.pad:
                    text_targets[i] = token_id
                continue
            for member, (token_id, slot) in enumerate(zip(nxt.ids, nxt.slots, strict=True)):
                if token_id == vocab.pad:
                    continue
                k = slices.slice_for_slot(slot, member)
                local = slices.to_local(k, token_id)
                if local is not None:
                    speech_targets[i][k] = local
        return text_targets, speech_targets

    def prediction_count(self, slices: SliceVocab) -> int:
        text_targets, speech_targets = self.targets(slices)
        return sum(t != IGNORE_INDEX for t in text_targets) + sum(
            any(t != IGNORE_INDEX for t in row) for row in speech_targets
        )


def group_stream(stream: TokenStream, g: int, layout: FrameLayout) -> GroupedStream:
    check_group_size(g, layout)
    vocab = layout.vocab
    grouped = GroupedStream(g=g, speaker_id=stream.speaker_id)
    spans = {start: end for start, end in stream.speech_spans()}

    i = 0
    while i < len(stream):
        if i not in spans:
            grouped.units.append(
                Unit(
                    (stream.tokens[i],),
                    False,
                    stream.segment_tags[i],
                    stream.loss_mask[i],
                    (0,),
                )
            )
            i += 1
            continue

        end = spans[i]
        tag, in_loss = stream.segment_tags[i], stream.loss_mask[i]
        span = stream.tokens[i:end]
        groups = pack_groups(span, g, layout)
        units = [
            Unit(grp.member_ids, True, tag, in_loss, tuple(range(j * g, j * g + g)))
            for j, grp in enumerate(groups)
        ]

        if end < len(stream) and stream.tokens[end] == vocab.eos_speech:
            eos_in_loss = stream.loss_mask[end]
            real = len(span) - (len(groups) - 1) * g if groups else g
            if groups and real < g:
                # EOS занимает первый PAD последней группы
                last = units[-1]
                ids = list(last.ids)
                ids[real] = vocab.eos_speech
                units[-1] = Unit(tuple(ids), True, tag, in_loss or eos_in_loss, last.slots)
            else:
                base = len(span)
                units.append(
                    Unit(
                        (vocab.eos_speech,) + (vocab.pad,) * (g - 1),
                        True,
                        SegmentTag.SPECIAL,
                        eos_in_loss,
                        tuple(range(base, base + g)),
                    )
                )
            end += 1

        grouped.units.extend(units)
        i = end
    return grouped


def split_generated_group(
    members: Sequence[int], eos_speech: int, slots_per_frame: int
) -> tuple[list[int], bool]:
    """Члены сгенерированной группы до EOS (EOS учитывается только в начале кадра)"""
    for k, token_id in enumerate(members):
        if token_id == eos_speech and k % slots_per_frame == 0:
            return list(members[:k]), True
    return list(members), False
