from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

from app.core.errors import FormatError
from slm.config import QAFormat, SpeakerMode
from slm.tokens.interleave import interleave_fwi
from slm.tokens.vocabulary import FrameLayout, SegmentTag, Vocabulary


class Task(str, Enum):
    TTS = "tts"
    ASR = "asr"
    ROLE_QA = "role_qa"

    def __str__(self):
        return self.value


@dataclass
class TokenStream:
    tokens: list[int] = field(default_factory=list)
    segment_tags: list[SegmentTag] = field(default_factory=list)
    loss_mask: list[bool] = field(default_factory=list)
    speaker_id: int | None = None

    def __post_init__(self):
        if not len(self.tokens) == len(self.segment_tags) == len(self.loss_mask):
            raise ValueError("tokens, segment_tags and loss_mask differ in length")

    def __len__(self) -> int:
        return len(self.tokens)

    def append(self, ids: Sequence[int], tag: SegmentTag, in_loss: bool = False) -> None:
        self.tokens.extend(ids)
        self.segment_tags.extend([tag] * len(ids))
        self.loss_mask.extend([in_loss] * len(ids))

    def copy(self) -> "TokenStream":
        return TokenStream(
            list(self.tokens),
            list(self.segment_tags),
            list(self.loss_mask),
            self.speaker_id,
        )

    def speech_spans(self) -> list[tuple[int, int]]:
        """[start, end) для каждого непрерывного речевого отрезка"""
        spans, start = [], None
        for i, tag in enumerate(self.segment_tags):
            if tag.is_speech and start is None:
                start = i
            elif not tag.is_speech and start is not None:
                spans.append((start, i))
                start = None
        if start is not None:
            spans.append((start, len(self.tokens)))
        return spans


@dataclass
class TaskParts:
    """Части контекста; кадры уже в id словаря"""

    text: str | None = None
    frames: list[list[int]] | None = None
    speaker_id: int | None = None
    question: str | None = None
    question_frames: list[list[int]] | None = None
    answer: str | None = None
    answer_frames: list[list[int]] | None = None


class ContextBuilder:
    """Сборка контекстов TTS / ASR / role-QA в одном словаре и раскладке"""

    def __init__(
        self,
        vocab: Vocabulary,
        layout: FrameLayout,
        speaker_mode: SpeakerMode = SpeakerMode.VECTOR,
        qa_format: QAFormat = QAFormat.TQ_TA_SA,
    ):
        self.vocab = vocab
        self.layout = layout
        self.speaker_mode = SpeakerMode(speaker_mode)
        self.qa_format = QAFormat(qa_format)

    def assemble(self, task: Task | str, parts: TaskParts) -> TokenStream:
        return self._build(Task(task), parts, prompt_only=False)

    def prompt(self, task: Task | str, parts: TaskParts) -> TokenStream:
        """Префикс контекста до первой генерируемой позиции"""
        return self._build(Task(task), parts, prompt_only=True)

    def _build(self, task: Task, parts: TaskParts, prompt_only: bool) -> TokenStream:
        stream = TokenStream(speaker_id=parts.speaker_id)
        v = self.vocab

        if task is Task.TTS:
            _require(parts.text, "tts", "text")
            self._speaker_prefix(stream, parts)
            stream.append(v.encode_text(parts.text), SegmentTag.TEXT_Q)
            stream.append([v.eos_text], SegmentTag.SPECIAL)
            if prompt_only:
                return stream
            _require(parts.frames, "tts", "frames")
            self._speech(stream, parts.frames, SegmentTag.SPEECH_A, in_loss=True)
            return stream

        if task is Task.ASR:
            _require(parts.frames, "asr", "frames")
            self._speech(stream, parts.frames, SegmentTag.SPEECH_Q, in_loss=False)
            if prompt_only:
                return stream
            _require(parts.text, "asr", "text")
            stream.append(v.encode_text(parts.text), SegmentTag.TEXT_A, in_loss=True)
            stream.append([v.eos_text], SegmentTag.SPECIAL, in_loss=True)
            return stream

        self._speaker_prefix(stream, parts)
        if self.qa_format is QAFormat.SQ_SA:
            _require(parts.question_frames, "role_qa", "question_frames")
            self._speech(stream, parts.question_frames, SegmentTag.SPEECH_Q, False)
        else:
            _require(parts.question, "role_qa", "question")
            stream.append(v.encode_text(parts.question), SegmentTag.TEXT_Q)
            stream.append([v.eos_text], SegmentTag.SPECIAL)

        if self.qa_format is QAFormat.TQ_TA_SA:
            stream.append([v.mark_ta], SegmentTag.SPECIAL)
            if prompt_only:
                return stream
            _require(parts.answer, "role_qa", "answer")
            stream.append(v.encode_text(parts.answer), SegmentTag.TEXT_A, in_loss=True)
            stream.append([v.eos_text], SegmentTag.SPECIAL, in_loss=True)

        stream.append([v.mark_ua], SegmentTag.SPECIAL)
        if prompt_only:
            return stream
        _require(parts.answer_frames, "role_qa", "answer_frames")
        self._speech(stream, parts.answer_frames, SegmentTag.SPEECH_A, in_loss=True)
        return stream

    def _speaker_prefix(self, stream: TokenStream, parts: TaskParts) -> None:
        if self.speaker_mode is SpeakerMode.OFF:
            return
        if parts.speaker_id is None:
            raise FormatError("Speaker-aware context requires a speaker_id")
        if self.speaker_mode is SpeakerMode.VECTOR:
            slot = self.vocab.spk_slot
        else:
            slot = self.vocab.speaker_token(parts.speaker_id)
        stream.append([self.vocab.mark_spk], SegmentTag.SPECIAL)
        stream.append([slot], SegmentTag.SPEAKER)

    def _speech(
        self,
        stream: TokenStream,
        frames: list[list[int]],
        tag: SegmentTag,
        in_loss: bool,
    ) -> None:
        stream.append(interleave_fwi(frames, self.layout), tag, in_loss)
        stream.append([self.vocab.eos_speech], SegmentTag.SPECIAL, in_loss)


def _require(value, task: str, name: str) -> None:
    if not value:
        raise FormatError(f"{task} context is missing mandatory part '{name}'")


def assemble_context(
    task: Task | str,
    parts: TaskParts,
    vocab: Vocabulary,
    layout: FrameLayout,
    speaker_mode: SpeakerMode = SpeakerMode.VECTOR,
    qa_format: QAFormat = QAFormat.TQ_TA_SA,
) -> TokenStream:
    return ContextBuilder(vocab, layout, speaker_mode, qa_format).assemble(task, parts)


def build_prompt(
    task: Task | str,
    parts: TaskParts,
    vocab: Vocabulary,
    layout: FrameLayout,
    speaker_mode: SpeakerMode = SpeakerMode.VECTOR,
    qa_format: QAFormat = QAFormat.TQ_TA_SA,
) -> TokenStream:
    return ContextBuilder(vocab, layout, speaker_mode, qa_format).prompt(task, parts)
