"""Жадное декодирование: текст по токену, речь группами по g токенов"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum

import torch

from app.core.errors import ConfigError, LayoutError
from slm.config import EvalConfig, QAFormat
from slm.data import StreamEncoder
from slm.model import SpeechLM
from slm.tokens import (
    GroupedStream,
    SegmentTag,
    Task,
    TaskParts,
    TokenStream,
    Unit,
    deinterleave,
    split_generated_group,
)

logger = logging.getLogger(__name__)


class Modality(str, Enum):
    TEXT = "text"
    SPEECH = "speech"

    def __str__(self):
        return self.value


# Шаг плана: фаза генерации или принудительно вставляемый id
PlanStep = Modality | int


def apply_repetition_penalty(
    logits: torch.Tensor, history: Iterable[int], penalty: float
) -> torch.Tensor:
    """CTRL: для уже сгенерированных id logit/γ при logit > 0, иначе logit·γ"""
    if penalty == 1.0:
        return logits
    ids = sorted({int(i) for i in history if 0 <= int(i) < logits.size(-1)})
    if not ids:
        return logits
    index = torch.tensor(ids, dtype=torch.long, device=logits.device)
    picked = logits.gather(-1, index)
    picked = torch.where(picked > 0, picked / penalty, picked * penalty)
    return logits.scatter(-1, index, picked)


def decode_plan(task: Task, qa_format: QAFormat, mark_ua: int) -> list[PlanStep]:
    if task is Task.TTS:
        return [Modality.SPEECH]
    if task is Task.ASR:
        return [Modality.TEXT]
    if qa_format is QAFormat.TQ_TA_SA:
        return [Modality.TEXT, mark_ua, Modality.SPEECH]
    return [Modality.SPEECH]


@dataclass
class DecodeResult:
    stream: TokenStream
    text_ids: list[int] = field(default_factory=list)
    speech_tokens: list[int] = field(default_factory=list)
    # каждая фаза закончилась своим терминатором до max_new
    finished: bool = False
    forward_passes: int = 0
    speech_steps: int = 0


class GreedyDecoder:
    def __init__(
        self,
        model: SpeechLM,
        encoder: StreamEncoder,
        max_new: int = 512,
        rep_penalty: float = 1.2,
        penalize_speech: bool = True,
    ):
        if model.config.g != encoder.g:
            raise ConfigError(f"Model g={model.config.g} but stream config g={encoder.g}")
        if rep_penalty < 1.0:
            raise ConfigError(f"rep_penalty must be >= 1, got {rep_penalty}")
        self.model = model
        self.encoder = encoder
        self.vocab = encoder.vocab
        self.slices = model.slices
        self.max_new = max_new
        self.rep_penalty = rep_penalty
        self.penalize_speech = penalize_speech

        text = self.vocab.segment("text")
        admissible = torch.full((self.vocab.language_size,), float("-inf"))
        admissible[text.offset : text.end] = 0.0
        admissible[self.vocab.eos_text] = 0.0
        self._text_mask = admissible

    def _last_hidden(self, grouped: GroupedStream) -> torch.Tensor:
        device = next(self.model.parameters()).device
        batch = self.encoder.collate([grouped], with_targets=False).to(device)
        hidden = self.model.hidden_states(batch)
        return hidden.final[0, -1]

    def _text_token(self, h: torch.Tensor, history: list[int]) -> int:
        logits = self.model.language_logits(h)
        logits = apply_repetition_penalty(logits, history, self.rep_penalty)
        logits = logits + self._text_mask.to(logits.device)
        return int(torch.argmax(logits))

    def _speech_group(self, h: torch.Tensor, slot: int, history: list[int]) -> list[int]:
        penalty = self.rep_penalty if self.penalize_speech else 1.0
        slice_logits = self.model.speech_logits(h, slot)
        members = []
        for member, logits in enumerate(slice_logits):
            k = self.slices.slice_for_slot(slot + member, member)
            local = [self.slices.to_local(k, t) for t in history]
            logits = apply_repetition_penalty(
                logits, (i for i in local if i is not None), penalty
            )
            members.append(self.slices.to_global(k, int(torch.argmax(logits))))
        return members

    @torch.no_grad()
    def decode(self, prompt: TokenStream, plan: Sequence[PlanStep]) -> DecodeResult:
        g = self.encoder.g
        spf = self.encoder.layout.slots_per_frame
        vocab = self.vocab
        grouped = self.encoder.group(prompt)
        result = DecodeResult(stream=prompt.copy())
        generated: list[int] = []
        max_units = self.model.config.max_positions

        for step in plan:
            if not isinstance(step, Modality):
                grouped.units.append(Unit((step,), False, SegmentTag.SPECIAL, False, (0,)))
                result.stream.append([step], SegmentTag.SPECIAL)
                continue

            phase_done = False
            slot = 0
            while len(generated) < self.max_new and len(grouped) < max_units:
                h = self._last_hidden(grouped)
                result.forward_passes += 1

                if step is Modality.TEXT:
                    token = self._text_token(h, generated)
                    generated.append(token)
                    grouped.units.append(
                        Unit((token,), False, SegmentTag.TEXT_A, False, (0,))
                    )
                    if token == vocab.eos_text:
                        result.stream.append([token], SegmentTag.SPECIAL)
                        phase_done = True
                        break
                    result.stream.append([token], SegmentTag.TEXT_A)
                    result.text_ids.append(token)
                    continue

                members = self._speech_group(h, slot, generated)
                real, ended = split_generated_group(members, vocab.eos_speech, spf)
                budget = self.max_new - len(generated)
                if len(real) > budget:
                    real, ended = real[:budget], False
                if real:
                    result.speech_steps += 1
                    result.speech_tokens.extend(real)
                    result.stream.append(real, SegmentTag.SPEECH_A)
                generated.extend(real)
                ids = real + [vocab.eos_speech] if ended else list(real)
                ids += [vocab.pad] * (g - len(ids))
                grouped.units.append(
                    Unit(tuple(ids), True, SegmentTag.SPEECH_A, False, tuple(range(slot, slot + g)))
                )
                slot += g
                if ended:
                    result.stream.append([vocab.eos_speech], SegmentTag.SPECIAL)
                    phase_done = True
                    break

            if not phase_done:
                logger.debug(
                    f"[GEN] {step} phase stopped at max_new={self.max_new} "
                    f"or max_positions={max_units}"
                )
                return result

        result.finished = True
        return result


def greedy_decode(
    model: SpeechLM,
    encoder: StreamEncoder,
    prompt: TokenStream,
    plan: Sequence[PlanStep],
    max_new: int = 512,
    rep_penalty: float = 1.2,
    penalize_speech: bool = True,
) -> DecodeResult:
    decoder = GreedyDecoder(model, encoder, max_new, rep_penalty, penalize_speech)
    return decoder.decode(prompt, plan)


@dataclass
class SynthesisResult:
    text: str
    frames: list[list[int]]
    success: bool
    forward_passes: int
    speech_steps: int
    speech_tokens: int
    speaker_estimate: int | None = None


def _decoder(model: SpeechLM, encoder: StreamEncoder, cfg: EvalConfig) -> GreedyDecoder:
    return GreedyDecoder(model, encoder, cfg.max_new, cfg.rep_penalty, cfg.penalize_speech)


def speech_outcome(
    encoder: StreamEncoder, speech_tokens: Sequence[int], finished: bool = True
) -> tuple[list[list[int]], bool, int | None]:
    """Кодек-кадры, флаг успеха и оценка диктора по сгенерированной речи

    Целые кадры уходят в кодек как есть, даже с id чужой роли; обрезанный
    хвостовой кадр отбрасывается. Такой вывод не считается успешным.
    """
    spf = encoder.layout.slots_per_frame
    usable = len(speech_tokens) - len(speech_tokens) % spf
    well_formed = usable == len(speech_tokens)
    if not well_formed:
        logger.debug(f"[GEN] dropped partial frame of {len(speech_tokens) - usable} tokens")
    try:
        deinterleave(speech_tokens[:usable], encoder.layout)
    except LayoutError as e:
        logger.debug(f"[GEN] off-role speech token: {e}")
        well_formed = False

    frames = [list(speech_tokens[i : i + spf]) for i in range(0, usable, spf)]
    codec_frames = encoder.codec_frames(frames)
    decoded = encoder.codec.decode(codec_frames)
    success = finished and well_formed and bool(codec_frames) and decoded.valid
    return codec_frames, success, decoded.speaker_estimate


def synthesize_speech(
    model: SpeechLM,
    encoder: StreamEncoder,
    text: str,
    speaker_id: int | None,
    cfg: EvalConfig,
) -> SynthesisResult:
    """TTS: текст → речевой отрезок"""
    prompt = encoder.prompt(Task.TTS, TaskParts(text=text, speaker_id=speaker_id))
    result = _decoder(model, encoder, cfg).decode(prompt, [Modality.SPEECH])
    frames, success, speaker = speech_outcome(encoder, result.speech_tokens, result.finished)
    return SynthesisResult(
        text=text,
        frames=frames,
        success=success,
        forward_passes=result.forward_passes,
        speech_steps=result.speech_steps,
        speech_tokens=len(result.speech_tokens),
        speaker_estimate=speaker,
    )


def transcribe(
    model: SpeechLM,
    encoder: StreamEncoder,
    frames: Sequence[Sequence[int]],
    cfg: EvalConfig,
) -> str:
    """ASR: кадры в id словаря → текст"""
    prompt = encoder.prompt(Task.ASR, TaskParts(frames=[list(f) for f in frames]))
    result = _decoder(model, encoder, cfg).decode(prompt, [Modality.TEXT])
    return encoder.vocab.decode_text(result.text_ids)


def synthesize_answer(
    model: SpeechLM,
    encoder: StreamEncoder,
    question: str,
    speaker_id: int | None,
    cfg: EvalConfig,
) -> SynthesisResult:
    """Role-QA: вопрос → текстовый и речевой ответ с учётом успеха и шагов"""
    qa_format = encoder.config.train.qa_format
    parts = TaskParts(
        speaker_id=speaker_id,
        question=question,
        question_frames=encoder.frames(question, encoder.config.codec.question_speaker),
    )
    prompt = encoder.prompt(Task.ROLE_QA, parts)
    plan = decode_plan(Task.ROLE_QA, qa_format, encoder.vocab.mark_ua)
    result = _decoder(model, encoder, cfg).decode(prompt, plan)
    frames, success, speaker = speech_outcome(encoder, result.speech_tokens, result.finished)

    if qa_format is QAFormat.TQ_TA_SA:
        text = encoder.vocab.decode_text(result.text_ids)
    elif success:
        vocab_frames = [encoder.vocab.frame_from_codec(f, encoder.layout) for f in frames]
        text = transcribe(model, encoder, vocab_frames, cfg)
    else:
        text = encoder.codec.decode(frames).text

    return SynthesisResult(
        text=text,
        frames=frames,
        success=success,
        forward_passes=result.forward_passes,
        speech_steps=result.speech_steps,
        speech_tokens=len(result.speech_tokens),
        speaker_estimate=speaker,
    )
