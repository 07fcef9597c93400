import pytest
import torch

from app.core.errors import ConfigError
from conftest import micro_config
from slm import generation
from slm.checkpoint import build_model
from slm.codec import token_error_rate
from slm.config import EvalConfig, HeadMode, QAFormat
from slm.data import StreamEncoder
from slm.generation import (
    GreedyDecoder,
    Modality,
    apply_repetition_penalty,
    decode_plan,
    greedy_decode,
    speech_outcome,
    synthesize_answer,
    synthesize_speech,
)
from slm.tokens import Task, TaskParts


class TestRepetitionPenalty:
    def test_positive_logit_is_divided(self):
        adjusted = apply_repetition_penalty(torch.tensor([2.0, 1.0]), [0], 1.2)
        assert adjusted.tolist() == pytest.approx([1.6667, 1.0], abs=1e-4)
        assert int(adjusted.argmax()) == 0

    def test_negative_logit_is_multiplied(self):
        adjusted = apply_repetition_penalty(torch.tensor([-1.0, 0.5]), [0, 0], 1.5)
        assert adjusted.tolist() == pytest.approx([-1.5, 0.5])

    def test_unit_penalty_is_identity(self):
        logits = torch.randn(10)
        assert torch.equal(apply_repetition_penalty(logits, [1, 2, 3], 1.0), logits)

    def test_larger_penalty_never_raises_repeated_logit(self):
        logits = torch.randn(50)
        history = list(range(0, 50, 3))
        previous = logits[history]
        for gamma in (1.1, 1.5, 2.0, 4.0):
            current = apply_repetition_penalty(logits, history, gamma)[history]
            assert torch.all(current <= previous + 1e-7)
            previous = current

    def test_out_of_range_history_is_ignored(self):
        logits = torch.tensor([1.0, 2.0])
        assert torch.equal(apply_repetition_penalty(logits, [5, -1], 2.0), logits)


def test_decode_plans():
    assert decode_plan(Task.TTS, QAFormat.TQ_TA_SA, 5) == [Modality.SPEECH]
    assert decode_plan(Task.ASR, QAFormat.TQ_TA_SA, 5) == [Modality.TEXT]
    assert decode_plan(Task.ROLE_QA, QAFormat.TQ_TA_SA, 5) == [
        Modality.TEXT,
        5,
        Modality.SPEECH,
    ]
    assert decode_plan(Task.ROLE_QA, QAFormat.SQ_SA, 5) == [Modality.SPEECH]


def _scripted_speech_head(model, n_groups: int):
    """Подмена речевой головы: n_groups полных групп, затем EOS_SPEECH"""
    slices = model.slices
    calls = {"n": 0}

    def speech_logits(h, slot=None):
        if slot is not None and model.config.g == 1:
            ks = [slices.slice_for_slot(slot)]
        else:
            ks = range(slices.n_slices)
        out = []
        for k in ks:
            logits = torch.zeros(slices.slice_size(k))
            logits[0] = 1.0
            out.append(logits)
        if calls["n"] >= n_groups:
            out[0] = torch.zeros_like(out[0])
            out[0][-1] = 1.0
        calls["n"] += 1
        return out

    return speech_logits


@pytest.mark.parametrize("g", [1, 12])
def test_step_count_law(g, monkeypatch):
    config = micro_config(g=g, n_layers=1)
    model = build_model(config).eval()
    monkeypatch.setattr(model, "speech_logits", _scripted_speech_head(model, 240 // g))
    encoder = StreamEncoder(config)
    prompt = encoder.prompt(Task.TTS, TaskParts(text="ab", speaker_id=0))

    result = greedy_decode(model, encoder, prompt, [Modality.SPEECH], max_new=1000, rep_penalty=1.0)
    assert result.finished
    assert len(result.speech_tokens) == 240
    assert result.speech_steps == 240 // g
    assert result.forward_passes == 240 // g + 1


def test_max_new_stops_unfinished_decode():
    config = micro_config(g=3, n_layers=1)
    model = build_model(config).eval()
    model.speech_logits = _scripted_speech_head(model, 10_000)
    encoder = StreamEncoder(config)
    prompt = encoder.prompt(Task.TTS, TaskParts(text="ab", speaker_id=0))
    result = greedy_decode(model, encoder, prompt, [Modality.SPEECH], max_new=12, rep_penalty=1.0)
    assert not result.finished
    assert len(result.speech_tokens) == 12


def test_decoder_rejects_bad_settings():
    config = micro_config(g=3)
    model = build_model(config)
    with pytest.raises(ConfigError):
        GreedyDecoder(model, StreamEncoder(micro_config(g=6)))
    with pytest.raises(ConfigError):
        GreedyDecoder(model, StreamEncoder(config), rep_penalty=0.9)


def test_synthesis_is_deterministic():
    config = micro_config(g=3)
    torch.manual_seed(0)
    model = build_model(config).eval()
    encoder = StreamEncoder(config)
    cfg = EvalConfig(max_new=24)
    a = synthesize_speech(model, encoder, "abc", 1, cfg)
    b = synthesize_speech(model, encoder, "abc", 1, cfg)
    assert a == b
    assert a.forward_passes >= a.speech_steps


def test_answer_uses_text_phase_then_speech():
    config = micro_config(g=3)
    torch.manual_seed(0)
    model = build_model(config).eval()
    encoder = StreamEncoder(config)
    result = synthesize_answer(model, encoder, "what is abc?", 2, EvalConfig(max_new=24))
    assert isinstance(result.success, bool)
    assert set(result.text) <= set(config.codec.charset)
    assert result.speech_tokens <= 24


def _coupled_encoder(**overrides) -> StreamEncoder:
    return StreamEncoder(micro_config(g=3, head_mode=HeadMode.COUPLED, **overrides))


def _tokens(encoder: StreamEncoder, text: str, speaker_id: int) -> list[int]:
    return [t for frame in encoder.frames(text, speaker_id) for t in frame]


class TestSpeechOutcome:
    def test_clean_span_succeeds(self):
        encoder = _coupled_encoder()
        frames, success, speaker = speech_outcome(encoder, _tokens(encoder, "hello world", 2))
        assert success and speaker == 2
        assert encoder.codec.decode(frames).text == "hello world"

    def test_off_role_token_keeps_best_effort_text(self):
        encoder = _coupled_encoder()
        codec = encoder.codec
        tokens = _tokens(encoder, "hello world", 2)
        # prosody-слот последнего кадра получает content-id
        tokens[-3] = encoder.vocab.segment("content").offset + 5
        frames, success, speaker = speech_outcome(encoder, tokens)
        assert not success
        assert len(frames) == len(tokens) // 3
        assert speaker == 2
        reference = codec.encode("hello world", codec.speaker(2))
        assert token_error_rate(codec, reference, frames) < 0.5

    def test_partial_trailing_frame_is_dropped(self):
        encoder = _coupled_encoder()
        codec = encoder.codec
        tokens = _tokens(encoder, "hello world", 2)
        frames, success, _ = speech_outcome(encoder, tokens[:-1])
        assert not success
        assert len(frames) == len(tokens) // 3 - 1
        reference = codec.encode("hello world", codec.speaker(2))
        assert token_error_rate(codec, reference, frames) < 0.5

    def test_unfinished_decode_is_not_a_success(self):
        encoder = _coupled_encoder()
        _, success, _ = speech_outcome(encoder, _tokens(encoder, "ab", 1), finished=False)
        assert not success


def test_max_new_caps_a_wide_group():
    config = micro_config(g=12, n_layers=1)
    model = build_model(config).eval()
    model.speech_logits = _scripted_speech_head(model, 10_000)
    encoder = StreamEncoder(config)
    prompt = encoder.prompt(Task.TTS, TaskParts(text="ab", speaker_id=0))
    result = greedy_decode(model, encoder, prompt, [Modality.SPEECH], max_new=18, rep_penalty=1.0)
    assert not result.finished
    assert len(result.speech_tokens) == 18
    assert result.speech_steps == 2


def _fixed_speech_head(model):
    """Каждый срез предпочитает локальный id 0, следом идёт id 1"""
    slices = model.slices

    def speech_logits(h, slot=None):
        out = []
        for k in range(slices.n_slices):
            logits = torch.zeros(slices.slice_size(k))
            logits[0], logits[1] = 1.0, 0.9
            out.append(logits)
        return out

    return speech_logits


@pytest.mark.parametrize("penalize", [True, False])
def test_penalize_speech_flag(penalize, monkeypatch):
    config = micro_config(g=3, n_layers=1)
    model = build_model(config).eval()
    monkeypatch.setattr(model, "speech_logits", _fixed_speech_head(model))
    encoder = StreamEncoder(config)
    prompt = encoder.prompt(Task.TTS, TaskParts(text="ab", speaker_id=0))
    result = greedy_decode(
        model,
        encoder,
        prompt,
        [Modality.SPEECH],
        max_new=6,
        rep_penalty=2.0,
        penalize_speech=penalize,
    )
    first, second = result.speech_tokens[:3], result.speech_tokens[3:]
    if penalize:
        assert second == [t + 1 for t in first]
    else:
        assert second == first


def _utterance_head(model, tokens: list[int]):
    """Речевая голова диктует заданные токены группами, затем EOS_SPEECH"""
    slices, g = model.slices, model.config.g
    state = {"pos": 0}

    def speech_logits(h, slot=None):
        out = []
        for k in range(slices.n_slices):
            pos = state["pos"] + k
            logits = torch.zeros(slices.slice_size(k))
            if pos < len(tokens):
                logits[slices.to_local(k, tokens[pos])] = 1.0
            else:
                logits[slices.slice_size(k) - 1] = 1.0
            out.append(logits)
        state["pos"] += g
        return out

    return speech_logits


def _speech_answer_setup(qa_format: QAFormat, monkeypatch, tokens_for):
    config = micro_config(g=3, n_layers=1, head_mode=HeadMode.COUPLED)
    config = config.model_copy(
        update={"train": config.train.model_copy(update={"qa_format": qa_format})}
    )
    model = build_model(config).eval()
    encoder = StreamEncoder(config)
    monkeypatch.setattr(model, "speech_logits", _utterance_head(model, tokens_for(encoder)))
    return model, encoder


@pytest.mark.parametrize("qa_format", [QAFormat.TQ_SA, QAFormat.SQ_SA])
def test_speech_only_answer_is_transcribed(qa_format, monkeypatch):
    model, encoder = _speech_answer_setup(
        qa_format, monkeypatch, lambda enc: _tokens(enc, "ab", 1)
    )
    heard = []

    def fake_transcribe(model, encoder, frames, cfg):
        heard.append(frames)
        return "ab"

    monkeypatch.setattr(generation, "transcribe", fake_transcribe)
    result = synthesize_answer(
        model, encoder, "what is ab?", 1, EvalConfig(max_new=60, rep_penalty=1.0)
    )
    assert result.success
    assert result.text == "ab"
    assert result.speaker_estimate == 1
    assert heard == [encoder.frames("ab", 1)]


def test_malformed_speech_answer_falls_back_to_codec(monkeypatch):
    def corrupted(encoder):
        tokens = _tokens(encoder, "ab", 1)
        tokens[-3] = encoder.vocab.segment("content").offset + 5
        return tokens

    model, encoder = _speech_answer_setup(QAFormat.TQ_SA, monkeypatch, corrupted)

    def no_transcribe(*args, **kwargs):
        raise AssertionError("malformed speech must not be transcribed")

    monkeypatch.setattr(generation, "transcribe", no_transcribe)
    result = synthesize_answer(
        model, encoder, "what is ab?", 1, EvalConfig(max_new=60, rep_penalty=1.0)
    )
    assert not result.success
    assert result.text == "ab"
