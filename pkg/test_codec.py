import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import EncodingError
from slm.codec import (
    UNKNOWN_SPEAKER,
    ToyCodec,
    edit_distance,
    speaker_match,
    token_error_rate,
)
from slm.config import CodecConfig


@pytest.fixture
def codec() -> ToyCodec:
    return ToyCodec(CodecConfig())


def _random_texts(codec: ToyCodec, n: int, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    charset = codec.config.charset
    return [
        "".join(charset[i] for i in rng.integers(0, len(charset), size=rng.integers(1, 24)))
        for _ in range(n)
    ]


def test_encode_formula(codec):
    assert codec.encode("a", codec.speaker(0)) == [[0, 0, 0], [1, 0, 1]]
    assert codec.encode("", codec.speaker(5)) == []


def test_encode_is_deterministic(codec):
    spk = codec.speaker(7)
    assert codec.encode("hello world", spk) == codec.encode("hello world", spk)


def test_decode_inverts_encode(codec):
    rng = np.random.default_rng(1)
    for text in _random_texts(codec, 10_000):
        spk = int(rng.integers(codec.config.speakers))
        decoded = codec.decode(codec.encode(text, codec.speaker(spk)))
        assert (decoded.text, decoded.speaker_estimate, decoded.valid) == (text, spk, True)


def test_decode_empty(codec):
    decoded = codec.decode([])
    assert (decoded.text, decoded.speaker_estimate, decoded.valid) == ("", UNKNOWN_SPEAKER, True)


def test_corrupted_content_costs_one_edit(codec):
    frames = codec.encode("hello", codec.speaker(3))
    frames[4][1] = codec.config.charset.index("z")
    decoded = codec.decode(frames)
    assert decoded.text == "hezlo"
    assert not decoded.valid
    assert edit_distance(decoded.text, "hello") == 1


def test_decode_tolerates_garbage(codec):
    decoded = codec.decode([[0], [999, 999, 999, 1]])
    assert not decoded.valid


def test_token_error_rate(codec):
    spk = codec.speaker(0)
    ref = codec.encode("abc", spk)
    assert token_error_rate(codec, ref, ref) == 0.0
    assert token_error_rate(codec, ref, codec.encode("abd", spk)) == pytest.approx(1 / 3)
    assert token_error_rate(codec, codec.encode("ab", spk), [[0]]) == 1.0
    assert token_error_rate(codec, [], []) == 0.0
    assert token_error_rate(codec, [], ref) == 1.0


def test_speaker_match_self_and_empty(codec):
    spk = codec.speaker(4)
    assert speaker_match(codec, codec.encode("speech", spk), spk) == 1.0
    assert speaker_match(codec, [], spk) == 0.0


def test_speaker_bands_are_disjoint(codec):
    n = codec.config.speakers
    for a in range(n):
        frames = codec.encode("abcd", codec.speaker(a))
        for b in range(n):
            if a != b:
                assert speaker_match(codec, frames, codec.speaker(b)) == 0.0


def test_speaker_match_uniform_prosody(codec):
    rng = np.random.default_rng(0)
    prosody = rng.integers(0, codec.config.prosody_vocab, size=20_000)
    frames = [[int(p), 0, 0] for p in prosody]
    assert speaker_match(codec, frames, codec.speaker(2)) == pytest.approx(4 / 64, abs=0.01)


def test_speaker_embedding_unit_norm(codec):
    a, b = codec.speaker(1), codec.speaker(1)
    assert np.array_equal(a.embedding, b.embedding)
    assert np.linalg.norm(a.embedding) == pytest.approx(1.0, abs=1e-6)
    assert not np.array_equal(a.embedding, codec.speaker(2).embedding)


def test_out_of_range_inputs(codec):
    with pytest.raises(EncodingError):
        codec.encode("Hello", codec.speaker(0))
    with pytest.raises(EncodingError):
        codec.speaker(codec.config.speakers)


def test_config_rejects_overlapping_bands():
    with pytest.raises(ValidationError):
        CodecConfig(speakers=32, prosody_band=4, prosody_vocab=64)
