"""Синтетический обратимый речевой кодек.

Символ с индексом x в позиции i даёт frames_per_char кадров; кадр r равен
[band_base + (i + r) mod prosody_band, x, (x + r) mod content_vocab].
Все id здесь локальные для кодбуков (prosody 0…P-1, content 0…C-1).
"""

from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from app.core.errors import EncodingError
from slm.config import CodecConfig

UNKNOWN_SPEAKER = -1
_SPEAKER_SEED = 0x5EED


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: int
    band_base: int
    embedding: np.ndarray

    def band(self, prosody_band: int) -> range:
        return range(self.band_base, self.band_base + prosody_band)


@dataclass(frozen=True)
class DecodeResult:
    text: str
    speaker_estimate: int
    valid: bool


class ToyCodec:
    def __init__(self, config: CodecConfig | None = None):
        self.config = config or CodecConfig()

    @cached_property
    def _char_index(self) -> dict[str, int]:
        return {ch: i for i, ch in enumerate(self.config.charset)}

    def speaker(self, speaker_id: int) -> SpeakerProfile:
        """Детерминированный профиль диктора с единичным эмбеддингом"""
        if not 0 <= speaker_id < self.config.speakers:
            raise EncodingError(f"Speaker {speaker_id} outside 0..{self.config.speakers - 1}")
        rng = np.random.default_rng([_SPEAKER_SEED, speaker_id])
        vector = rng.standard_normal(self.config.d_spk)
        vector /= np.linalg.norm(vector)
        return SpeakerProfile(
            speaker_id=speaker_id,
            band_base=speaker_id * self.config.prosody_band,
            embedding=vector.astype(np.float32),
        )

    def speakers(self, ids: Sequence[int] | None = None) -> list[SpeakerProfile]:
        ids = range(self.config.speakers) if ids is None else ids
        return [self.speaker(i) for i in ids]

    def encode(self, text: str, speaker: SpeakerProfile) -> list[list[int]]:
        cfg = self.config
        frames = []
        for i, ch in enumerate(text):
            x = self._char_index.get(ch)
            if x is None:
                raise EncodingError(f"Character {ch!r} at {i} is outside the codec charset")
            for r in range(cfg.frames_per_char):
                frames.append(
                    [
                        speaker.band_base + (i + r) % cfg.prosody_band,
                        x,
                        (x + r) % cfg.content_vocab,
                    ]
                )
        return frames

    def decode(self, frames: Sequence[Sequence[int]]) -> DecodeResult:
        """Обратное преобразование; на мусорном входе не падает"""
        cfg = self.config
        if not frames:
            return DecodeResult("", UNKNOWN_SPEAKER, True)

        well_formed = all(len(f) == cfg.slots_per_frame for f in frames)
        prosody = [f[0] for f in frames if len(f) >= 1]
        votes = Counter(
            p // cfg.prosody_band for p in prosody if 0 <= p < cfg.prosody_vocab
        )
        speaker = (
            min(votes, key=lambda s: (-votes[s], s)) if votes else UNKNOWN_SPEAKER
        )

        valid = well_formed and len(frames) % cfg.frames_per_char == 0
        chars = []
        for i, start in enumerate(range(0, len(frames), cfg.frames_per_char)):
            head = frames[start]
            x = head[1] if len(head) >= 2 else None
            if x is None or not 0 <= x < len(cfg.charset):
                valid = False
                continue
            chars.append(cfg.charset[x])
            block = frames[start : start + cfg.frames_per_char]
            for r, frame in enumerate(block):
                expected = [
                    speaker * cfg.prosody_band + (i + r) % cfg.prosody_band,
                    x,
                    (x + r) % cfg.content_vocab,
                ]
                if list(frame) != expected:
                    valid = False
        return DecodeResult("".join(chars), speaker, valid)


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Расстояние Левенштейна по символам"""
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = np.arange(len(b) + 1)
    for i, ca in enumerate(a, start=1):
        cur = np.empty_like(prev)
        cur[0] = i
        for j, cb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
        prev = cur
    return int(prev[-1])


def token_error_rate(
    codec: ToyCodec,
    ref: Sequence[Sequence[int]],
    hyp: Sequence[Sequence[int]],
) -> float:
    ref_text = codec.decode(ref).text
    hyp_text = codec.decode(hyp).text
    if not ref_text:
        return 0.0 if not hyp_text else 1.0
    return min(1.0, edit_distance(ref_text, hyp_text) / len(ref_text))


def speaker_match(
    codec: ToyCodec, hyp: Sequence[Sequence[int]], target: SpeakerProfile
) -> float:
    """Доля prosody-токенов внутри полосы целевого диктора"""
    prosody = [f[0] for f in hyp if len(f) >= 1]
    if not prosody:
        return 0.0
    band = target.band(codec.config.prosody_band)
    return sum(p in band for p in prosody) / len(prosody)
