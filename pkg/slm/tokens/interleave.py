"""Порядок речевых токенов в потоке: FWI/CWI и упаковка в MTP-группы"""

from collections.abc import Sequence
from enum import Enum

from app.core.errors import ConfigError, FramingError
from slm.tokens.vocabulary import FrameLayout, SpeechFrame, TokenGroup

DEFAULT_CHUNK_LEN = 80


class Scheme(str, Enum):
    FWI = "fwi"
    CWI = "cwi"

    def __str__(self):
        return self.value


def interleave_fwi(frames: Sequence[Sequence[int]], layout: FrameLayout) -> list[int]:
    """[p_i, c_i1, c_i2] кадр за кадром"""
    tokens: list[int] = []
    for i, frame in enumerate(frames):
        layout.check_frame(frame, base_position=i * layout.slots_per_frame)
        tokens.extend(frame)
    return tokens


def interleave_cwi(
    frames: Sequence[Sequence[int]],
    layout: FrameLayout,
    chunk_len: int = DEFAULT_CHUNK_LEN,
) -> list[int]:
    """Внутри чанка сначала все токены слота 0, затем слота 1, затем слота 2"""
    if chunk_len < 1:
        raise ConfigError(f"chunk_len must be >= 1, got {chunk_len}")

    spf = layout.slots_per_frame
    for i, frame in enumerate(frames):
        layout.check_frame(frame, base_position=i * spf)

    tokens: list[int] = []
    for start in range(0, len(frames), chunk_len):
        chunk = frames[start : start + chunk_len]
        for slot in range(spf):
            tokens.extend(frame[slot] for frame in chunk)
    return tokens


def deinterleave(
    tokens: Sequence[int],
    layout: FrameLayout,
    scheme: Scheme | str = Scheme.FWI,
    chunk_len: int = DEFAULT_CHUNK_LEN,
) -> list[SpeechFrame]:
    spf = layout.slots_per_frame
    if len(tokens) % spf != 0:
        raise FramingError(
            f"Speech span of {len(tokens)} tokens is not divisible by {spf} slots"
        )

    scheme = Scheme(scheme)
    n_frames = len(tokens) // spf
    if scheme is Scheme.FWI:
        frames = [list(tokens[i * spf : (i + 1) * spf]) for i in range(n_frames)]
        for i, frame in enumerate(frames):
            layout.check_frame(frame, base_position=i * spf)
        return frames

    if chunk_len < 1:
        raise ConfigError(f"chunk_len must be >= 1, got {chunk_len}")
    frames = []
    for frame_start in range(0, n_frames, chunk_len):
        k = min(chunk_len, n_frames - frame_start)
        offset = frame_start * spf
        for i in range(k):
            frame = []
            for slot in range(spf):
                position = offset + slot * k + i
                layout.check_token(tokens[position], slot, position)
                frame.append(tokens[position])
            frames.append(frame)
    return frames


def check_group_size(g: int, layout: FrameLayout) -> None:
    if g < 1 or (g > 1 and g % layout.slots_per_frame != 0):
        raise ConfigError(
            f"Group size g={g} must be 1 or a multiple of {layout.slots_per_frame} slots"
        )


def pack_groups(
    speech_tokens: Sequence[int], g: int, layout: FrameLayout
) -> list[TokenGroup]:
    """Группа j - токены j·g … j·g+g−1; последняя группа добивается PAD"""
    check_group_size(g, layout)
    if len(speech_tokens) % layout.slots_per_frame != 0:
        raise FramingError(
            f"Speech span of {len(speech_tokens)} tokens is not whole frames"
        )

    pad = layout.vocab.pad
    groups = []
    for start in range(0, len(speech_tokens), g):
        members = list(speech_tokens[start : start + g])
        for k, token_id in enumerate(members):
            layout.check_token(token_id, start + k, start + k)
        members += [pad] * (g - len(members))
        roles = tuple(layout.role_at(start + k) for k in range(g))
        groups.append(TokenGroup(tuple(members), roles))
    return groups


def unpack_groups(groups: Sequence[TokenGroup], layout: FrameLayout) -> list[int]:
    pad = layout.vocab.pad
    return [t for group in groups for t in group.member_ids if t != pad]
