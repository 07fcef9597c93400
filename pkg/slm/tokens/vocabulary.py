from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

from app.core.errors import EncodingError, LayoutError
from slm.config import CodecConfig, SlotRole

SPECIAL_TOKENS = (
    "BOS",
    "EOS_TEXT",
    "EOS_SPEECH",
    "PAD",
    "MARK_TA",
    "MARK_UA",
    "MARK_SPK",
)

# Кадр речи: по одному id на слот, в id словаря
SpeechFrame = list[int]


class SegmentTag(str, Enum):
    SPEAKER = "speaker"
    TEXT_Q = "text_q"
    TEXT_A = "text_a"
    SPEECH_A = "speech_a"
    SPEECH_Q = "speech_q"
    SPECIAL = "special"

    def __str__(self):
        return self.value

    @property
    def is_speech(self) -> bool:
        return self in (SegmentTag.SPEECH_A, SegmentTag.SPEECH_Q)

    @property
    def code(self) -> str:
        return TAG_CODES[self]


TAG_CODES = {
    SegmentTag.SPEAKER: "u",
    SegmentTag.TEXT_Q: "q",
    SegmentTag.TEXT_A: "a",
    SegmentTag.SPEECH_A: "v",
    SegmentTag.SPEECH_Q: "w",
    SegmentTag.SPECIAL: "x",
}
TAGS_BY_CODE = {code: tag for tag, code in TAG_CODES.items()}


@dataclass(frozen=True)
class Segment:
    name: str
    offset: int
    size: int

    @property
    def end(self) -> int:
        return self.offset + self.size

    def __contains__(self, token_id: int) -> bool:
        return self.offset <= token_id < self.end


@dataclass(frozen=True)
class Vocabulary:
    """Единое пространство id: special, text, prosody, content, speaker"""

    segments: tuple[Segment, ...]
    charset: str = ""

    def __post_init__(self):
        expected = 0
        for segment in self.segments:
            if segment.offset != expected or segment.size < 0:
                raise ValueError(f"Segment {segment.name} is not contiguous")
            expected = segment.end
        names = [s.name for s in self.segments]
        if len(set(names)) != len(names):
            raise ValueError("Segment names must be unique")
        if self.has_segment("text") and self.segment("text").size != len(self.charset):
            raise ValueError("text segment size must equal charset size")

    @classmethod
    def build(
        cls,
        charset: str = "",
        prosody_size: int = 64,
        content_size: int = 128,
        speakers: int = 0,
        with_specials: bool = True,
    ) -> "Vocabulary":
        sizes = []
        if with_specials:
            sizes.append(("special", len(SPECIAL_TOKENS)))
        sizes.append(("text", len(charset)))
        sizes += [("prosody", prosody_size), ("content", content_size)]
        if speakers:
            # offset+0: слот непрерывного вектора, offset+1+k: токен диктора k
            sizes.append(("speaker", speakers + 1))

        segments, offset = [], 0
        for name, size in sizes:
            segments.append(Segment(name, offset, size))
            offset += size
        return cls(tuple(segments), charset)

    @classmethod
    def from_codec(cls, codec: CodecConfig) -> "Vocabulary":
        return cls.build(
            charset=codec.charset,
            prosody_size=codec.prosody_vocab,
            content_size=codec.content_vocab,
            speakers=codec.speakers,
        )

    @property
    def total_size(self) -> int:
        return self.segments[-1].end if self.segments else 0

    def has_segment(self, name: str) -> bool:
        return any(s.name == name for s in self.segments)

    def segment(self, name: str) -> Segment:
        for s in self.segments:
            if s.name == name:
                return s
        raise KeyError(name)

    def segment_of(self, token_id: int) -> str | None:
        for s in self.segments:
            if token_id in s:
                return s.name
        return None

    def special(self, name: str) -> int:
        return self.segment("special").offset + SPECIAL_TOKENS.index(name)

    @property
    def bos(self) -> int:
        return self.special("BOS")

    @property
    def eos_text(self) -> int:
        return self.special("EOS_TEXT")

    @property
    def eos_speech(self) -> int:
        return self.special("EOS_SPEECH")

    @property
    def pad(self) -> int:
        return self.special("PAD")

    @property
    def mark_ta(self) -> int:
        return self.special("MARK_TA")

    @property
    def mark_ua(self) -> int:
        return self.special("MARK_UA")

    @property
    def mark_spk(self) -> int:
        return self.special("MARK_SPK")

    @property
    def spk_slot(self) -> int:
        return self.segment("speaker").offset

    def speaker_token(self, speaker_id: int) -> int:
        segment = self.segment("speaker")
        if not 0 <= speaker_id < segment.size - 1:
            raise EncodingError(f"Speaker {speaker_id} outside speaker segment")
        return segment.offset + 1 + speaker_id

    @property
    def language_size(self) -> int:
        """Выход языковой головы: special ∪ text, id 0 … text.end-1"""
        return self.segment("text").end

    def encode_text(self, text: str) -> list[int]:
        offset = self.segment("text").offset
        ids = []
        for i, ch in enumerate(text):
            index = self.charset.find(ch)
            if index < 0:
                raise EncodingError(f"Character {ch!r} at {i} is outside the charset")
            ids.append(offset + index)
        return ids

    def decode_text(self, ids: Sequence[int]) -> str:
        text = self.segment("text")
        return "".join(self.charset[i - text.offset] for i in ids if i in text)

    def frame_from_codec(self, frame: Sequence[int], layout: "FrameLayout") -> SpeechFrame:
        """Кадр кодека (локальные id кодбуков) → id словаря"""
        return [
            self.segment(str(role)).offset + token
            for token, role in zip(frame, layout.slot_roles, strict=True)
        ]

    def frame_to_codec(self, frame: Sequence[int], layout: "FrameLayout") -> list[int]:
        return [
            token - self.segment(str(role)).offset
            for token, role in zip(frame, layout.slot_roles, strict=True)
        ]


@dataclass(frozen=True)
class FrameLayout:
    vocab: Vocabulary
    slot_roles: tuple[SlotRole, ...] = (
        SlotRole.PROSODY,
        SlotRole.CONTENT,
        SlotRole.CONTENT,
    )

    @property
    def slots_per_frame(self) -> int:
        return len(self.slot_roles)

    def role_at(self, slot: int) -> SlotRole:
        return self.slot_roles[slot % self.slots_per_frame]

    def check_token(self, token_id: int, slot: int, position: int) -> None:
        role = self.role_at(slot)
        if token_id not in self.vocab.segment(str(role)):
            raise LayoutError(
                f"Token {token_id} at position {position} is not a {role} token",
                position=position,
            )

    def check_frame(self, frame: Sequence[int], base_position: int = 0) -> None:
        if len(frame) != self.slots_per_frame:
            raise LayoutError(
                f"Frame has {len(frame)} tokens, layout expects {self.slots_per_frame}",
                position=base_position,
            )
        for slot, token_id in enumerate(frame):
            self.check_token(token_id, slot, base_position + slot)


@dataclass(frozen=True)
class TokenGroup:
    member_ids: tuple[int, ...]
    slot_roles: tuple[SlotRole, ...] = field(default=())

    def __post_init__(self):
        if len(self.member_ids) != len(self.slot_roles):
            raise ValueError("member_ids and slot_roles must have equal length")

    @property
    def g(self) -> int:
        return len(self.member_ids)
