import json
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, ValidationError, model_validator

from app.core.errors import ConfigError

DEFAULT_CHARSET = (
    "abcdefghijklmnopqrstuvwxyz0123456789" + " .,;:!?'\"-()/&+=%$#@*_<>[]{}"
)


class SlotRole(str, Enum):
    PROSODY = "prosody"
    CONTENT = "content"

    def __str__(self):
        return self.value


class HeadMode(str, Enum):
    COUPLED = "coupled"
    DECOUPLED = "decoupled"

    def __str__(self):
        return self.value


class FusionKind(str, Enum):
    MLP = "mlp"
    LINEAR = "linear"

    def __str__(self):
        return self.value


class SpeechHeadArch(str, Enum):
    LINEAR = "linear"
    MLP = "mlp"

    def __str__(self):
        return self.value


class SpeakerMode(str, Enum):
    VECTOR = "vector"
    TOKEN = "token"
    OFF = "off"

    def __str__(self):
        return self.value


class QAFormat(str, Enum):
    TQ_TA_SA = "tq_ta_sa"
    TQ_SA = "tq_sa"
    SQ_SA = "sq_sa"

    def __str__(self):
        return self.value


class CodecConfig(BaseModel):
    charset: str = DEFAULT_CHARSET
    frames_per_char: int = Field(default=2, ge=1)
    prosody_vocab: int = Field(default=64, ge=1)
    content_vocab: int = Field(default=128, ge=1)
    speakers: int = Field(default=16, ge=1)
    prosody_band: int = Field(default=4, ge=1)
    d_spk: int = Field(default=16, ge=1)
    slot_roles: list[SlotRole] = Field(
        default_factory=lambda: [SlotRole.PROSODY, SlotRole.CONTENT, SlotRole.CONTENT]
    )
    # последние unseen_speakers идентификаторов не попадают в обучение role-QA
    unseen_speakers: int = Field(default=4, ge=0)
    question_speaker: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_invariants(self) -> "CodecConfig":
        if self.speakers * self.prosody_band > self.prosody_vocab:
            raise ValueError("speakers * prosody_band must not exceed prosody_vocab")
        if len(self.charset) > self.content_vocab:
            raise ValueError("charset size must not exceed content_vocab")
        if len(set(self.charset)) != len(self.charset):
            raise ValueError("charset characters must be unique")
        if self.slot_roles != [SlotRole.PROSODY, SlotRole.CONTENT, SlotRole.CONTENT]:
            raise ValueError("toy codec emits [prosody, content, content] frames")
        if self.unseen_speakers >= self.speakers:
            raise ValueError("at least one speaker must stay seen")
        if self.question_speaker >= self.speakers:
            raise ValueError("question_speaker out of range")
        return self

    @property
    def slots_per_frame(self) -> int:
        return len(self.slot_roles)

    @property
    def seen_speaker_ids(self) -> list[int]:
        return list(range(self.speakers - self.unseen_speakers))

    @property
    def unseen_speaker_ids(self) -> list[int]:
        return list(range(self.speakers - self.unseen_speakers, self.speakers))


class ModelConfig(BaseModel):
    d_model: int = Field(default=256, ge=1)
    n_layers: int = Field(default=4, ge=1)
    n_heads: int = Field(default=4, ge=1)
    d_ff: int = Field(default=1024, ge=1)
    max_positions: int = Field(default=1024, ge=1)
    head_mode: HeadMode = HeadMode.DECOUPLED
    g: int = Field(default=1, ge=1)
    fusion: FusionKind = FusionKind.MLP
    speech_head_arch: SpeechHeadArch = SpeechHeadArch.LINEAR
    d_spk: int = Field(default=16, ge=1)
    speaker_mode: SpeakerMode = SpeakerMode.VECTOR
    dropout: float = Field(default=0.0, ge=0.0, lt=1.0)
    init_std: float = Field(default=0.02, gt=0.0)

    @model_validator(mode="after")
    def _check_heads(self) -> "ModelConfig":
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        return self


class DataConfig(BaseModel):
    pretrain_examples: int = Field(default=20000, ge=1)
    test_examples: int = Field(default=500, ge=1)
    text_len_min: int = Field(default=4, ge=1)
    text_len_max: int = Field(default=32, ge=1)
    kb_size: int = Field(default=2000, ge=2)
    heldout_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)
    key_len_min: int = Field(default=3, ge=1)
    key_len_max: int = Field(default=6, ge=1)
    answer_words_max: int = Field(default=2, ge=1)
    word_len_min: int = Field(default=3, ge=1)
    word_len_max: int = Field(default=7, ge=1)
    pretrain_includes_unseen: bool = True

    @model_validator(mode="after")
    def _check_ranges(self) -> "DataConfig":
        if self.text_len_min > self.text_len_max:
            raise ValueError("text_len_min > text_len_max")
        if self.key_len_min > self.key_len_max:
            raise ValueError("key_len_min > key_len_max")
        if self.word_len_min > self.word_len_max:
            raise ValueError("word_len_min > word_len_max")
        return self


class TrainConfig(BaseModel):
    lr_init: float = Field(default=5e-4, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.99, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    grad_clip: float = Field(default=1.0, gt=0.0)
    schedule: str = "cosine"
    batch_size: int = Field(default=16, ge=1)
    steps_stage1: int = Field(default=20000, ge=0)
    steps_stage2: int = Field(default=4000, ge=0)
    asr_fraction: float = Field(default=0.5, ge=0.0, le=1.0)
    qa_format: QAFormat = QAFormat.TQ_TA_SA
    log_every: int = Field(default=100, ge=1)
    checkpoint_every: int = Field(default=2000, ge=1)
    seed: int = 0
    data: DataConfig = Field(default_factory=DataConfig)

    @model_validator(mode="after")
    def _check_schedule(self) -> "TrainConfig":
        if self.schedule != "cosine":
            raise ValueError("only the cosine schedule is supported")
        return self


class EvalConfig(BaseModel):
    max_new: int = Field(default=512, ge=1)
    rep_penalty: float = Field(default=1.2, ge=1.0)
    penalize_speech: bool = True
    eval_examples: int = Field(default=200, ge=1)
    probe_examples: int = Field(default=64, ge=2)
    pair_cap: int = Field(default=10000, ge=1)
    riemannian_eps: float = Field(default=1e-6, ge=0.0)
    sweep_g: list[int] = Field(default_factory=lambda: [1, 3, 6, 12])
    sweep_heads: list[HeadMode] = Field(
        default_factory=lambda: [HeadMode.COUPLED, HeadMode.DECOUPLED]
    )
    sweep_speaker_modes: list[SpeakerMode] = Field(
        default_factory=lambda: [SpeakerMode.VECTOR, SpeakerMode.OFF]
    )


class RunConfig(BaseModel):
    name: str = "default"
    codec: CodecConfig = Field(default_factory=CodecConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @model_validator(mode="after")
    def _check_cross_sections(self) -> "RunConfig":
        spf = self.codec.slots_per_frame
        if self.model.g > 1 and self.model.g % spf != 0:
            raise ValueError(f"g={self.model.g} must be a multiple of {spf} slots")
        if self.model.d_spk != self.codec.d_spk:
            raise ValueError("model.d_spk must equal codec.d_spk")
        for g in self.eval.sweep_g:
            if g > 1 and g % spf != 0:
                raise ValueError(f"sweep g={g} must be a multiple of {spf} slots")
        return self

    @property
    def cell_name(self) -> str:
        return (
            f"{self.name}-{self.model.head_mode}-g{self.model.g}"
            f"-spk_{self.model.speaker_mode}-s{self.train.seed}"
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        """Прочитать JSON-документ {codec, model, train, eval}"""
        try:
            return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {path}") from e
        except ValidationError as e:
            raise ConfigError(f"Invalid config {path}: {e}") from e

    def dump(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path

    def to_dict(self) -> dict[str, Any]:
        return json.loads(self.model_dump_json())

    def with_overrides(
        self,
        seed: int | None = None,
        g: int | None = None,
        head_mode: HeadMode | str | None = None,
        speaker_mode: SpeakerMode | str | None = None,
    ) -> "RunConfig":
        """Копия конфига с флагами CLI поверх документа"""
        data = self.to_dict()
        if seed is not None:
            data["train"]["seed"] = seed
        if g is not None:
            data["model"]["g"] = g
        if head_mode is not None:
            data["model"]["head_mode"] = str(head_mode)
        if speaker_mode is not None:
            data["model"]["speaker_mode"] = str(speaker_mode)
        try:
            return RunConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"Invalid overrides: {e}") from e
