"""Синтетические корпуса: TTS/ASR-строки и key-value база знаний для role-QA"""

import logging
import string
from collections.abc import Iterable
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ValidationError

from app.core.errors import DataError
from slm.config import CodecConfig, DataConfig

logger = logging.getLogger(__name__)

_LETTERS = string.ascii_lowercase


class PretrainRecord(BaseModel):
    text: str
    speaker_id: int


class QARecord(BaseModel):
    qid: int
    question: str
    answer: str
    speaker_id: int


class KnowledgeEntry(BaseModel):
    qid: int
    key: str
    answer: str
    heldout: bool = False


PRETRAIN_SPLITS = ("pretrain", "tts_test", "tts_unseen")
QA_SPLITS = ("qa_train", "qa_id", "qa_id_unseen", "qa_ood")
ALL_SPLITS = PRETRAIN_SPLITS + QA_SPLITS


def question_text(key: str) -> str:
    return f"what is {key}?"


def _word(rng: np.random.Generator, min_len: int, max_len: int) -> str:
    length = int(rng.integers(min_len, max_len + 1))
    return "".join(_LETTERS[i] for i in rng.integers(0, len(_LETTERS), size=length))


def random_text(rng: np.random.Generator, charset: str, data: DataConfig) -> str:
    length = int(rng.integers(data.text_len_min, data.text_len_max + 1))
    return "".join(charset[i] for i in rng.integers(0, len(charset), size=length))


def build_knowledge_base(rng: np.random.Generator, data: DataConfig) -> list[KnowledgeEntry]:
    """Уникальные ключи → ответы из 1…answer_words_max слов; часть вопросов отложена"""
    keys: set[str] = set()
    ordered: list[str] = []
    attempts = 0
    while len(ordered) < data.kb_size:
        attempts += 1
        if attempts > 100 * data.kb_size:
            raise DataError(f"Cannot draw {data.kb_size} unique keys with the given lengths")
        key = _word(rng, data.key_len_min, data.key_len_max)
        if key in keys:
            continue
        keys.add(key)
        ordered.append(key)

    n_heldout = int(round(data.kb_size * data.heldout_fraction))
    heldout = set(rng.permutation(data.kb_size)[:n_heldout].tolist())
    entries = []
    for qid, key in enumerate(ordered):
        n_words = int(rng.integers(1, data.answer_words_max + 1))
        answer = " ".join(
            _word(rng, data.word_len_min, data.word_len_max) for _ in range(n_words)
        )
        entries.append(KnowledgeEntry(qid=qid, key=key, answer=answer, heldout=qid in heldout))
    return entries


def generate_corpus(
    codec: CodecConfig, data: DataConfig, seed: int
) -> tuple[dict[str, list[BaseModel]], list[KnowledgeEntry]]:
    """Все сплиты; одинаковый seed даёт побайтно одинаковые корпуса"""
    rng = np.random.default_rng(seed)
    seen = codec.seen_speaker_ids
    unseen = codec.unseen_speaker_ids
    pretrain_speakers = seen + unseen if data.pretrain_includes_unseen else seen

    def pretrain(n: int, speakers: list[int]) -> list[BaseModel]:
        return [
            PretrainRecord(
                text=random_text(rng, codec.charset, data),
                speaker_id=int(rng.choice(speakers)),
            )
            for _ in range(n)
        ]

    splits: dict[str, list[BaseModel]] = {
        "pretrain": pretrain(data.pretrain_examples, pretrain_speakers),
        "tts_test": pretrain(data.test_examples, seen),
        "tts_unseen": pretrain(data.test_examples, unseen) if unseen else [],
    }

    kb = build_knowledge_base(rng, data)
    trained = [e for e in kb if not e.heldout]
    heldout = [e for e in kb if e.heldout]

    def qa(entries: list[KnowledgeEntry], speakers: list[int], limit: int | None = None):
        if not speakers:
            return []
        if limit is not None and len(entries) > limit:
            picks = rng.choice(len(entries), size=limit, replace=False)
            entries = [entries[int(i)] for i in sorted(picks)]
        return [
            QARecord(
                qid=e.qid,
                question=question_text(e.key),
                answer=e.answer,
                speaker_id=int(rng.choice(speakers)),
            )
            for e in entries
        ]

    splits["qa_train"] = qa(trained, seen)
    splits["qa_id"] = qa(trained, seen, data.test_examples)
    splits["qa_id_unseen"] = qa(trained, unseen, data.test_examples)
    splits["qa_ood"] = qa(heldout, unseen or seen, data.test_examples)

    logger.info(
        "[DATA] corpus: "
        + ", ".join(f"{name}={len(records)}" for name, records in splits.items())
        + f", kb={len(kb)} ({len(heldout)} held out)"
    )
    return splits, kb


def record_type(split: str) -> type[BaseModel]:
    if split in PRETRAIN_SPLITS:
        return PretrainRecord
    if split in QA_SPLITS:
        return QARecord
    raise DataError(f"Unknown split '{split}'")


def write_jsonl(path: str | Path, records: Iterable[BaseModel]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(record.model_dump_json() + "\n")
            count += 1
    return count


def read_jsonl(path: str | Path, model: type[BaseModel]) -> list:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Split file not found: {path}")
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(model.model_validate_json(line))
            except ValidationError as e:
                raise DataError(f"{path}:{lineno}: {e}") from e
    return records
