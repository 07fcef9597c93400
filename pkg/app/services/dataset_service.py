import logging
from pathlib import Path

from app.core.config import settings
from app.core.errors import DataError
from slm.config import RunConfig
from slm.corpus import (
    PRETRAIN_SPLITS,
    KnowledgeEntry,
    generate_corpus,
    read_jsonl,
    record_type,
    write_jsonl,
)
from slm.data import StreamEncoder
from slm.tokens import Task
from slm.tokens.stream_io import write_streams

logger = logging.getLogger(__name__)


def data_dir_for(config: RunConfig, data_dir: str | Path | None = None) -> Path:
    return Path(data_dir) if data_dir else Path(settings.data_dir) / config.name


class DatasetService:
    """Синтез корпусов и доступ к сплитам"""

    def __init__(self, config: RunConfig, data_dir: str | Path | None = None):
        self.config = config
        self.data_dir = data_dir_for(config, data_dir)

    def split_path(self, split: str) -> Path:
        return self.data_dir / f"{split}.jsonl"

    def generate(self, export_streams: bool = True) -> dict[str, int]:
        """Сгенерировать все сплиты, базу знаний и текстовые дампы потоков"""
        try:
            self.data_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DataError(f"Cannot create data directory {self.data_dir}: {e}") from e

        splits, kb = generate_corpus(
            self.config.codec, self.config.train.data, self.config.train.seed
        )
        counts = {}
        for split, records in splits.items():
            counts[split] = write_jsonl(self.split_path(split), records)
        write_jsonl(self.data_dir / "kb.jsonl", kb)
        self.config.dump(self.data_dir / "config.json")

        if export_streams:
            encoder = StreamEncoder(self.config)
            for split, records in splits.items():
                task = Task.TTS if split in PRETRAIN_SPLITS else Task.ROLE_QA
                write_streams(
                    self.data_dir / f"{split}.streams.txt",
                    (encoder.stream(task, r) for r in records),
                )

        logger.info(f"[DATA] wrote {sum(counts.values())} records to {self.data_dir}")
        return counts

    def load_split(self, split: str, limit: int | None = None) -> list:
        records = read_jsonl(self.split_path(split), record_type(split))
        if not records:
            raise DataError(f"Split '{split}' in {self.data_dir} is empty")
        return records[:limit] if limit else records

    def load_knowledge_base(self) -> list[KnowledgeEntry]:
        return read_jsonl(self.data_dir / "kb.jsonl", KnowledgeEntry)
