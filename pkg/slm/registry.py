import threading
from pathlib import Path

from app.core.config import settings
from slm.checkpoint import Checkpoint, load_checkpoint
from slm.codec import ToyCodec
from slm.config import CodecConfig


class ModelRegistry:
    """Реестр загруженных чекпоинтов и кодеков (только чтение, для инференса)"""

    _instance = None
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if not self._initialized:
            self._checkpoints: dict[Path, Checkpoint] = {}
            self._codecs: dict[str, ToyCodec] = {}
            self._lock = threading.Lock()
            self._initialized = True

    def get_checkpoint(self, path: str | Path, device: str | None = None) -> Checkpoint:
        """Получить или загрузить чекпоинт"""
        key = Path(path).resolve()
        with self._lock:
            if key not in self._checkpoints:
                self._checkpoints[key] = load_checkpoint(key, device or settings.device)
            return self._checkpoints[key]

    def get_codec(self, config: CodecConfig) -> ToyCodec:
        """Получить или создать кодек для конфига"""
        key = config.model_dump_json()
        with self._lock:
            if key not in self._codecs:
                self._codecs[key] = ToyCodec(config)
            return self._codecs[key]

    def evict(self, path: str | Path) -> None:
        with self._lock:
            self._checkpoints.pop(Path(path).resolve(), None)

    def clear(self) -> None:
        with self._lock:
            self._checkpoints.clear()
            self._codecs.clear()


# Singleton instance
registry = ModelRegistry()
