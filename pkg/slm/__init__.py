"""Лаборатория речевых LM: токены, toy-кодек, модель NTP/MTP, обучение, декодирование, метрики"""

from slm.config import RunConfig

__all__ = ["RunConfig"]
