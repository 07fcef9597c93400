import argparse
from pathlib import Path

from slm.config import HeadMode, RunConfig

SPEAKER_AWARE = {"on": "vector", "off": "off"}


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """Флаги, общие для всех команд: конфиг и его переопределения"""
    parser.add_argument("--config", type=Path, help="JSON-конфиг {codec, model, train, eval}")
    parser.add_argument("--seed", type=int, help="переопределить train.seed")
    parser.add_argument("--g", type=int, help="размер группы (1 = NTP)")
    parser.add_argument("--head", choices=[str(h) for h in HeadMode])
    parser.add_argument("--speaker-aware", choices=sorted(SPEAKER_AWARE))
    parser.add_argument("--out", type=Path, help="каталог прогона / отчёта")
    parser.add_argument("--data-dir", type=Path, help="каталог корпуса")
    parser.add_argument("--database-url", help="журнал прогонов (SQLAlchemy URL)")


def load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    return config.with_overrides(
        seed=args.seed,
        g=args.g,
        head_mode=args.head,
        speaker_mode=SPEAKER_AWARE.get(args.speaker_aware) if args.speaker_aware else None,
    )
