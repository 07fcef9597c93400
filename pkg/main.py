import argparse
import logging
import sys

import torch

from app.commands import COMMANDS
from app.core.config import settings
from app.core.errors import (
    ConfigError,
    DataError,
    EncodingError,
    FormatError,
    LabError,
)
from app.core.logging_config import setup_logging

logger = logging.getLogger(__name__)

# ошибки входных данных пользователя → код 2
USER_ERRORS = (ConfigError, FormatError, DataError, EncodingError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slm-lab",
        description="Speech-LM lab: toy codec, NTP/MTP training, evaluation, alignment",
    )
    parser.add_argument("--verbose", action="store_true", help="логирование DEBUG")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS.values():
        module.register(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging("DEBUG" if args.verbose else None)
    if settings.torch_threads:
        torch.set_num_threads(settings.torch_threads)

    try:
        return args.handler(args)
    except USER_ERRORS as e:
        logger.error(f"[CLI] {args.command}: {e}")
        return 2
    except LabError as e:
        logger.error(f"[CLI] {args.command} failed: {e}")
        return 1
    except Exception:
        logger.exception(f"[CLI] {args.command} crashed")
        return 1


if __name__ == "__main__":
    sys.exit(main())
