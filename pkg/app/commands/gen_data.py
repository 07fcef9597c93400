import argparse
import logging

from app.commands.common import add_config_flags, load_config
from app.services.dataset_service import DatasetService

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen-data", help="синтезировать корпуса TTS/ASR и role-QA")
    add_config_flags(parser)
    parser.add_argument("--no-streams", action="store_true", help="не писать *.streams.txt")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    service = DatasetService(config, args.data_dir or args.out)
    counts = service.generate(export_streams=not args.no_streams)
    for split, n in counts.items():
        print(f"{split}\t{n}")
    return 0
