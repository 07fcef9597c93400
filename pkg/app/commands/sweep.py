import argparse

from app.commands.common import add_config_flags, load_config
from app.services.sweep_service import SweepService


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="{head} × {g} × {speaker} → train/eval/align")
    add_config_flags(parser)
    parser.add_argument("--split", action="append", help="сплиты для eval (можно повторять)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    service = SweepService(config, args.data_dir, args.out, database_url=args.database_url)
    results = service.run(eval_splits=args.split)
    for result in results:
        print(f"{result['cell']}\t{result['status']}")
    return 0 if all(r["status"] == "completed" for r in results) else 1
