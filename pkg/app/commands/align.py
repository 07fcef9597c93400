import argparse

from app.commands.common import add_config_flags, load_config
from app.services.alignment_service import PROBE_SPLIT, AlignmentService
from app.services.evaluation_service import checkpoint_for


def register(subparsers) -> None:
    parser = subparsers.add_parser("align", help="выравнивание модальностей по слоям")
    add_config_flags(parser)
    parser.add_argument("--split", default=PROBE_SPLIT, help="probe-сплит")
    parser.add_argument("--checkpoint")
    parser.add_argument("--stage", choices=["pretrain", "sft"], default="sft")
    parser.add_argument("--no-hidden", action="store_true", help="не сохранять hidden_*.npy")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    checkpoint = args.checkpoint or checkpoint_for(config, args.out, args.stage)
    service = AlignmentService(
        config, checkpoint, args.data_dir, args.out, database_url=args.database_url
    )
    report = service.align(args.split, dump_hidden=not args.no_hidden)
    for layer in report.layers:
        print(f"{layer.name}\tSTSim={layer.stats.st_sim}\triemannian={layer.riemannian}")
    return 0
