import argparse
import logging

from app.commands.common import add_config_flags, load_config
from app.services.training_service import TrainingService
from slm.trainer import STAGES

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="двухэтапное обучение: pretrain → sft")
    add_config_flags(parser)
    parser.add_argument("--stage", choices=[*STAGES, "all"], default="all")
    parser.add_argument("--checkpoint", help="начальный чекпоинт (для sft без pretrain)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    stages = STAGES if args.stage == "all" else (args.stage,)
    service = TrainingService(config, args.data_dir, args.out, database_url=args.database_url)
    for result in service.train(stages=stages, init_checkpoint=args.checkpoint):
        loss = "n/a" if result.final_loss is None else f"{result.final_loss:.4f}"
        print(f"{result.stage}\tloss={loss}\t{result.checkpoint_path}")
    return 0
