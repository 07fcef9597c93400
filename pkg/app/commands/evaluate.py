import argparse
import json

from app.commands.common import add_config_flags, load_config
from app.services.evaluation_service import (
    EvaluationService,
    checkpoint_for,
    default_eval_splits,
)
from slm.corpus import PRETRAIN_SPLITS


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="SR / TER / speaker-match / EM / F1 на сплите")
    add_config_flags(parser)
    parser.add_argument("--split", action="append", help="сплит (можно повторять)")
    parser.add_argument("--checkpoint", help="по умолчанию stage1.pt для TTS, stage2.pt для QA")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    for split in args.split or default_eval_splits():
        stage = "pretrain" if split in PRETRAIN_SPLITS else "sft"
        checkpoint = args.checkpoint or checkpoint_for(config, args.out, stage)
        service = EvaluationService(
            config, checkpoint, args.data_dir, args.out, database_url=args.database_url
        )
        summary = service.evaluate(split)
        print(json.dumps(summary))
    return 0
