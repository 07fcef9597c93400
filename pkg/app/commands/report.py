import argparse
from pathlib import Path

from app.services.report_service import ReportService


def register(subparsers) -> None:
    parser = subparsers.add_parser("report", help="сводный отчёт по журналу прогонов")
    parser.add_argument("--out", type=Path, help="каталог отчёта")
    parser.add_argument("--database-url")
    parser.add_argument("--title")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    paths = ReportService(args.out, args.database_url).build(title=args.title)
    for kind, path in paths.items():
        print(f"{kind}\t{path}")
    return 0
