from app.commands import align, evaluate, gen_data, report, sweep, train

COMMANDS = {
    "gen-data": gen_data,
    "train": train,
    "eval": evaluate,
    "align": align,
    "report": report,
    "sweep": sweep,
}

__all__ = ["COMMANDS"]
