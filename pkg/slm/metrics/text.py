import re
import string
from collections import Counter
from collections.abc import Sequence

from app.core.errors import EmptyInputError

_PUNCT = re.compile(f"[{re.escape(string.punctuation)}]")


def normalize_answer(text: str) -> str:
    """Нижний регистр, без пунктуации, пробелы схлопнуты"""
    return " ".join(_PUNCT.sub("", text.lower()).split())


def exact_match(pred: str, gold: str) -> int:
    return int(normalize_answer(pred) == normalize_answer(gold))


def f1_score(pred: str, gold: str) -> float:
    pred_tokens = normalize_answer(pred).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def success_rate(flags: Sequence[bool]) -> float:
    if not flags:
        raise EmptyInputError("success_rate of an empty result list")
    return sum(bool(f) for f in flags) / len(flags)
