"""Текстовый формат потоков: строка id и параллельная строка тегов.

Тег - одна буква (u speaker, q text_q, a text_a, v speech_a, w speech_q,
x special); заглавная буква означает позицию внутри loss_mask.
"""

from collections.abc import Iterable
from pathlib import Path

from app.core.errors import DataError
from slm.tokens.context import TokenStream
from slm.tokens.vocabulary import TAGS_BY_CODE


def format_stream(stream: TokenStream) -> str:
    ids = " ".join(str(t) for t in stream.tokens)
    tags = " ".join(
        tag.code.upper() if in_loss else tag.code
        for tag, in_loss in zip(stream.segment_tags, stream.loss_mask, strict=True)
    )
    return f"{ids}\n{tags}\n"


def parse_stream(ids_line: str, tags_line: str) -> TokenStream:
    ids = [int(t) for t in ids_line.split()]
    codes = tags_line.split()
    if len(ids) != len(codes):
        raise DataError(f"{len(ids)} ids but {len(codes)} tags")
    try:
        tags = [TAGS_BY_CODE[c.lower()] for c in codes]
    except KeyError as e:
        raise DataError(f"Unknown tag code {e.args[0]!r}") from e
    return TokenStream(ids, tags, [c.isupper() for c in codes])


def write_streams(path: str | Path, streams: Iterable[TokenStream]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for stream in streams:
            f.write(format_stream(stream))
            count += 1
    return count


def read_streams(path: str | Path) -> list[TokenStream]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) % 2:
        raise DataError(f"{path}: odd number of lines")
    return [parse_stream(lines[i], lines[i + 1]) for i in range(0, len(lines), 2)]
