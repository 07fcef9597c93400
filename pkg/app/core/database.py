from collections.abc import Generator
from contextlib import contextmanager
from pathlib import Path

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker
from sqlmodel import SQLModel

from .config import settings

_engines: dict[str, Engine] = {}


def get_engine(database_url: str | None = None) -> Engine:
    """Sync engine для журнала прогонов (SQLite по умолчанию)"""
    url = database_url or settings.database_url
    if url not in _engines:
        if url.startswith("sqlite:///"):
            Path(url.removeprefix("sqlite:///")).parent.mkdir(parents=True, exist_ok=True)
        _engines[url] = create_engine(
            url,
            echo=settings.debug,
            future=True,
            connect_args={"check_same_thread": False}
            if url.startswith("sqlite")
            else {},
        )
    return _engines[url]


def create_db_and_tables(database_url: str | None = None) -> None:
    """Создать таблицы журнала"""
    # импорт регистрирует таблицы в metadata
    from app.models import run  # noqa: F401

    SQLModel.metadata.create_all(get_engine(database_url))


@contextmanager
def get_sync_session(database_url: str | None = None) -> Generator[Session, None, None]:
    """Sync session: commit при успехе, rollback при ошибке"""
    create_db_and_tables(database_url)
    session = sessionmaker(
        bind=get_engine(database_url), expire_on_commit=False, class_=Session
    )()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
