from typing import Any, Generic, TypeVar

from sqlalchemy import select
from sqlalchemy.orm import Session
from sqlmodel import SQLModel

ModelType = TypeVar("ModelType", bound=SQLModel)


class BaseRepository(Generic[ModelType]):
    def __init__(self, model: type[ModelType], session: Session):
        self.model = model
        self._session = session

    def create(self, obj_in: ModelType | dict[str, Any]) -> ModelType:
        db_obj = self.model.model_validate(obj_in)
        self._session.add(db_obj)
        self._session.flush()
        self._session.refresh(db_obj)
        return db_obj

    def get(self, id: int) -> ModelType | None:
        statement = select(self.model).where(self.model.id == id)
        return self._session.execute(statement).scalar_one_or_none()

    def get_all(self, skip: int = 0, limit: int = 100) -> list[ModelType]:
        statement = select(self.model).offset(skip).limit(limit)
        return list(self._session.execute(statement).scalars().all())

    def update(self, id: int, obj_in: dict[str, Any]) -> ModelType | None:
        db_obj = self.get(id)
        if not db_obj:
            return None

        for key, value in obj_in.items():
            setattr(db_obj, key, value)

        self._session.add(db_obj)
        self._session.flush()
        self._session.refresh(db_obj)
        return db_obj
