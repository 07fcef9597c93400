from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Storage
    data_dir: str = "data"
    runs_dir: str = "runs"
    database_url: str = "sqlite:///runs/ledger.db"

    # Torch
    device: str = "cpu"
    torch_threads: int | None = None

    # Celery (sweep cells)
    celery_broker_url: str = "redis://localhost:6379/0"
    celery_backend_url: str = "redis://localhost:6379/0"
    celery_always_eager: bool = True

    # Logging
    log_level: str = "INFO"
    debug: bool = False

    class Config:
        env_file = ".env"
        env_prefix = "SLM_"


settings = Settings()
