from celery import Celery

from app.core.config import settings

celery_app = Celery(
    "speech_mtp_lab",
    broker=settings.celery_broker_url,
    backend=settings.celery_backend_url,
    include=["celery_worker.tasks"],
)

celery_app.conf.update(
    task_serializer="json",
    accept_content=["json"],
    result_serializer="json",
    timezone="UTC",
    enable_utc=True,
    # без брокера ячейки свипа выполняются в текущем процессе
    task_always_eager=settings.celery_always_eager,
    task_eager_propagates=True,
    worker_prefetch_multiplier=1,
)
