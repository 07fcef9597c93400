import json
import logging
from pathlib import Path

from app.core.database import get_sync_session
from app.models.run import AlignmentResultCreate
from app.repositories.run_repository import AlignmentResultRepository
from app.services.dataset_service import DatasetService
from app.services.training_service import cell_key, run_dir_for
from slm.config import RunConfig
from slm.data import StreamEncoder
from slm.metrics import AlignmentReport, layer_alignment, save_hidden_states
from slm.probe import collect_hidden, probe_layers
from slm.registry import registry

logger = logging.getLogger(__name__)

PROBE_SPLIT = "tts_test"


class AlignmentService:
    """Отчёт о выравнивании модальностей на слоях embedding / middle / last"""

    def __init__(
        self,
        config: RunConfig,
        checkpoint_path: str | Path,
        data_dir: str | Path | None = None,
        out_dir: str | Path | None = None,
        database_url: str | None = None,
    ):
        self.checkpoint_path = Path(checkpoint_path)
        self.checkpoint = registry.get_checkpoint(self.checkpoint_path)
        self.config = self.checkpoint.run_config.model_copy(update={"eval": config.eval})
        self.encoder = StreamEncoder(self.config, registry.get_codec(self.config.codec))
        self.dataset = DatasetService(config, data_dir)
        self.out_dir = run_dir_for(self.config, out_dir) / "align"
        self.database_url = database_url

    def align(self, split: str = PROBE_SPLIT, dump_hidden: bool = True) -> AlignmentReport:
        cfg = self.config.eval
        probe = self.dataset.load_split(split, limit=cfg.probe_examples)
        layers = probe_layers(self.config.model.n_layers)
        states = collect_hidden(self.checkpoint.model, self.encoder, probe, list(layers))

        self.out_dir.mkdir(parents=True, exist_ok=True)
        records = []
        for layer, name in layers.items():
            hidden = states.layers[layer]
            if dump_hidden:
                save_hidden_states(self.out_dir / f"hidden_{name}.npy", hidden)
            records.append(
                layer_alignment(
                    layer,
                    name,
                    hidden,
                    states.modalities,
                    pair_cap=cfg.pair_cap,
                    eps=cfg.riemannian_eps,
                    seed=self.config.train.seed,
                )
            )
        if dump_hidden:
            (self.out_dir / "modalities.json").write_text(
                json.dumps(states.modalities), encoding="utf-8"
            )

        report = AlignmentReport(
            layers=records,
            meta={
                "cell": self.config.cell_name,
                "checkpoint": str(self.checkpoint_path),
                "probe_split": split,
                "probe_examples": len(probe),
                "log_base": "e",
                "centered": True,
                "pair_cap": cfg.pair_cap,
                "eps": cfg.riemannian_eps,
                "pairing": "uniform pairs within / across modality, exhaustive under the cap",
            },
        )
        report_path = report.save(self.out_dir / "report.json")
        self._record(report, report_path)

        for record in records:
            logger.info(
                f"[ALIGN] {self.config.cell_name} {record.name}: "
                f"STSim={record.stats.st_sim} riemannian={record.riemannian}"
            )
        return report

    def _record(self, report: AlignmentReport, report_path: Path) -> None:
        with get_sync_session(self.database_url) as session:
            repo = AlignmentResultRepository(session)
            for record in report.layers:
                repo.create(
                    AlignmentResultCreate(
                        **cell_key(self.config),
                        layer=record.layer,
                        layer_name=record.name,
                        riemannian=record.riemannian,
                        meta=report.meta,
                        report_path=str(report_path),
                        **vars(record.stats),
                    )
                )
