"""Кросс-модальная геометрия скрытых состояний: cos/L2 статистики и римановское расстояние.

K = (1/(n−1)) V Σ² Vᵀ по центрированным строкам; расстояние
sqrt(Σ ln² λ_i) + ‖μ_s − μ_t‖², λ_i - положительные вещественные собственные
значения K_text⁻¹ K_speech.
"""

import json
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from app.core.errors import DataError, SingularityError

TEXT = "text"
SPEECH = "speech"
DEFAULT_PAIR_CAP = 10_000
_IMAG_TOL = 1e-8
_MAX_COND = 1e12


@dataclass
class ModalStats:
    tt_sim: float | None = None
    ss_sim: float | None = None
    st_sim: float | None = None
    tt_dist: float | None = None
    ss_dist: float | None = None
    st_dist: float | None = None


def _pairs_within(n: int, cap: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    total = n * (n - 1) // 2
    if total <= cap:
        i, j = np.triu_indices(n, k=1)
        return i, j
    i = rng.integers(0, n, size=cap)
    j = (i + rng.integers(1, n, size=cap)) % n
    return i, j


def _pairs_across(n_a: int, n_b: int, cap: int, rng: np.random.Generator):
    if n_a * n_b <= cap:
        i, j = np.meshgrid(np.arange(n_a), np.arange(n_b), indexing="ij")
        return i.ravel(), j.ravel()
    return rng.integers(0, n_a, size=cap), rng.integers(0, n_b, size=cap)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = np.maximum(na * nb, np.finfo(np.float64).tiny)
    cos = np.einsum("ij,ij->i", a, b) / denom
    return float(np.clip(cos, -1.0, 1.0).mean())


def _distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b, axis=1).mean())


def modal_stats(
    hidden: np.ndarray,
    modalities: Sequence[str],
    pair_cap: int = DEFAULT_PAIR_CAP,
    seed: int = 0,
) -> ModalStats:
    """Средние попарные cos/L2 внутри и между модальностями; None если модальности нет"""
    hidden = np.asarray(hidden, dtype=np.float64)
    tags = np.asarray(modalities)
    if hidden.ndim != 2 or len(tags) != hidden.shape[0]:
        raise DataError(f"Hidden matrix {hidden.shape} does not match {len(tags)} tags")

    rng = np.random.default_rng(seed)
    text = hidden[tags == TEXT]
    speech = hidden[tags == SPEECH]
    stats = ModalStats()

    if len(text) >= 2:
        i, j = _pairs_within(len(text), pair_cap, rng)
        stats.tt_sim, stats.tt_dist = _cosine(text[i], text[j]), _distance(text[i], text[j])
    if len(speech) >= 2:
        i, j = _pairs_within(len(speech), pair_cap, rng)
        stats.ss_sim = _cosine(speech[i], speech[j])
        stats.ss_dist = _distance(speech[i], speech[j])
    if len(text) and len(speech):
        i, j = _pairs_across(len(text), len(speech), pair_cap, rng)
        stats.st_sim = _cosine(text[i], speech[j])
        stats.st_dist = _distance(text[i], speech[j])
    return stats


def covariance(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(K, μ): K по правым сингулярным векторам центрированной матрицы"""
    h = np.asarray(h, dtype=np.float64)
    n = h.shape[0]
    if n < 2:
        raise DataError(f"Covariance needs at least 2 rows, got {n}")
    mu = h.mean(axis=0)
    _, s, vh = np.linalg.svd(h - mu, full_matrices=False)
    k = (vh.T * s**2) @ vh / (n - 1)
    return k, mu


@dataclass
class RiemannianResult:
    distance: float
    eigenvalues: list[float]
    mu_speech: list[float]
    mu_text: list[float]


def riemannian(
    h_speech: np.ndarray, h_text: np.ndarray, eps: float = 1e-6
) -> RiemannianResult:
    k_speech, mu_speech = covariance(h_speech)
    k_text, mu_text = covariance(h_text)
    if k_speech.shape != k_text.shape:
        raise DataError("Speech and text hidden states differ in width")

    d = k_text.shape[0]
    k_text = k_text + eps * np.eye(d)
    k_speech = k_speech + eps * np.eye(d)
    cond = np.linalg.cond(k_text)
    if not np.isfinite(cond) or cond > _MAX_COND:
        raise SingularityError(
            f"Text covariance is singular (rank {np.linalg.matrix_rank(k_text)} < {d}); "
            "increase eps or the probe size"
        )

    eigenvalues = np.linalg.eigvals(np.linalg.solve(k_text, k_speech))
    real = eigenvalues.real
    keep = (real > 0) & (np.abs(eigenvalues.imag) < _IMAG_TOL * np.abs(real))
    lam = real[keep]
    distance = float(np.sqrt(np.sum(np.log(lam) ** 2)) + np.sum((mu_speech - mu_text) ** 2))
    return RiemannianResult(
        distance=distance,
        eigenvalues=sorted(lam.tolist()),
        mu_speech=mu_speech.tolist(),
        mu_text=mu_text.tolist(),
    )


def riemannian_distance(h_speech: np.ndarray, h_text: np.ndarray, eps: float = 1e-6) -> float:
    return riemannian(h_speech, h_text, eps).distance


@dataclass
class LayerAlignment:
    layer: int
    name: str
    stats: ModalStats
    riemannian: float | None
    eigenvalues: list[float] = field(default_factory=list)
    mu_speech: list[float] = field(default_factory=list)
    mu_text: list[float] = field(default_factory=list)
    n_text: int = 0
    n_speech: int = 0


@dataclass
class AlignmentReport:
    layers: list[LayerAlignment]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "AlignmentReport":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        layers = [
            LayerAlignment(**{**layer, "stats": ModalStats(**layer["stats"])})
            for layer in data["layers"]
        ]
        return cls(layers=layers, meta=data.get("meta", {}))


def layer_alignment(
    layer: int,
    name: str,
    hidden: np.ndarray,
    modalities: Sequence[str],
    pair_cap: int = DEFAULT_PAIR_CAP,
    eps: float = 1e-6,
    seed: int = 0,
) -> LayerAlignment:
    hidden = np.asarray(hidden, dtype=np.float64)
    tags = np.asarray(modalities)
    stats = modal_stats(hidden, tags, pair_cap, seed)
    text, speech = hidden[tags == TEXT], hidden[tags == SPEECH]
    record = LayerAlignment(layer, name, stats, None, n_text=len(text), n_speech=len(speech))
    if len(text) >= 2 and len(speech) >= 2:
        result = riemannian(speech, text, eps)
        record.riemannian = result.distance
        record.eigenvalues = result.eigenvalues
        record.mu_speech = result.mu_speech
        record.mu_text = result.mu_text
    return record


def save_hidden_states(path: str | Path, hidden: np.ndarray) -> Path:
    """.npy: заголовок с shape/dtype и построчные float32"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, np.ascontiguousarray(hidden, dtype=np.float32))
    return path


def load_hidden_states(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Hidden-state dump not found: {path}")
    hidden = np.load(path, allow_pickle=False)
    if hidden.ndim != 2:
        raise DataError(f"{path}: expected a 2-D matrix, got shape {hidden.shape}")
    return hidden
