from slm.metrics.alignment import (
    AlignmentReport,
    LayerAlignment,
    ModalStats,
    layer_alignment,
    load_hidden_states,
    modal_stats,
    riemannian,
    riemannian_distance,
    save_hidden_states,
)
from slm.metrics.text import exact_match, f1_score, normalize_answer, success_rate

__all__ = [
    "AlignmentReport",
    "LayerAlignment",
    "ModalStats",
    "exact_match",
    "f1_score",
    "layer_alignment",
    "load_hidden_states",
    "modal_stats",
    "normalize_answer",
    "riemannian",
    "riemannian_distance",
    "save_hidden_states",
    "success_rate",
]
