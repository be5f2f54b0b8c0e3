"""Audio deepfake detection toolkit: manifest mixing, signal augmentation,
embedding pooling, linear probing, EER evaluation, late fusion and t-SNE
diagnostics."""

from .augment import AudioBuffer, AugmentPolicy, add_white_noise, apply_policy, reverberate
from .embedding import EmbeddingRecord, EmbeddingStore, average_pool, read_store, write_store
from .fusion import FusionModel, ablation_grid, align, apply_fusion, train_fusion
from .manifest import ManifestEntry, MixRecipe, mix, parse_manifest, stratified_sample
from .metrics import ScoreSet, eer, roc_curve
from .probe import ProbeModel, TrainConfig, bce_loss, lr_schedule, score, train_probe
from .projection import TsneConfig, perplexity_calibration, render_plot, tsne

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer", "AugmentPolicy", "add_white_noise", "apply_policy", "reverberate",
    "EmbeddingRecord", "EmbeddingStore", "average_pool", "read_store", "write_store",
    "FusionModel", "ablation_grid", "align", "apply_fusion", "train_fusion",
    "ManifestEntry", "MixRecipe", "mix", "parse_manifest", "stratified_sample",
    "ScoreSet", "eer", "roc_curve",
    "ProbeModel", "TrainConfig", "bce_loss", "lr_schedule", "score", "train_probe",
    "TsneConfig", "perplexity_calibration", "render_plot", "tsne",
]
