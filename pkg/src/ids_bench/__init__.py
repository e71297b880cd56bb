"""Fidelity evaluation toolkit: linear-separability scores for paired and
unpaired sample sets, FID/KID baselines, image corruption and free-form mask
synthesis for robustness studies, and a timed real-vs-fake user-study service.
"""

from .baseline_metrics import GaussianStats, fid, gaussian_stats, kid, pearson
from .feature_store import (
    FeatureMatrix,
    PairedFeatureSet,
    PluginExtractor,
    ToyEmbedder,
    extract_corpus,
    read_features,
    toy_embed,
    write_features,
)
from .ids_metrics import MetricResult, p_ids, run_repeated, u_ids
from .linear_svm import LabeledFeatures, SvmConfig, SvmModel, decision_values, fit_svm
from .manipulations import (
    MaskBitmap,
    MaskSamplerConfig,
    RasterImage,
    apply_mask,
    mask_square,
    noisy_pixels,
    sample_free_form_mask,
    sample_mask_in_ratio,
)
from .rng import generator_from, split_seed

__version__ = "0.1.0"
