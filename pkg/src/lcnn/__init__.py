"""Low-complexity acoustic-scene CNN toolkit.

Build, train, prune, quantize, profile, and ensemble a small
convolutional classifier over log-mel audio features, with exact
parameter/MAC budget accounting.
"""

from .estimators import EnsembleClassifier, LogMelTransformer, LowComplexityClassifier
from .features import FeatureExtractor, FrontendConfig, log_mel, mel_filterbank
from .model import ArchConfig, Network, build, forward, forward_batch
from .profiler import (
    ComplexityReport,
    budget_gate,
    count_macs,
    count_params,
    profile,
    profile_ensemble,
)
from .pruning import (
    PruningPlan,
    apply_plan,
    filter_cosine_distance,
    find_redundant,
    make_variants,
)
from .quantization import (
    QuantizedTensor,
    compute_qparams,
    dequantize,
    dequantize_model,
    quantize_model,
    quantize_tensor,
)
from .training import LabeledDataset, TrainConfig, cross_entropy, finetune, train
from .ensemble import aggregate, ensemble_probs, evaluate
from .wav import AudioClip, load_wav, save_wav

__version__ = "0.1.0"

__all__ = [
    "ArchConfig", "AudioClip", "ComplexityReport", "EnsembleClassifier",
    "FeatureExtractor", "FrontendConfig", "LabeledDataset", "LogMelTransformer",
    "LowComplexityClassifier", "Network", "PruningPlan", "QuantizedTensor",
    "TrainConfig", "aggregate", "apply_plan", "budget_gate", "build",
    "compute_qparams", "count_macs", "count_params", "cross_entropy",
    "dequantize", "dequantize_model", "ensemble_probs", "evaluate",
    "filter_cosine_distance", "find_redundant", "finetune", "forward",
    "forward_batch", "load_wav", "log_mel", "make_variants", "mel_filterbank",
    "profile", "profile_ensemble", "quantize_model", "quantize_tensor",
    "save_wav", "train",
]
