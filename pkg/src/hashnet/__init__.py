"""Supervised learning-to-hash toolkit.

Trains a multilayer hashing network with an alternating scheme that keeps
an explicitly binary copy of the codes, then serves exact Hamming-distance
retrieval over bit-packed codes with mAP evaluation.
"""

from .errors import (
    DivergenceError,
    FormatError,
    InvalidInput,
    NumericalFailure,
    UndefinedMetric,
)
from .hashloss import Hyperparams, loss, loss_grad, loss_terms, similarity_matrix
from .index import (
    PackedCodes,
    binarize,
    hamming,
    mean_average_precision,
    pack,
    search,
    unpack,
)
from .network import (
    HeadSpec,
    Layer,
    NetworkParams,
    SgdConfig,
    backward,
    forward,
    head_spec_for,
    init_head_layers,
    sgd_step,
    zero_velocity,
)
from .numerics import EigenDecomposition, procrustes_rotation, sym_eig
from .pretrain import ItqResult, PcaModel, init_binary_codes, itq, pca_fit
from .trainer import (
    BatchRecord,
    LabeledFeatures,
    TrainSchedule,
    TrainState,
    default_schedule,
    init_network,
    quantization_gap,
    train,
    update_codes,
)

__version__ = "0.1.0"

__all__ = [
    "BatchRecord",
    "DivergenceError",
    "EigenDecomposition",
    "FormatError",
    "HeadSpec",
    "Hyperparams",
    "InvalidInput",
    "ItqResult",
    "LabeledFeatures",
    "Layer",
    "NetworkParams",
    "NumericalFailure",
    "PackedCodes",
    "PcaModel",
    "SgdConfig",
    "TrainSchedule",
    "TrainState",
    "UndefinedMetric",
    "backward",
    "binarize",
    "default_schedule",
    "forward",
    "hamming",
    "head_spec_for",
    "init_binary_codes",
    "init_head_layers",
    "init_network",
    "itq",
    "loss",
    "loss_grad",
    "loss_terms",
    "mean_average_precision",
    "pack",
    "pca_fit",
    "procrustes_rotation",
    "quantization_gap",
    "search",
    "sgd_step",
    "similarity_matrix",
    "sym_eig",
    "train",
    "unpack",
    "update_codes",
    "zero_velocity",
    "__version__",
]
