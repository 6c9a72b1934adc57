"""Ensembles of encoder-decoder GANs for anomaly detection on vector data."""

__version__ = "0.1.0"

from .autodiff import Adam, Tape, Tensor, finite_difference_grad
from .losses import LossWeights, PriorSpec
from .networks import DiscriminatorBundle, GeneratorBundle, Mlp, MlpSpec
from .training import (
    EnsembleModel,
    TrainConfig,
    build_ensemble,
    load_checkpoint,
    save_checkpoint,
    train,
    train_single,
)
from .scoring import AnomalyReport, ensemble_score, pair_score, score_dataset
from .data import LabeledDataset, Scaler, anomaly_split, make_synthetic, normalize
from .metrics import auroc, prf_at_threshold, roc_curve, threshold_by_contamination
from .critic import (
    CriticInstance,
    check_theorem,
    closed_form_critic,
    oracle_optimal_critic,
    random_instance,
    verify_lipschitz,
)
