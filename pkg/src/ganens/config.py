"""Run configuration: variant defaults, file/flag precedence, echo files.

Precedence is variant defaults < config file < command-line flags, and the
fully resolved configuration is echoed to the run directory so a run can be
reproduced from that one file.  Unknown keys are rejected outright.
"""

import dataclasses
from dataclasses import dataclass, field

import yaml

from .data import NORMALIZATION_METHODS, SYNTHETIC_KINDS
from .errors import ConfigError
from .losses import MODEL_VARIANTS, LossWeights
from .training import VARIANT_DEFAULT_WEIGHTS, TrainConfig

# Per-variant tabular defaults; ganomaly has no published tabular row, so it
# borrows the small-image settings with a tabular-sized encoding.
VARIANT_DEFAULTS = {
    "f-anogan": {
        "dprime": 16, "lr_gen": 1e-4, "lr_disc": 1e-4,
        "batch_size": 128, "score_weight": 39.0,
    },
    "egbad": {
        "dprime": 32, "lr_gen": 2e-4, "lr_disc": 2e-4,
        "batch_size": 1024, "score_weight": 0.1,
    },
    "ganomaly": {
        "dprime": 16, "lr_gen": 2e-4, "lr_disc": 2e-4,
        "batch_size": 64, "score_weight": 9.0,
    },
}


@dataclass
class RunConfig:
    variant: str = "f-anogan"
    n_generators: int = 3
    n_discriminators: int = 3

    adversarial_weight: float = None
    reconstruction_weight: float = None
    discriminative_weight: float = None
    encoding_weight: float = None
    score_weight: float = None
    norm_order: int = 2

    dprime: int = None
    enc_hidden: list = field(default_factory=lambda: [64])
    dec_hidden: list = field(default_factory=lambda: [64])
    disc_hidden: list = field(default_factory=lambda: [64, 32])
    decoder_output: str = "identity"

    lr_gen: float = None
    lr_disc: float = None
    batch_size: int = None
    max_iter: int = 2000
    n_critic: int = 5
    clip_c: float = 0.01
    ensemble_iter_multiplier: int = 3
    phase_split: float = 0.5
    convergence_tol: float = 1e-4
    convergence_window: int = 100

    data_file: str = None
    label_column: object = "label"
    delimiter: str = ","
    synthetic_kind: str = None
    synthetic_normal: int = 1000
    synthetic_anomaly: int = 200
    synthetic_dim: int = 2
    data_seed: int = 0

    normalization: str = "minmax01"
    train_frac: float = 0.75
    seed: int = 0
    outdir: str = "runs/run"

    def __post_init__(self):
        if self.variant not in MODEL_VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r} (choose from {MODEL_VARIANTS})")
        base = VARIANT_DEFAULTS[self.variant]
        weights = VARIANT_DEFAULT_WEIGHTS[self.variant]
        fills = {
            "adversarial_weight": weights.adversarial,
            "reconstruction_weight": weights.reconstruction,
            "discriminative_weight": weights.discriminative,
            "encoding_weight": weights.encoding,
            "score_weight": base["score_weight"],
            "dprime": base["dprime"],
            "lr_gen": base["lr_gen"],
            "lr_disc": base["lr_disc"],
            "batch_size": base["batch_size"],
        }
        for name, value in fills.items():
            if getattr(self, name) is None:
                setattr(self, name, value)
        self._validate()

    def _validate(self):
        if self.n_generators < 1 or self.n_discriminators < 1:
            raise ConfigError("ensemble sizes must be >= 1")
        if self.norm_order not in (1, 2):
            raise ConfigError("norm_order must be 1 or 2")
        if self.dprime < 1:
            raise ConfigError("dprime must be >= 1")
        for name in ("enc_hidden", "dec_hidden", "disc_hidden"):
            widths = getattr(self, name)
            if not isinstance(widths, (list, tuple)) or not widths:
                raise ConfigError(f"{name} must be a nonempty list of widths")
            if any((not isinstance(w, int)) or w < 1 for w in widths):
                raise ConfigError(f"{name} must contain positive integers")
            setattr(self, name, list(widths))
        if self.decoder_output not in ("identity", "sigmoid", "tanh"):
            raise ConfigError(f"unknown decoder_output {self.decoder_output!r}")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be >= 0")
        if self.ensemble_iter_multiplier < 1:
            raise ConfigError("ensemble_iter_multiplier must be >= 1")
        if self.normalization not in NORMALIZATION_METHODS:
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if not (0.0 < self.train_frac < 1.0):
            raise ConfigError("train_frac must lie strictly between 0 and 1")
        sources = [self.data_file is not None, self.synthetic_kind is not None]
        if sum(sources) != 1:
            raise ConfigError("exactly one of data_file or synthetic_kind must be set")
        if self.synthetic_kind is not None:
            if self.synthetic_kind not in SYNTHETIC_KINDS:
                raise ConfigError(f"unknown synthetic_kind {self.synthetic_kind!r}")
            if self.synthetic_normal < 1:
                raise ConfigError("synthetic_normal must be >= 1")
            if self.synthetic_anomaly < 0:
                raise ConfigError("synthetic_anomaly must be >= 0")
            if self.synthetic_dim < 2:
                raise ConfigError("synthetic_dim must be >= 2")
        # Delegate range checks shared with the trainer.
        try:
            self.train_config()
            self.loss_weights()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def loss_weights(self):
        return LossWeights(
            adversarial=self.adversarial_weight,
            reconstruction=self.reconstruction_weight,
            discriminative=self.discriminative_weight,
            encoding=self.encoding_weight,
            score_weight=self.score_weight,
            norm_order=self.norm_order,
        )

    def effective_max_iter(self):
        """Ensembles train for a multiple of the single-model budget."""
        if self.n_generators * self.n_discriminators > 1:
            return self.max_iter * self.ensemble_iter_multiplier
        return self.max_iter

    def train_config(self):
        return TrainConfig(
            max_iter=self.effective_max_iter(),
            batch_size=self.batch_size,
            lr_gen=self.lr_gen,
            lr_disc=self.lr_disc,
            n_critic=self.n_critic,
            clip_c=self.clip_c,
            seed=self.seed,
            convergence_tol=self.convergence_tol,
            convergence_window=self.convergence_window,
            phase_split=self.phase_split,
        )

    def to_dict(self):
        return dataclasses.asdict(self)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)


_FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)}


def config_from_dict(values):
    unknown = sorted(set(values) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            values = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: expected a mapping of configuration keys")
    return values


def resolve_config(file_values=None, flag_values=None):
    """Merge variant defaults, config-file values, and explicit flags."""
    file_values = dict(file_values or {})
    flag_values = {k: v for k, v in dict(flag_values or {}).items() if v is not None}
    for source in (file_values, flag_values):
        unknown = sorted(set(source) - _FIELD_NAMES)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    merged = {**file_values, **flag_values}
    return config_from_dict(merged)
