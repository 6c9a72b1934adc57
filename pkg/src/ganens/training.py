"""Ensemble training: randomized generator-discriminator pairing.

Per iteration one (generator, discriminator) pair is sampled uniformly, a
minibatch is drawn with replacement, the discriminator takes an ascent step
on the pair's adversarial loss (several critic steps for the f-anogan
variant, followed by weight clipping), and the generator takes a descent
step on its weighted composite loss.  Three independent RNG streams (pairs,
minibatches, prior noise) make the I=J=1 case reduce bitwise to a plain
single-model loop.

The f-anogan variant runs two sequential phases: decoder+critic first, then
the encoder against the frozen decoder and critic.
"""

import json
import math
import zipfile
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import kernels as K
from .autodiff import Adam, Tape, Tensor
from .data import Scaler
from .errors import (
    CheckpointError,
    GradientError,
    NonFiniteError,
    ShapeError,
    VariantError,
)
from .losses import (
    MODEL_VARIANTS,
    VARIANT_DISC_KIND,
    LossWeights,
    PriorSpec,
    adversarial_loss,
    composite_generator_loss,
)
from .networks import DiscriminatorBundle, GeneratorBundle, Mlp, MlpSpec

CHECKPOINT_VERSION = 1

VARIANT_DEFAULT_WEIGHTS = {
    "f-anogan": LossWeights(adversarial=1.0, reconstruction=1.0, discriminative=1.0,
                            encoding=0.0, score_weight=1.0, norm_order=2),
    "egbad": LossWeights(adversarial=1.0, reconstruction=0.0, discriminative=0.0,
                         encoding=0.0, score_weight=1.0, norm_order=2),
    "ganomaly": LossWeights(adversarial=1.0, reconstruction=50.0, discriminative=1.0,
                            encoding=1.0, score_weight=1.0, norm_order=2),
}


@dataclass
class TrainConfig:
    max_iter: int
    batch_size: int = 64
    lr_gen: float = 1e-4
    lr_disc: float = 1e-4
    n_critic: int = 5
    clip_c: float = 0.01
    seed: int = 0
    convergence_tol: float = 1e-4
    convergence_window: int = 100
    phase_split: float = 0.5

    def __post_init__(self):
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr_gen < 0 or self.lr_disc < 0:
            raise ValueError("learning rates must be nonnegative")
        if self.n_critic < 1:
            raise ValueError("n_critic must be >= 1")
        if self.clip_c <= 0:
            raise ValueError("clip_c must be positive")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be >= 0")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be >= 1")
        if not (0.0 <= self.phase_split <= 1.0):
            raise ValueError("phase_split must lie in [0, 1]")


@dataclass
class EnsembleModel:
    variant: str
    generators: list
    discriminators: list
    weights: LossWeights
    prior: PriorSpec

    def __post_init__(self):
        if self.variant not in MODEL_VARIANTS:
            raise VariantError(f"unknown model variant {self.variant!r}")
        if not self.generators or not self.discriminators:
            raise ShapeError("need at least one generator and one discriminator")
        d = self.generators[0].data_width
        dprime = self.generators[0].encoding_width
        for gen in self.generators:
            if gen.data_width != d or gen.encoding_width != dprime:
                raise ShapeError("all generators must share (d, d') widths")
            if self.variant == "ganomaly" and gen.second_encoder is None:
                raise VariantError("ganomaly generators need a second encoder")
        kind = VARIANT_DISC_KIND[self.variant]
        expected_in = d + dprime if kind == "bigan" else d
        for disc in self.discriminators:
            if disc.kind != kind:
                raise VariantError(
                    f"variant {self.variant!r} needs {kind!r} discriminators, got {disc.kind!r}"
                )
            if disc.in_width != expected_in:
                raise ShapeError(
                    f"discriminator input width {disc.in_width} != expected {expected_in}"
                )
        if self.prior.dim != dprime:
            raise ShapeError("prior dimension must equal the encoding width")

    @property
    def n_generators(self):
        return len(self.generators)

    @property
    def n_discriminators(self):
        return len(self.discriminators)

    @property
    def data_width(self):
        return self.generators[0].data_width

    @property
    def encoding_width(self):
        return self.generators[0].encoding_width

    def parameters(self):
        out = []
        for gen in self.generators:
            out += gen.parameters()
        for disc in self.discriminators:
            out += disc.parameters()
        return out


def build_ensemble(variant, d, dprime, n_generators=3, n_discriminators=3,
                   weights=None, seed=0, enc_hidden=(64,), dec_hidden=(64,),
                   disc_hidden=(64, 32), decoder_output="identity"):
    """Construct a freshly initialized ensemble for a model variant."""
    if variant not in MODEL_VARIANTS:
        raise VariantError(f"unknown model variant {variant!r}")
    if weights is None:
        weights = VARIANT_DEFAULT_WEIGHTS[variant]
    kind = VARIANT_DISC_KIND[variant]
    disc_in = d + dprime if kind == "bigan" else d
    disc_act = "identity" if kind == "wgan" else "sigmoid"

    enc_spec = MlpSpec((d, *enc_hidden, dprime))
    dec_spec = MlpSpec((dprime, *dec_hidden, d), output_activation=decoder_output)
    disc_spec = MlpSpec((disc_in, *disc_hidden, 1), output_activation=disc_act)

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    generators = []
    for i in range(n_generators):
        enc = Mlp(enc_spec, rng, name=f"g{i}.enc")
        dec = Mlp(dec_spec, rng, name=f"g{i}.dec")
        enc2 = Mlp(enc_spec, rng, name=f"g{i}.enc2") if variant == "ganomaly" else None
        generators.append(GeneratorBundle(enc, dec, enc2))
    discriminators = [
        DiscriminatorBundle(Mlp(disc_spec, rng, name=f"d{j}"), kind=kind)
        for j in range(n_discriminators)
    ]
    return EnsembleModel(variant, generators, discriminators, weights, PriorSpec(dprime))


def sample_pair(rng, n_generators, n_discriminators):
    """Uniform independent generator and discriminator indices (0-based)."""
    if n_generators < 1 or n_discriminators < 1:
        raise ShapeError("ensemble sizes must be >= 1")
    return int(rng.integers(0, n_generators)), int(rng.integers(0, n_discriminators))


@dataclass(frozen=True)
class _Phase:
    """One sequential training stage: active weights and trainable pieces."""

    weights: LossWeights
    gen_scope: str          # "all" | "decoder" | "encoder"
    train_disc: bool
    iters: int


def variant_phases(variant, weights, config):
    """The sequential phase list Algorithm-style training runs through."""
    if variant == "f-anogan":
        p1 = int(round(config.max_iter * config.phase_split))
        p1 = min(max(p1, 0), config.max_iter)
        w1 = LossWeights(adversarial=weights.adversarial, reconstruction=0.0,
                         discriminative=0.0, encoding=0.0,
                         score_weight=weights.score_weight, norm_order=weights.norm_order)
        w2 = LossWeights(adversarial=0.0, reconstruction=weights.reconstruction,
                         discriminative=weights.discriminative, encoding=0.0,
                         score_weight=weights.score_weight, norm_order=weights.norm_order)
        return [
            _Phase(w1, "decoder", True, p1),
            _Phase(w2, "encoder", False, config.max_iter - p1),
        ]
    return [_Phase(weights, "all", True, config.max_iter)]


def _gen_trainable(gen, scope):
    if scope == "decoder":
        return gen.decoder.parameters()
    if scope == "encoder":
        return gen.encoder.parameters()
    return gen.parameters()


def discriminator_step(model, i, j, batch, config, opt, prior=None):
    """One ascent step on the pair adversarial loss; returns its value.

    The step minimizes the negated loss with Adam; f-anogan critics are
    clipped to [-clip_c, clip_c] afterwards.
    """
    if batch.shape[0] == 0:
        raise ShapeError("batch is empty")
    gen, disc = model.generators[i], model.discriminators[j]
    with Tape() as tape:
        batch_t = Tensor(batch)
        la = adversarial_loss(batch_t, gen, disc, model.variant, prior)
        neg = ad.mul(la, -1.0)
    opt.zero_grad()
    tape.backward(neg, params=disc.parameters())
    opt.step()
    if model.variant == "f-anogan":
        for p in disc.parameters():
            K.clip_inplace(p.values.ravel(), config.clip_c)
    return float(la)


def generator_step(model, i, j, batch, config, opt, weights=None, scope="all", prior=None):
    """One descent step on the composite generator loss; returns its value.

    `scope` restricts which generator pieces the optimizer owns; anything
    outside it (and the discriminator) is left untouched.
    """
    if batch.shape[0] == 0:
        raise ShapeError("batch is empty")
    gen, disc = model.generators[i], model.discriminators[j]
    weights = model.weights if weights is None else weights
    with Tape() as tape:
        batch_t = Tensor(batch)
        comp = composite_generator_loss(batch_t, gen, disc, weights, model.variant, prior)
    opt.zero_grad()
    tape.backward(comp, params=_gen_trainable(gen, scope))
    opt.step()
    return float(comp)


@dataclass
class TrainingHistory:
    """Per-iteration rows: (iteration, gen index, disc index, L_adv, L_composite)."""

    rows: list = field(default_factory=list)

    def append(self, iteration, i, j, la, composite):
        self.rows.append((iteration, i, j, la, composite))

    def __len__(self):
        return len(self.rows)

    def update_counts(self, n_generators, n_discriminators):
        gen_counts = [0] * n_generators
        disc_counts = [0] * n_discriminators
        for _, i, j, _, _ in self.rows:
            gen_counts[i] += 1
            disc_counts[j] += 1
        return gen_counts, disc_counts

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,gen_index,disc_index,adversarial_loss,composite_loss\n")
            for t, i, j, la, comp in self.rows:
                fh.write(f"{t},{i},{j},{la!r},{comp!r}\n")


def _rng_streams(seed):
    pair_ss, batch_ss, prior_ss = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.default_rng(pair_ss),
        np.random.default_rng(batch_ss),
        np.random.default_rng(prior_ss),
    )


def _check_training_data(data):
    data = np.ascontiguousarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ShapeError("training data must be a nonempty (n, d) matrix")
    if not np.all(np.isfinite(data)):
        raise NonFiniteError("training data contains non-finite values")
    return data


class _ConvergenceTracker:
    """Stop when consecutive moving-average windows of the composite loss stall."""

    def __init__(self, window, tol):
        self.window = window
        self.tol = tol
        self.values = []

    def update(self, value):
        if self.tol <= 0:
            return False
        self.values.append(value)
        n, w = len(self.values), self.window
        if n < 2 * w or n % w != 0:
            return False
        prev = sum(self.values[-2 * w:-w]) / w
        cur = sum(self.values[-w:]) / w
        return abs(cur - prev) <= self.tol * max(abs(prev), 1e-12)


def train(model, data, config):
    """Run pairwise ensemble training and return the loss history.

    `data` holds normal samples only; the sampled pair is the only part of
    the model an iteration updates.
    """
    data = _check_training_data(data)
    if data.shape[1] != model.data_width:
        raise ShapeError(f"data width {data.shape[1]} != model width {model.data_width}")
    rng_pair, rng_batch, rng_prior = _rng_streams(config.seed)
    needs_prior = model.variant in ("f-anogan", "egbad")
    n_rows = data.shape[0]
    history = TrainingHistory()
    t_global = 0

    for phase in variant_phases(model.variant, model.weights, config):
        gen_opts = [
            Adam(_gen_trainable(g, phase.gen_scope), lr=config.lr_gen)
            for g in model.generators
        ]
        disc_opts = [
            Adam(d.parameters(), lr=config.lr_disc) for d in model.discriminators
        ] if phase.train_disc else None
        tracker = _ConvergenceTracker(config.convergence_window, config.convergence_tol)

        for _ in range(phase.iters):
            i, j = sample_pair(rng_pair, model.n_generators, model.n_discriminators)
            batch = data[rng_batch.integers(0, n_rows, size=config.batch_size)]
            try:
                la = math.nan
                if phase.train_disc:
                    steps = config.n_critic if model.variant == "f-anogan" else 1
                    for _ in range(steps):
                        prior = model.prior.sample(rng_prior, batch.shape[0]) if needs_prior else None
                        la = discriminator_step(model, i, j, batch, config, disc_opts[j], prior)
                prior = None
                if needs_prior and phase.weights.adversarial > 0:
                    prior = model.prior.sample(rng_prior, batch.shape[0])
                comp = generator_step(
                    model, i, j, batch, config, gen_opts[i],
                    weights=phase.weights, scope=phase.gen_scope, prior=prior,
                )
            except NonFiniteError as exc:
                raise GradientError(f"training diverged at iteration {t_global}: {exc}") from exc
            history.append(t_global, i, j, la, comp)
            t_global += 1
            if tracker.update(comp):
                break
    return history


def train_single(model, data, config):
    """Reference loop for a single generator-discriminator model.

    Written as its own plain loop (no pair sampling, no per-bundle
    bookkeeping) so the ensemble trainer can be checked against it: with
    I = J = 1 and the same seed both must produce bitwise-identical
    parameter trajectories.
    """
    if model.n_generators != 1 or model.n_discriminators != 1:
        raise ShapeError("train_single expects exactly one generator and discriminator")
    data = _check_training_data(data)
    if data.shape[1] != model.data_width:
        raise ShapeError(f"data width {data.shape[1]} != model width {model.data_width}")
    # Same stream layout as train(); the pair stream exists but is unused.
    _, rng_batch, rng_prior = _rng_streams(config.seed)
    needs_prior = model.variant in ("f-anogan", "egbad")
    n_rows = data.shape[0]
    history = TrainingHistory()
    t_global = 0

    for phase in variant_phases(model.variant, model.weights, config):
        gen_opt = Adam(_gen_trainable(model.generators[0], phase.gen_scope), lr=config.lr_gen)
        disc_opt = Adam(model.discriminators[0].parameters(), lr=config.lr_disc)
        tracker = _ConvergenceTracker(config.convergence_window, config.convergence_tol)
        for _ in range(phase.iters):
            batch = data[rng_batch.integers(0, n_rows, size=config.batch_size)]
            la = math.nan
            if phase.train_disc:
                steps = config.n_critic if model.variant == "f-anogan" else 1
                for _ in range(steps):
                    prior = model.prior.sample(rng_prior, batch.shape[0]) if needs_prior else None
                    la = discriminator_step(model, 0, 0, batch, config, disc_opt, prior)
            prior = None
            if needs_prior and phase.weights.adversarial > 0:
                prior = model.prior.sample(rng_prior, batch.shape[0])
            comp = generator_step(
                model, 0, 0, batch, config, gen_opt,
                weights=phase.weights, scope=phase.gen_scope, prior=prior,
            )
            history.append(t_global, 0, 0, la, comp)
            t_global += 1
            if tracker.update(comp):
                break
    return history


def _bundle_arrays(model):
    arrays = {}
    for i, gen in enumerate(model.generators):
        for k, p in enumerate(gen.encoder.parameters()):
            arrays[f"g{i}.enc.{k}"] = p.values
        for k, p in enumerate(gen.decoder.parameters()):
            arrays[f"g{i}.dec.{k}"] = p.values
        if gen.second_encoder is not None:
            for k, p in enumerate(gen.second_encoder.parameters()):
                arrays[f"g{i}.enc2.{k}"] = p.values
    for j, disc in enumerate(model.discriminators):
        for k, p in enumerate(disc.parameters()):
            arrays[f"d{j}.{k}"] = p.values
    return arrays


def save_checkpoint(model, path, scaler=None):
    """Write a self-describing, value-exact checkpoint (npz container)."""
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "variant": model.variant,
        "weights": model.weights.to_dict(),
        "prior_dim": model.prior.dim,
        "generators": [
            {
                "encoder": gen.encoder.spec.to_dict(),
                "decoder": gen.decoder.spec.to_dict(),
                "second_encoder": (
                    gen.second_encoder.spec.to_dict() if gen.second_encoder else None
                ),
            }
            for gen in model.generators
        ],
        "discriminators": [
            {"kind": disc.kind, "spec": disc.mlp.spec.to_dict()}
            for disc in model.discriminators
        ],
        "scaler": scaler.to_dict() if scaler is not None else None,
    }
    np.savez(path, __meta__=np.array(json.dumps(meta)), **_bundle_arrays(model))


def _load_mlp(spec_dict, npz, prefix, name):
    spec = MlpSpec.from_dict(spec_dict)
    n_arrays = 2 * (len(spec.widths) - 1)
    try:
        arrays = [npz[f"{prefix}.{k}"] for k in range(n_arrays)]
    except KeyError as exc:
        raise CheckpointError(f"checkpoint is missing parameter array {exc}") from exc
    return Mlp.from_arrays(spec, arrays, name=name)


def load_checkpoint(path):
    """Rebuild (model, scaler) from a checkpoint; scaler may be None."""
    try:
        npz = np.load(path, allow_pickle=False)
    except (OSError, ValueError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    with npz:
        if "__meta__" not in npz:
            raise CheckpointError(f"{path} is not a model checkpoint (no metadata entry)")
        try:
            meta = json.loads(str(npz["__meta__"][()]))
        except (ValueError, KeyError) as exc:
            raise CheckpointError(f"unparseable checkpoint metadata: {exc}") from exc
        version = meta.get("format_version")
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {version!r} (expected {CHECKPOINT_VERSION})"
            )
        try:
            generators = []
            for i, gmeta in enumerate(meta["generators"]):
                enc = _load_mlp(gmeta["encoder"], npz, f"g{i}.enc", f"g{i}.enc")
                dec = _load_mlp(gmeta["decoder"], npz, f"g{i}.dec", f"g{i}.dec")
                enc2 = None
                if gmeta["second_encoder"] is not None:
                    enc2 = _load_mlp(gmeta["second_encoder"], npz, f"g{i}.enc2", f"g{i}.enc2")
                generators.append(GeneratorBundle(enc, dec, enc2))
            discriminators = [
                DiscriminatorBundle(
                    _load_mlp(dmeta["spec"], npz, f"d{j}", f"d{j}"), kind=dmeta["kind"]
                )
                for j, dmeta in enumerate(meta["discriminators"])
            ]
            model = EnsembleModel(
                variant=meta["variant"],
                generators=generators,
                discriminators=discriminators,
                weights=LossWeights.from_dict(meta["weights"]),
                prior=PriorSpec(meta["prior_dim"]),
            )
            scaler = Scaler.from_dict(meta["scaler"]) if meta.get("scaler") else None
        except (KeyError, TypeError) as exc:
            raise CheckpointError(f"malformed checkpoint metadata: {exc}") from exc
    return model, scaler
