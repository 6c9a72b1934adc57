"""The adversarial, reconstruction, discriminative, and encoding losses.

Every loss reduces over the batch with a mean, so the term weights stay
comparable across batch sizes.  Adversarial losses come in three forms
matching the discriminator kind: the vanilla form scores reconstructions,
while the critic and joint forms score decodings of prior noise.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError, VariantError

MODEL_VARIANTS = ("f-anogan", "egbad", "ganomaly")

# Which discriminator kind each model variant trains against.
VARIANT_DISC_KIND = {"f-anogan": "wgan", "egbad": "bigan", "ganomaly": "gan"}


@dataclass(frozen=True)
class LossWeights:
    """Term weights for the generator objective plus the scoring weight.

    `adversarial`, `reconstruction`, `discriminative`, `encoding` weight the
    four generator loss terms; `score_weight` weights the discriminative
    term inside the anomaly score; `norm_order` picks the L1 or L2 norm
    power used by the three distance-style losses.
    """

    adversarial: float = 1.0
    reconstruction: float = 0.0
    discriminative: float = 0.0
    encoding: float = 0.0
    score_weight: float = 1.0
    norm_order: int = 2

    def __post_init__(self):
        terms = (self.adversarial, self.reconstruction, self.discriminative, self.encoding)
        if any(t < 0 for t in terms) or self.score_weight < 0:
            raise ValueError("loss weights must be nonnegative")
        if all(t == 0 for t in terms):
            raise ValueError("at least one generator loss weight must be positive")
        if self.norm_order not in (1, 2):
            raise ValueError(f"norm_order must be 1 or 2, got {self.norm_order!r}")

    def to_dict(self):
        return {
            "adversarial": self.adversarial,
            "reconstruction": self.reconstruction,
            "discriminative": self.discriminative,
            "encoding": self.encoding,
            "score_weight": self.score_weight,
            "norm_order": self.norm_order,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class PriorSpec:
    """Standard Gaussian prior over the encoding space."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ShapeError("prior dimension must be >= 1")

    def sample(self, rng, n):
        return rng.standard_normal((n, self.dim))


def _check_batch(batch, width):
    if not isinstance(batch, Tensor):
        raise TypeError("batch must be a Tensor")
    if batch.values.ndim != 2 or batch.shape[1] != width:
        raise ShapeError(f"expected batch of width {width}, got shape {batch.shape}")
    if batch.shape[0] == 0:
        raise ShapeError("batch is empty")


def _as_prior_tensor(prior_samples, dim, n_rows=None):
    t = prior_samples if isinstance(prior_samples, Tensor) else Tensor(np.asarray(prior_samples))
    if t.values.ndim != 2 or t.shape[1] != dim:
        raise ShapeError(f"prior samples must be (n, {dim}), got {t.shape}")
    if n_rows is not None and t.shape[0] != n_rows:
        raise ShapeError("prior batch size must match the data batch size")
    return t


def _mean_per_sample_lp(a, b, norm_order):
    """Mean over rows of ||a_row - b_row||_ell^ell."""
    diff = ad.sub(a, b)
    total = ad.lp_power_norm(diff, norm_order)
    return ad.mul(total, 1.0 / a.shape[0])


def adv_gan(batch, gen, disc):
    """Mean of log D(x) + log(1 - D(reconstruction(x))) over the batch."""
    if disc.kind != "gan":
        raise VariantError(f"adv_gan needs a 'gan' discriminator, got {disc.kind!r}")
    _check_batch(batch, gen.data_width)
    u_real, _ = disc.discriminate(batch)
    u_fake, _ = disc.discriminate(gen.reconstruct(batch))
    return ad.add(
        ad.tensor_mean(ad.log(u_real)),
        ad.tensor_mean(ad.log(ad.sub(1.0, u_fake))),
    )


def adv_wgan(batch, prior_samples, gen, disc):
    """Critic gap: mean D(x) - mean D(decode(z)), z from the prior.

    The encoder does not appear anywhere in this expression, so its
    gradient is identically zero.
    """
    if disc.kind != "wgan":
        raise VariantError(f"adv_wgan needs a 'wgan' critic, got {disc.kind!r}")
    _check_batch(batch, gen.data_width)
    prior = _as_prior_tensor(prior_samples, gen.encoding_width, batch.shape[0])
    u_real, _ = disc.discriminate(batch)
    u_fake, _ = disc.discriminate(gen.decode(prior))
    return ad.sub(ad.tensor_mean(u_real), ad.tensor_mean(u_fake))


def adv_bigan(batch, prior_samples, gen, disc):
    """Joint form: real pairs (x, encode(x)) against generated (decode(z), z)."""
    if disc.kind != "bigan":
        raise VariantError(f"adv_bigan needs a 'bigan' discriminator, got {disc.kind!r}")
    _check_batch(batch, gen.data_width)
    prior = _as_prior_tensor(prior_samples, gen.encoding_width, batch.shape[0])
    u_real, _ = disc.discriminate(ad.concat_cols(batch, gen.encode(batch)))
    u_fake, _ = disc.discriminate(ad.concat_cols(gen.decode(prior), prior))
    return ad.add(
        ad.tensor_mean(ad.log(u_real)),
        ad.tensor_mean(ad.log(ad.sub(1.0, u_fake))),
    )


def recon_loss(batch, gen, norm_order):
    """Mean reconstruction discrepancy ||x - reconstruction(x)||_ell^ell."""
    _check_batch(batch, gen.data_width)
    return _mean_per_sample_lp(batch, gen.reconstruct(batch), norm_order)


def hidden_vector(batch, gen, disc):
    """Last-hidden-layer tap h for a batch, honoring the discriminator kind.

    For the joint ("bigan") kind the discriminator reads (x, encode(x)), so
    the hidden vector of any input is taken on that concatenated pathway.
    """
    if disc.kind == "bigan":
        _, h = disc.discriminate(ad.concat_cols(batch, gen.encode(batch)))
    else:
        _, h = disc.discriminate(batch)
    return h


def disc_loss(batch, gen, disc, norm_order):
    """Mean discrepancy between hidden vectors of x and its reconstruction."""
    _check_batch(batch, gen.data_width)
    h_real = hidden_vector(batch, gen, disc)
    h_fake = hidden_vector(gen.reconstruct(batch), gen, disc)
    return _mean_per_sample_lp(h_real, h_fake, norm_order)


def enc_loss(batch, gen, norm_order):
    """Mean discrepancy between encode(x) and second-encode(reconstruction)."""
    _check_batch(batch, gen.data_width)
    if gen.second_encoder is None:
        raise VariantError("encoding loss needs a generator with a second encoder")
    z = gen.encode(batch)
    z_rec = gen.encode_second(gen.reconstruct(batch))
    return _mean_per_sample_lp(z, z_rec, norm_order)


def adversarial_loss(batch, gen, disc, variant, prior_samples=None):
    """Dispatch to the adversarial form the model variant trains with."""
    if variant not in MODEL_VARIANTS:
        raise VariantError(f"unknown model variant {variant!r}")
    if variant == "f-anogan":
        return adv_wgan(batch, prior_samples, gen, disc)
    if variant == "egbad":
        return adv_bigan(batch, prior_samples, gen, disc)
    return adv_gan(batch, gen, disc)


def composite_generator_loss(batch, gen, disc, weights, variant, prior_samples=None):
    """Weighted sum of the active generator loss terms for one pair.

    Terms with weight zero are not evaluated at all, so e.g. a pure
    reconstruction objective never touches the discriminator.
    """
    if variant not in MODEL_VARIANTS:
        raise VariantError(f"unknown model variant {variant!r}")
    total = None

    def accumulate(total, term, weight):
        term = ad.mul(term, weight)
        return term if total is None else ad.add(total, term)

    if weights.adversarial > 0:
        term = adversarial_loss(batch, gen, disc, variant, prior_samples)
        total = accumulate(total, term, weights.adversarial)
    if weights.reconstruction > 0:
        total = accumulate(total, recon_loss(batch, gen, weights.norm_order), weights.reconstruction)
    if weights.discriminative > 0:
        total = accumulate(total, disc_loss(batch, gen, disc, weights.norm_order), weights.discriminative)
    if weights.encoding > 0:
        total = accumulate(total, enc_loss(batch, gen, weights.norm_order), weights.encoding)
    if total is None:
        raise ValueError("no active loss terms")
    return total
