"""MLP building blocks: encoder/decoder generators and discriminators.

All forward passes run on 2-D batches (rows are samples) through the
autodiff ops, so the same code serves training (under a tape) and scoring
(without one).  Discriminators expose the activation vector of their last
hidden layer next to the scalar output; the output is an affine map of that
vector followed by the output activation.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError, VariantError

HIDDEN_ACTIVATIONS = ("leaky_relu", "relu", "tanh")
OUTPUT_ACTIVATIONS = ("identity", "sigmoid", "tanh")

# GAN type of a discriminator: "gan" and "wgan" read a sample, "bigan" reads
# a sample concatenated with its encoding; "wgan" is the unconstrained critic.
DISCRIMINATOR_KINDS = ("gan", "wgan", "bigan")


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths (input, hidden..., output) plus activation choices."""

    widths: tuple
    hidden_activation: str = "leaky_relu"
    leaky_slope: float = 0.2
    output_activation: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 3:
            raise ShapeError("an MLP needs at least one hidden layer")
        if any(w < 1 for w in self.widths):
            raise ShapeError(f"layer widths must be >= 1, got {self.widths}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    def to_dict(self):
        return {
            "widths": list(self.widths),
            "hidden_activation": self.hidden_activation,
            "leaky_slope": self.leaky_slope,
            "output_activation": self.output_activation,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            widths=tuple(d["widths"]),
            hidden_activation=d["hidden_activation"],
            leaky_slope=d["leaky_slope"],
            output_activation=d["output_activation"],
        )


def _glorot_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Mlp:
    """Stack of affine layers; weights Glorot-uniform, biases zero."""

    def __init__(self, spec, rng, name="mlp"):
        self.spec = spec
        self.name = name
        self.weights = []
        self.biases = []
        for layer, (fan_in, fan_out) in enumerate(zip(spec.widths, spec.widths[1:])):
            self.weights.append(
                Tensor(_glorot_uniform(rng, fan_in, fan_out), name=f"{name}.W{layer}")
            )
            self.biases.append(
                Tensor(np.zeros(fan_out), name=f"{name}.b{layer}")
            )

    @classmethod
    def from_arrays(cls, spec, arrays, name="mlp"):
        """Rebuild an Mlp from the flat parameter list `parameters()` produces."""
        mlp = cls.__new__(cls)
        mlp.spec = spec
        mlp.name = name
        mlp.weights = []
        mlp.biases = []
        expected = [(a, b) for a, b in zip(spec.widths, spec.widths[1:])]
        if len(arrays) != 2 * len(expected):
            raise ShapeError(f"{name}: expected {2 * len(expected)} arrays, got {len(arrays)}")
        for layer, (fan_in, fan_out) in enumerate(expected):
            w, b = arrays[2 * layer], arrays[2 * layer + 1]
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ShapeError(f"{name}: layer {layer} array shapes do not match spec")
            mlp.weights.append(Tensor(np.array(w, dtype=np.float64), name=f"{name}.W{layer}"))
            mlp.biases.append(Tensor(np.array(b, dtype=np.float64), name=f"{name}.b{layer}"))
        return mlp

    @property
    def in_width(self):
        return self.spec.widths[0]

    @property
    def out_width(self):
        return self.spec.widths[-1]

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def parameter_count(self):
        return sum(p.values.size for p in self.parameters())

    def _hidden_act(self, x):
        if self.spec.hidden_activation == "leaky_relu":
            return ad.leaky_relu(x, self.spec.leaky_slope)
        if self.spec.hidden_activation == "relu":
            return ad.relu(x)
        return ad.tanh(x)

    def _output_act(self, x):
        if self.spec.output_activation == "identity":
            return x
        if self.spec.output_activation == "sigmoid":
            return ad.sigmoid(x)
        return ad.tanh(x)

    def _check_input(self, x):
        if not isinstance(x, Tensor):
            raise TypeError("forward expects a Tensor")
        if x.values.ndim != 2 or x.shape[1] != self.in_width:
            raise ShapeError(
                f"{self.name}: expected (n, {self.in_width}) input, got {x.shape}"
            )

    def forward(self, x):
        out, _ = self.forward_with_hidden(x)
        return out

    def forward_with_hidden(self, x):
        """Returns (output, last hidden activation)."""
        self._check_input(x)
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = self._hidden_act(ad.add_bias(ad.matmul(h, w), b))
        out = self._output_act(ad.add_bias(ad.matmul(h, self.weights[-1]), self.biases[-1]))
        return out, h


@dataclass
class GeneratorBundle:
    """Encoder-decoder pair; GANomaly-style bundles carry a second encoder."""

    encoder: Mlp
    decoder: Mlp
    second_encoder: Mlp = None

    def __post_init__(self):
        if self.encoder.out_width != self.decoder.in_width:
            raise ShapeError("encoder output width must equal decoder input width")
        if self.encoder.in_width != self.decoder.out_width:
            raise ShapeError("decoder must map back to the sample width")
        if self.second_encoder is not None:
            if self.second_encoder.spec != self.encoder.spec:
                raise ShapeError("second encoder must share the encoder spec")

    @property
    def data_width(self):
        return self.encoder.in_width

    @property
    def encoding_width(self):
        return self.encoder.out_width

    def encode(self, x):
        return self.encoder.forward(x)

    def encode_second(self, x):
        if self.second_encoder is None:
            raise VariantError("this generator has no second encoder")
        return self.second_encoder.forward(x)

    def decode(self, z):
        return self.decoder.forward(z)

    def reconstruct(self, x):
        return self.decode(self.encode(x))

    def parameters(self):
        out = self.encoder.parameters() + self.decoder.parameters()
        if self.second_encoder is not None:
            out += self.second_encoder.parameters()
        return out


@dataclass
class DiscriminatorBundle:
    """Scalar-output MLP exposing its last hidden activation vector."""

    mlp: Mlp
    kind: str = "gan"

    def __post_init__(self):
        if self.kind not in DISCRIMINATOR_KINDS:
            raise VariantError(f"unknown discriminator kind {self.kind!r}")
        if self.mlp.out_width != 1:
            raise ShapeError("discriminator output width must be 1")
        expected_act = "identity" if self.kind == "wgan" else "sigmoid"
        if self.mlp.spec.output_activation != expected_act:
            raise VariantError(
                f"{self.kind} discriminator needs {expected_act!r} output activation,"
                f" got {self.mlp.spec.output_activation!r}"
            )

    @property
    def in_width(self):
        return self.mlp.in_width

    @property
    def hidden_width(self):
        return self.mlp.spec.widths[-2]

    def discriminate(self, x):
        """Returns (u, h): scalar output column and last hidden activations."""
        return self.mlp.forward_with_hidden(x)

    def parameters(self):
        return self.mlp.parameters()


def concat_sample_encoding(x, z):
    """Concatenate a sample with its encoding, sample first.

    Accepts matching 1-D tensors (single sample) or 2-D batches with equal
    row counts.
    """
    if not isinstance(x, Tensor) or not isinstance(z, Tensor):
        raise TypeError("concat_sample_encoding expects Tensors")
    if x.values.ndim == 1 and z.values.ndim == 1:
        joined = ad.concat_cols(
            ad.reshape(x, (1, -1)), ad.reshape(z, (1, -1))
        )
        return ad.reshape(joined, (-1,))
    if x.values.ndim == 2 and z.values.ndim == 2:
        return ad.concat_cols(x, z)
    raise ShapeError(f"cannot concatenate shapes {x.shape} and {z.shape}")


def as_batch(x, width=None):
    """Lift a 1-D sample or 2-D matrix into a batch Tensor."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeError(f"expected 1-D or 2-D data, got shape {arr.shape}")
    if width is not None and arr.shape[1] != width:
        raise ShapeError(f"expected width {width}, got {arr.shape[1]}")
    return Tensor(arr)
