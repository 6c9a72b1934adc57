"""Reverse-mode differentiation on dense float64 tensors.

The engine is deliberately small: exactly the primitives the adversarial,
reconstruction, discriminative, and encoding losses need.  Ops run eagerly
on numpy arrays; when a `Tape` is active they also append a record with
parent references, and `Tape.backward` replays those records in reverse to
accumulate gradients into leaf tensors.  With no active tape the same ops
are a plain (gradient-free) forward path, which is what scoring uses.

There is no broadcasting except scalar-with-tensor, and values are checked
finite on every tensor construction, so a NaN surfaces at the op that made
it instead of three modules later.
"""

import numbers

import numpy as np

from . import kernels as K
from .errors import GradientError, NonFiniteError, ShapeError

LOG_EPS = 1e-12

_TAPES = []


class Tensor:
    """Dense real array with an optional gradient slot."""

    __slots__ = ("values", "grad", "name")

    def __init__(self, values, name=None):
        # asarray with order="C" keeps 0-d shapes (ascontiguousarray would
        # promote them to 1-D) while still guaranteeing contiguity.
        arr = np.asarray(values, dtype=np.float64, order="C")
        if not np.all(np.isfinite(arr)):
            label = f" in {name!r}" if name else ""
            raise NonFiniteError(f"non-finite values{label} (shape {arr.shape})")
        self.values = arr
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.values.shape

    def item(self):
        return float(self.values)

    def zero_grad(self):
        self.grad = None

    def __float__(self):
        return float(self.values)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.values.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class _Record:
    __slots__ = ("out", "parents", "backward")

    def __init__(self, out, parents, backward):
        self.out = out
        self.parents = parents
        self.backward = backward


class Tape:
    """Ordered record of primitive ops, replayable in reverse.

    Records are appended in execution order, which is a valid topological
    order by construction, and the backward walk visits them strictly in
    reverse, so gradient accumulation is deterministic: replaying the same
    tape twice gives bitwise-identical gradients.
    """

    def __init__(self):
        self._records = []
        self._produced = set()

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPES.pop()
        assert popped is self
        return False

    def __len__(self):
        return len(self._records)

    def _emit(self, out, parents, backward):
        self._records.append(_Record(out, parents, backward))
        self._produced.add(id(out))

    def backward(self, loss, params=None):
        """Accumulate d(loss)/d(leaf) into the grad slot of every leaf.

        `params`, when given, additionally receive a zero gradient if they
        are unreachable from the loss through this tape.
        """
        if not isinstance(loss, Tensor):
            raise TypeError("loss must be a Tensor")
        if loss.values.shape != ():
            raise ShapeError(f"loss must be scalar, got shape {loss.values.shape}")
        if id(loss) not in self._produced:
            raise ValueError("loss was not produced under this tape")

        flows = {id(loss): np.ones((), dtype=np.float64)}
        holders = {id(loss): loss}
        for rec in reversed(self._records):
            g = flows.pop(id(rec.out), None)
            if g is None:
                continue
            holders.pop(id(rec.out), None)
            pgrads = rec.backward(g)
            for parent, pg in zip(rec.parents, pgrads):
                key = id(parent)
                if key in flows:
                    flows[key] = flows[key] + pg
                else:
                    flows[key] = pg
                    holders[key] = parent

        for key, flow in flows.items():
            leaf = holders[key]
            if leaf.grad is None:
                leaf.grad = flow.copy()
            else:
                leaf.grad = leaf.grad + flow

        if params is not None:
            for p in params:
                if p.grad is None:
                    p.grad = np.zeros_like(p.values)


def _as_tensor(x):
    if isinstance(x, Tensor):
        return x
    if isinstance(x, numbers.Real):
        return Tensor(np.asarray(x, dtype=np.float64))
    raise TypeError(f"expected Tensor or real number, got {type(x).__name__}")


def _emit(out, parents, backward):
    if _TAPES:
        _TAPES[-1]._emit(out, parents, backward)
    return out


def _check_binary_shapes(a, b, opname):
    # Equal shapes, or one side scalar; nothing else.
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} do not match")


def _unbroadcast(g, shape):
    if shape == () and np.shape(g) != ():
        return np.asarray(np.sum(g))
    return g


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary_shapes(a, b, "add")
    out = Tensor(a.values + b.values)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit(out, (a, b), backward)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary_shapes(a, b, "sub")
    out = Tensor(a.values - b.values)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _emit(out, (a, b), backward)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary_shapes(a, b, "mul")
    out = Tensor(a.values * b.values)

    def backward(g):
        return (
            _unbroadcast(g * b.values, a.shape),
            _unbroadcast(g * a.values, b.shape),
        )

    return _emit(out, (a, b), backward)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ShapeError("matmul expects 2-D tensors")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims {a.shape} x {b.shape} disagree")
    out = Tensor(a.values @ b.values)

    def backward(g):
        return g @ b.values.T, a.values.T @ g

    return _emit(out, (a, b), backward)


def add_bias(x, b):
    """Add a row vector b to every row of x (explicit, not implicit, broadcast)."""
    x, b = _as_tensor(x), _as_tensor(b)
    if x.values.ndim != 2 or b.values.ndim != 1 or x.shape[1] != b.shape[0]:
        raise ShapeError(f"add_bias: got {x.shape} and {b.shape}")
    out = Tensor(x.values + b.values)

    def backward(g):
        return g, g.sum(axis=0)

    return _emit(out, (x, b), backward)


def concat_cols(a, b):
    """Column-wise concatenation [a; b] of two batches with equal row counts."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_cols: got {a.shape} and {b.shape}")
    p = a.shape[1]
    out = Tensor(np.concatenate([a.values, b.values], axis=1))

    def backward(g):
        return g[:, :p], g[:, p:]

    return _emit(out, (a, b), backward)


def _ew_unary(x, fwd, make_backward):
    x = _as_tensor(x)
    flat = x.values.ravel()
    out_flat = fwd(flat)
    out = Tensor(out_flat.reshape(x.values.shape))
    bwd = make_backward(x, flat, out_flat)

    def backward(g):
        return (bwd(np.ascontiguousarray(g).ravel()).reshape(x.values.shape),)

    return _emit(out, (x,), backward)


def relu(x):
    return leaky_relu(x, 0.0)


def leaky_relu(x, slope=0.2):
    return _ew_unary(
        x,
        lambda f: K.leaky_relu_fwd(f, slope),
        lambda x_, f, o: lambda g: K.leaky_relu_bwd(f, g, slope),
    )


def sigmoid(x):
    return _ew_unary(
        x,
        K.sigmoid_fwd,
        lambda x_, f, o: lambda g: K.sigmoid_bwd(o, g),
    )


def tanh(x):
    return _ew_unary(
        x,
        K.tanh_fwd,
        lambda x_, f, o: lambda g: K.tanh_bwd(o, g),
    )


def log(x):
    """Natural log with the argument clamped to >= LOG_EPS before evaluation."""
    return _ew_unary(
        x,
        lambda f: K.log_clamped_fwd(f, LOG_EPS),
        lambda x_, f, o: lambda g: K.log_clamped_bwd(f, g, LOG_EPS),
    )


def absolute(x):
    return _ew_unary(
        x,
        K.abs_fwd,
        lambda x_, f, o: lambda g: K.abs_bwd(f, g),
    )


def power(x, p):
    p = float(p)
    return _ew_unary(
        x,
        lambda f: K.pow_fwd(f, p),
        lambda x_, f, o: lambda g: K.pow_bwd(f, g, p),
    )


def reshape(x, shape):
    x = _as_tensor(x)
    out = Tensor(x.values.reshape(shape))

    def backward(g):
        return (np.ascontiguousarray(g).reshape(x.values.shape),)

    return _emit(out, (x,), backward)


def tensor_sum(x):
    x = _as_tensor(x)
    if x.values.size == 0:
        raise ShapeError("sum of an empty tensor")
    out = Tensor(np.asarray(np.sum(x.values)))

    def backward(g):
        return (np.full(x.values.shape, g),)

    return _emit(out, (x,), backward)


def tensor_mean(x):
    x = _as_tensor(x)
    if x.values.size == 0:
        raise ShapeError("mean of an empty tensor")
    n = x.values.size
    out = Tensor(np.asarray(np.sum(x.values) / n))

    def backward(g):
        return (np.full(x.values.shape, g / n),)

    return _emit(out, (x,), backward)


def lp_power_norm(x, ell):
    """Sum_i |x_i|^ell over all entries, for ell in {1, 2}.

    For ell=1 the subgradient at 0 is taken as 0.
    """
    if ell not in (1, 2):
        raise ValueError(f"ell must be 1 or 2, got {ell!r}")
    x = _as_tensor(x)
    flat = x.values.ravel()
    out = Tensor(np.asarray(K.lp_power(flat, ell)))

    def backward(g):
        return (K.lp_power_grad(flat, float(g), ell).reshape(x.values.shape),)

    return _emit(out, (x,), backward)


def finite_difference_grad(f, x, h=1e-5):
    """Central-difference gradient of a scalar function f at tensor x.

    Independent of the tape machinery on purpose: this is the oracle the
    backward pass is checked against.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    work = x.values.copy()
    wflat = work.ravel()
    out = np.empty_like(wflat)
    for idx in range(wflat.size):
        orig = wflat[idx]
        wflat[idx] = orig + h
        fp = float(f(Tensor(work)))
        wflat[idx] = orig - h
        fm = float(f(Tensor(work)))
        wflat[idx] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError(f"non-finite f evaluation near coordinate {idx}")
        out[idx] = (fp - fm) / (2.0 * h)
    return out.reshape(x.values.shape)


class Adam:
    """Adam with bias correction; moments live in flat per-parameter buffers."""

    def __init__(self, params, lr, beta1=0.5, beta2=0.999, eps=1e-8):
        self.params = list(params)
        if lr < 0:
            raise ValueError("learning rate must be nonnegative")
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ValueError("betas must lie in (0, 1)")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = [np.zeros(p.values.size) for p in self.params]
        self.v = [np.zeros(p.values.size) for p in self.params]

    def step(self):
        self.step_count += 1
        for k, p in enumerate(self.params):
            if p.grad is None:
                raise GradientError(f"missing gradient for {p!r}")
            if p.grad.shape != p.values.shape:
                raise GradientError(f"gradient shape mismatch for {p!r}")
            g = np.ascontiguousarray(p.grad).ravel()
            if not np.all(np.isfinite(g)):
                raise GradientError(f"non-finite gradient for {p!r} at step {self.step_count}")
            K.adam_update(
                p.values.ravel(), g, self.m[k], self.v[k],
                self.lr, self.beta1, self.beta2, self.eps, self.step_count,
            )

    def zero_grad(self):
        for p in self.params:
            p.grad = None
