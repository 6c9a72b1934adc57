"""Optimal-critic analysis: closed form, LP oracle, and equivalence checks.

The unconstrained 1-Lipschitz critic maximizing (mean over training points)
minus (weighted mean over generator-support points) is pinned down, on the
support, by its values at the training points: D(x) = max_i (v_i - ||x - x_i||).
This module carries both that closed form and an independent oracle that
solves the discretized objective directly as a linear program over all
pairwise Lipschitz constraints, so the two routes can be checked against
each other on random instances.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import kernels as K
from .errors import DataError, OracleError, ShapeError

NORMS = ("l1", "l2")
LIPSCHITZ_CONSISTENCY_TOL = 1e-9
MAX_ORACLE_POINTS = 200


def _norm_code(norm):
    if norm not in NORMS:
        raise DataError(f"norm must be one of {NORMS}, got {norm!r}")
    return 1 if norm == "l1" else 2


def _as_points(arr, name):
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ShapeError(f"{name} must be a nonempty point matrix")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


@dataclass
class CriticInstance:
    """Training points with critic values, plus a weighted support grid."""

    train_points: np.ndarray
    train_values: np.ndarray
    support_points: np.ndarray
    support_weights: np.ndarray
    norm: str = "l2"

    def __post_init__(self):
        self.train_points = _as_points(self.train_points, "training points")
        self.support_points = _as_points(self.support_points, "support points")
        self.train_values = np.ascontiguousarray(self.train_values, dtype=np.float64)
        self.support_weights = np.ascontiguousarray(self.support_weights, dtype=np.float64)
        code = _norm_code(self.norm)
        if self.train_points.shape[1] != self.support_points.shape[1]:
            raise ShapeError("training and support points must share a dimension")
        if self.train_values.shape != (self.train_points.shape[0],):
            raise ShapeError("one training value per training point required")
        if self.support_weights.shape != (self.support_points.shape[0],):
            raise ShapeError("one weight per support point required")
        if not np.all(np.isfinite(self.train_values)):
            raise DataError("training values contain non-finite entries")
        if np.any(self.support_weights < 0):
            raise DataError("support weights must be nonnegative")
        if abs(float(np.sum(self.support_weights)) - 1.0) > 1e-9:
            raise DataError("support weights must sum to 1")
        excess, a, b = K.lipschitz_max_excess(self.train_points, self.train_values, code)
        if excess > LIPSCHITZ_CONSISTENCY_TOL:
            raise DataError(
                "training values are not 1-Lipschitz consistent: "
                f"|v[{a}] - v[{b}]| exceeds the point distance by {excess:.3e}"
            )

    @property
    def n_train(self):
        return self.train_points.shape[0]

    @property
    def n_support(self):
        return self.support_points.shape[0]

    @property
    def dim(self):
        return self.train_points.shape[1]

    def all_points(self):
        return np.vstack([self.train_points, self.support_points])

    def to_dict(self):
        return {
            "norm": self.norm,
            "train_points": self.train_points.tolist(),
            "train_values": self.train_values.tolist(),
            "support_points": self.support_points.tolist(),
            "support_weights": self.support_weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(
                train_points=np.asarray(d["train_points"]),
                train_values=np.asarray(d["train_values"]),
                support_points=np.asarray(d["support_points"]),
                support_weights=np.asarray(d["support_weights"]),
                norm=d["norm"],
            )
        except KeyError as exc:
            raise DataError(f"instance record is missing field {exc}") from exc

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            try:
                record = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: not a valid instance file: {exc}") from exc
        return cls.from_dict(record)


@dataclass
class CriticFunction:
    """A critic known only by its values on a finite point set."""

    points: np.ndarray
    values: np.ndarray
    norm: str = "l2"

    def __post_init__(self):
        self.points = _as_points(self.points, "points")
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        _norm_code(self.norm)
        if self.values.shape != (self.points.shape[0],):
            raise ShapeError("one value per point required")


def closed_form_critic(x, train_points, train_values, norm="l2"):
    """max_i (v_i - ||x - x_i||) for a point or batch of points."""
    code = _norm_code(norm)
    train_points = _as_points(train_points, "training points")
    train_values = np.ascontiguousarray(train_values, dtype=np.float64)
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim <= 1 and train_points.shape[1] >= 1 and arr.size == train_points.shape[1]
    pts = arr.reshape(1, -1) if single else _as_points(arr, "query points")
    if pts.shape[1] != train_points.shape[1]:
        raise ShapeError("query dimension does not match the training points")
    out = K.closed_form_eval(np.ascontiguousarray(pts), train_points, train_values, code)
    return float(out[0]) if single else out


def critic_objective(instance, values):
    """Discretized critic objective: mean over training values minus the
    weighted sum over support values, for a function given on X then S."""
    values = np.asarray(values, dtype=np.float64)
    n = instance.n_train
    if values.shape != (n + instance.n_support,):
        raise ShapeError("values must cover training then support points")
    return float(np.mean(values[:n]) - np.dot(instance.support_weights, values[n:]))


def _pairwise_constraints(points, code):
    """Sparse A, b with rows D_p - D_q <= dist(p, q) for all ordered pairs."""
    n = points.shape[0]
    dist = K.pairwise_dist(points, points, code)
    iu, ju = np.triu_indices(n, k=1)
    n_pairs = iu.size
    rows = np.repeat(np.arange(2 * n_pairs), 2)
    cols = np.concatenate([np.column_stack([iu, ju]).ravel(),
                           np.column_stack([ju, iu]).ravel()])
    vals = np.tile([1.0, -1.0], 2 * n_pairs)
    a_ub = sparse.csr_matrix((vals, (rows, cols)), shape=(2 * n_pairs, n))
    b_ub = np.concatenate([dist[iu, ju], dist[iu, ju]])
    return a_ub, b_ub


def oracle_optimal_critic(instance):
    """Maximize the discretized objective over all pairwise 1-Lipschitz
    constraints on X union S, independently of the closed form.

    The objective is invariant under adding a constant, so the solution is
    anchored to mean-zero over the training points.
    """
    points = instance.all_points()
    if points.shape[0] > MAX_ORACLE_POINTS:
        raise OracleError(
            f"oracle limited to {MAX_ORACLE_POINTS} points, got {points.shape[0]}"
        )
    code = _norm_code(instance.norm)
    n, m = instance.n_train, instance.n_support
    c = np.concatenate([np.full(n, 1.0 / n), -instance.support_weights])
    a_ub, b_ub = _pairwise_constraints(points, code)
    anchor = np.concatenate([np.ones(n), np.zeros(m)])
    result = linprog(
        -c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=anchor[None, :],
        b_eq=np.zeros(1),
        bounds=(None, None),
        method="highs",
    )
    if not result.success:
        raise OracleError(f"linear program failed: {result.message}")
    return CriticFunction(points, result.x, instance.norm)


def random_lipschitz_extension(instance, rng):
    """A feasible 1-Lipschitz function pinned to the training values.

    Solves the same constraint system under a random objective; useful for
    checking that the closed form is the pointwise-minimal extension.
    """
    points = instance.all_points()
    code = _norm_code(instance.norm)
    n, m = instance.n_train, instance.n_support
    a_ub, b_ub = _pairwise_constraints(points, code)
    a_eq = sparse.hstack(
        [sparse.identity(n, format="csr"), sparse.csr_matrix((n, m))], format="csr"
    )
    result = linprog(
        rng.normal(size=n + m),
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=instance.train_values,
        bounds=(None, None),
        method="highs",
    )
    if not result.success:
        raise OracleError(f"extension program failed: {result.message}")
    return CriticFunction(points, result.x, instance.norm)


@dataclass
class LipschitzCheck:
    passed: bool
    max_excess: float
    worst_pair: tuple


def verify_lipschitz(fn, tol=1e-9):
    """Exhaustive pairwise check of |f(a) - f(b)| <= ||a - b|| + tol."""
    code = _norm_code(fn.norm)
    excess, i, j = K.lipschitz_max_excess(fn.points, fn.values, code)
    return LipschitzCheck(passed=excess <= tol, max_excess=float(excess), worst_pair=(i, j))


@dataclass
class TheoremReport:
    """Oracle-vs-closed-form comparison on the support points."""

    max_deviation: float
    tol: float
    lipschitz_excess: float
    lipschitz_tol: float
    objective: float
    norm: str
    n_train: int
    n_support: int

    @property
    def passed(self):
        return (
            self.max_deviation <= self.tol
            and self.lipschitz_excess <= self.lipschitz_tol
        )

    def to_text(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"optimal-critic form check: {status}\n"
            f"  norm: {self.norm}  training points: {self.n_train}"
            f"  support points: {self.n_support}\n"
            f"  max |oracle - closed form| on support: {self.max_deviation:.3e}"
            f" (tol {self.tol:.1e})\n"
            f"  oracle Lipschitz excess: {self.lipschitz_excess:.3e}"
            f" (tol {self.lipschitz_tol:.1e})\n"
            f"  oracle objective: {self.objective:.12g}\n"
        )


def check_theorem(instance, tol=1e-3, lipschitz_tol=1e-6):
    """Solve the oracle, rebuild the closed form from the oracle's own
    training values, and compare the two on every support point."""
    fn = oracle_optimal_critic(instance)
    n = instance.n_train
    oracle_support = fn.values[n:]
    closed = closed_form_critic(
        instance.support_points, instance.train_points, fn.values[:n], instance.norm
    )
    check = verify_lipschitz(fn, tol=lipschitz_tol)
    return TheoremReport(
        max_deviation=float(np.max(np.abs(oracle_support - closed))),
        tol=tol,
        lipschitz_excess=check.max_excess,
        lipschitz_tol=lipschitz_tol,
        objective=critic_objective(instance, fn.values),
        norm=instance.norm,
        n_train=n,
        n_support=instance.n_support,
    )


def random_instance(n_train, n_support, dim, norm="l2", seed=0):
    """Random valid instance: box-sampled points, Lipschitz-shrunk values,
    strictly positive Dirichlet support weights."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    code = _norm_code(norm)
    x = rng.uniform(-1.0, 1.0, size=(n_train, dim))
    raw = rng.uniform(-1.0, 1.0, size=n_train)
    scale = 1.0
    if n_train > 1:
        dist = K.pairwise_dist(x, x, code)
        gaps = np.abs(raw[:, None] - raw[None, :])
        iu = np.triu_indices(n_train, k=1)
        with np.errstate(divide="ignore"):
            ratios = dist[iu] / np.where(gaps[iu] > 0, gaps[iu], np.inf)
        scale = min(1.0, 0.9 * float(np.min(ratios)))
    s = rng.uniform(-1.5, 1.5, size=(n_support, dim))
    # Mix the Dirichlet draw with a uniform floor: weights stay random but
    # never fall to the LP solver's tolerance scale, where a support value
    # would be numerically unconstrained.
    w = 0.95 * rng.dirichlet(np.ones(n_support)) + 0.05 / n_support
    return CriticInstance(x, raw * scale, s, w, norm)


def closed_form_grid(instance, values=None, resolution=40):
    """(point, closed-form value) rows over a bounding grid, for plotting.

    Only 1-D and 2-D instances are supported; `values` defaults to the
    instance's training values.
    """
    if instance.dim > 2:
        raise DataError("plot grids are only available for 1-D and 2-D instances")
    values = instance.train_values if values is None else np.asarray(values, dtype=np.float64)
    pts = instance.all_points()
    lo, hi = pts.min(axis=0) - 0.5, pts.max(axis=0) + 0.5
    axes = [np.linspace(lo[k], hi[k], resolution) for k in range(instance.dim)]
    if instance.dim == 1:
        grid = axes[0][:, None]
    else:
        xx, yy = np.meshgrid(axes[0], axes[1])
        grid = np.column_stack([xx.ravel(), yy.ravel()])
    vals = closed_form_critic(grid, instance.train_points, values, instance.norm)
    return np.column_stack([grid, vals])
