"""Differentiation engine checks against independent oracles.

Matrix products are compared to a naive triple loop, activations to
high-precision mpmath evaluations, and every backward rule to central
finite differences.  The Adam recursion is replayed with plain Python
floats as a reference.
"""

import math

import mpmath
import numpy as np
import pytest

import ganens.autodiff as ad
from ganens.autodiff import Adam, Tape, Tensor, finite_difference_grad
from ganens.errors import GradientError, NonFiniteError, ShapeError


def rel_err(a, b):
    denom = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8)
    return np.max(np.abs(a - b)) / denom


def grad_of(build, x, params=None):
    with Tape() as tape:
        loss = build(x)
    tape.backward(loss, params=params)
    return x.grad


class TestTensor:
    def test_rejects_non_finite(self):
        with pytest.raises(NonFiniteError):
            Tensor([1.0, np.nan])
        with pytest.raises(NonFiniteError):
            Tensor([np.inf])

    def test_scalar_shape_preserved(self):
        assert Tensor(3.5).shape == ()
        assert Tensor(np.asarray(2.0)).item() == 2.0


class TestMatmul:
    def test_identity(self):
        out = ad.matmul(Tensor([[1.0, 0.0], [0.0, 1.0]]), Tensor([[3.0], [4.0]]))
        np.testing.assert_array_equal(out.values, [[3.0], [4.0]])

    def test_one_by_one(self):
        assert ad.matmul(Tensor([[2.0]]), Tensor([[3.0]])).values[0, 0] == 6.0

    def test_against_triple_loop(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(-2, 2, size=(3, 4))
        b = rng.uniform(-2, 2, size=(4, 2))
        expect = np.zeros((3, 2))
        for i in range(3):
            for j in range(2):
                for k in range(4):
                    expect[i, j] += a[i, k] * b[k, j]
        out = ad.matmul(Tensor(a), Tensor(b))
        assert np.max(np.abs(out.values - expect)) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            ad.matmul(Tensor([[1.0, 2.0]]), Tensor([[1.0, 2.0]]))


class TestElementwise:
    def test_sigmoid_at_zero(self):
        assert ad.sigmoid(Tensor([0.0])).values[0] == 0.5

    def test_relu(self):
        out = ad.relu(Tensor([-3.0, 3.0]))
        np.testing.assert_array_equal(out.values, [0.0, 3.0])

    def test_tanh_against_mpmath(self):
        mpmath.mp.dps = 30
        rng = np.random.default_rng(7)
        x = rng.uniform(-4, 4, size=50)
        expect = np.array([float(mpmath.tanh(v)) for v in x])
        out = ad.tanh(Tensor(x))
        np.testing.assert_allclose(out.values, expect, rtol=1e-12, atol=1e-15)

    def test_binary_shape_mismatch(self):
        with pytest.raises(ShapeError):
            ad.add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))

    def test_scalar_broadcast_allowed(self):
        out = ad.sub(1.0, Tensor([[0.25, 0.5]]))
        np.testing.assert_array_equal(out.values, [[0.75, 0.5]])

    def test_log_clamps_instead_of_diverging(self):
        out = ad.log(Tensor([0.0, 1.0]))
        assert out.values[0] == math.log(ad.LOG_EPS)
        assert out.values[1] == 0.0


class TestReduce:
    def test_sum(self):
        assert ad.tensor_sum(Tensor([1.0, 2.0, 3.0])).item() == 6.0

    def test_mean(self):
        assert ad.tensor_mean(Tensor([2.0, 4.0])).item() == 3.0

    def test_sum_equals_mean_times_count(self):
        rng = np.random.default_rng(5)
        x = Tensor(rng.uniform(-2, 2, size=17))
        assert ad.tensor_sum(x).item() == pytest.approx(17 * ad.tensor_mean(x).item(), rel=1e-14)

    def test_empty_rejected(self):
        with pytest.raises(ShapeError):
            ad.tensor_sum(Tensor(np.empty(0)))


class TestLpPowerNorm:
    def test_l2(self):
        assert ad.lp_power_norm(Tensor([3.0, 4.0]), 2).item() == 25.0

    def test_l1(self):
        assert ad.lp_power_norm(Tensor([3.0, -4.0]), 1).item() == 7.0

    def test_zero_vector(self):
        for ell in (1, 2):
            assert ad.lp_power_norm(Tensor(np.zeros(4)), ell).item() == 0.0

    def test_unsupported_order(self):
        with pytest.raises(ValueError):
            ad.lp_power_norm(Tensor([1.0]), 3)

    def test_matches_quadratic_form(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(-2, 2, size=9)
        direct = ad.lp_power_norm(Tensor(x), 2).item()
        quad = ad.matmul(Tensor(x[None, :]), Tensor(x[:, None])).values[0, 0]
        assert abs(direct - quad) < 1e-12


class TestBackward:
    def test_sum_of_squares(self):
        x = Tensor([1.0, 2.0])
        grad = grad_of(lambda t: ad.lp_power_norm(t, 2), x)
        np.testing.assert_array_equal(grad, [2.0, 4.0])

    def test_constant_loss_gives_zero_grad(self):
        x = Tensor([1.0, 2.0])
        c = Tensor(5.0)
        with Tape() as tape:
            loss = ad.mul(c, 2.0)
        tape.backward(loss, params=[x])
        np.testing.assert_array_equal(x.grad, [0.0, 0.0])

    def test_two_layer_mlp_against_finite_differences(self):
        rng = np.random.default_rng(11)
        w1 = Tensor(rng.uniform(-1, 1, size=(3, 4)))
        b1 = Tensor(rng.uniform(-1, 1, size=4))
        w2 = Tensor(rng.uniform(-1, 1, size=(4, 1)))
        b2 = Tensor(rng.uniform(-1, 1, size=1))
        x = rng.uniform(-2, 2, size=(5, 3))

        def loss_from(params):
            def run(_):
                h = ad.tanh(ad.add_bias(ad.matmul(Tensor(x), params[0]), params[1]))
                out = ad.sigmoid(ad.add_bias(ad.matmul(h, params[2]), params[3]))
                return ad.tensor_mean(out)
            return run

        params = [w1, b1, w2, b2]
        with Tape() as tape:
            loss = loss_from(params)(None)
        tape.backward(loss, params=params)
        for idx, p in enumerate(params):
            def f(t, idx=idx):
                trial = list(params)
                trial[idx] = t
                return loss_from(trial)(None)
            fd = finite_difference_grad(f, p, h=1e-5)
            assert rel_err(p.grad, fd) < 1e-4

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0])
        with Tape() as tape:
            y = ad.mul(x, 2.0)
        with pytest.raises(ShapeError):
            tape.backward(y)

    def test_loss_from_other_tape_rejected(self):
        x = Tensor([1.0])
        with Tape():
            y = ad.tensor_sum(x)
        with pytest.raises(ValueError):
            Tape().backward(y)

    def test_replay_is_bitwise_identical(self):
        rng = np.random.default_rng(23)
        w = Tensor(rng.uniform(-1, 1, size=(4, 4)))
        x = Tensor(rng.uniform(-1, 1, size=(2, 4)))
        with Tape() as tape:
            loss = ad.tensor_mean(ad.sigmoid(ad.matmul(x, w)))
        tape.backward(loss, params=[w])
        first = w.grad.copy()
        w.zero_grad()
        tape.backward(loss, params=[w])
        np.testing.assert_array_equal(first, w.grad)

    def test_gradients_are_linear_in_the_loss(self):
        rng = np.random.default_rng(29)
        w = Tensor(rng.uniform(-1, 1, size=(3, 2)))
        x = Tensor(rng.uniform(-1, 1, size=(4, 3)))
        with Tape() as tape:
            l1 = ad.tensor_mean(ad.tanh(ad.matmul(x, w)))
            l2 = ad.lp_power_norm(ad.matmul(x, w), 2)
            total = ad.add(l1, l2)
        tape.backward(total, params=[w])
        combined = w.grad.copy()
        w.zero_grad()
        tape.backward(l1, params=[w])
        tape.backward(l2, params=[w])
        np.testing.assert_allclose(w.grad, combined, rtol=1e-12, atol=1e-15)


class TestFiniteDifferenceOracle:
    def test_quadratic(self):
        grad = finite_difference_grad(lambda t: ad.lp_power_norm(t, 2), Tensor([1.0]), h=1e-5)
        assert abs(grad[0] - 2.0) < 1e-6

    def test_constant(self):
        grad = finite_difference_grad(lambda t: Tensor(3.0), Tensor([1.0, 2.0]), h=1e-5)
        np.testing.assert_array_equal(grad, [0.0, 0.0])

    def test_sigmoid_dot_self_consistency(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            x_val = rng.uniform(-2, 2, size=(1, 6))
            w = Tensor(rng.uniform(-1, 1, size=(6, 1)))

            def f(t):
                return ad.tensor_mean(ad.sigmoid(ad.matmul(Tensor(x_val), t)))

            with Tape() as tape:
                loss = f(w)
            tape.backward(loss, params=[w])
            fd = finite_difference_grad(f, w, h=1e-5)
            assert rel_err(w.grad, fd) < 1e-4


def _adam_reference_scalar(grads, lr, b1=0.5, b2=0.999, eps=1e-8, w0=0.0):
    """Textbook Adam recursion on one scalar, plain Python floats."""
    w, m, v = w0, 0.0, 0.0
    history = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        w -= lr * m_hat / (math.sqrt(v_hat) + eps)
        history.append(w)
    return history


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        p = Tensor([1.0, -2.0])
        opt = Adam([p], lr=0.1)
        before = p.values.copy()
        for _ in range(5):
            p.grad = np.zeros(2)
            opt.step()
        np.testing.assert_array_equal(p.values, before)
        assert np.all(opt.m[0] == 0.0) and np.all(opt.v[0] == 0.0)

    def test_first_step_is_signed_lr(self):
        p = Tensor([0.0, 0.0])
        opt = Adam([p], lr=0.01)
        p.grad = np.array([3.0, -0.5])
        opt.step()
        # After bias correction the first update is -lr * g / (|g| + eps).
        np.testing.assert_allclose(p.values, [-0.01, 0.01], rtol=1e-6)

    def test_quadratic_convergence_matches_reference(self):
        p = Tensor([0.0])
        opt = Adam([p], lr=0.1)
        ref_grads = []
        w_ref = 0.0
        trajectory = []
        for _ in range(200):
            g = 2.0 * (p.values[0] - 3.0)
            p.grad = np.array([g])
            opt.step()
            trajectory.append(p.values[0])
        assert abs(p.values[0] - 3.0) < 0.05
        # Replay the same recursion with plain floats, feeding the gradient
        # of the quadratic at the reference iterate.
        w, m, v = 0.0, 0.0, 0.0
        for t in range(1, 201):
            g = 2.0 * (w - 3.0)
            m = 0.5 * m + 0.5 * g
            v = 0.999 * v + 0.001 * g * g
            w -= 0.1 * (m / (1 - 0.5 ** t)) / (math.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        np.testing.assert_allclose(p.values[0], w, rtol=1e-10)

    def test_reference_recursion_agrees_on_fixed_gradients(self):
        rng = np.random.default_rng(41)
        grads = rng.uniform(-1, 1, size=50)
        p = Tensor([0.25])
        opt = Adam([p], lr=0.05)
        mine = []
        for g in grads:
            p.grad = np.array([g])
            opt.step()
            mine.append(p.values[0])
        ref = _adam_reference_scalar(grads, lr=0.05, w0=0.25)
        np.testing.assert_allclose(mine, ref, rtol=1e-12)

    def test_nan_gradient_aborts(self):
        p = Tensor([1.0])
        opt = Adam([p], lr=0.1)
        p.grad = np.array([np.nan])
        with pytest.raises(GradientError):
            opt.step()


UNARY_CASES = [
    ("leaky_relu", lambda t: ad.leaky_relu(t, 0.2), (-2.0, 2.0), 0.05),
    ("relu", ad.relu, (-2.0, 2.0), 0.05),
    ("sigmoid", ad.sigmoid, (-2.0, 2.0), None),
    ("tanh", ad.tanh, (-2.0, 2.0), None),
    ("log", ad.log, (0.5, 2.0), None),
    ("abs", ad.absolute, (-2.0, 2.0), 0.05),
    ("pow2", lambda t: ad.power(t, 2.0), (-2.0, 2.0), None),
    ("pow3", lambda t: ad.power(t, 3.0), (0.2, 2.0), None),
    ("lp1", lambda t: ad.lp_power_norm(t, 1), (-2.0, 2.0), 0.05),
    ("lp2", lambda t: ad.lp_power_norm(t, 2), (-2.0, 2.0), None),
]


@pytest.mark.parametrize("name,op,box,kink_gap", UNARY_CASES, ids=[c[0] for c in UNARY_CASES])
def test_primitive_gradients_match_finite_differences(name, op, box, kink_gap):
    """>= 10 seeds per primitive, >= 100 checks across the table."""
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        x_val = rng.uniform(box[0], box[1], size=7)
        if kink_gap:
            # Keep samples away from the nondifferentiable point.
            x_val = np.where(np.abs(x_val) < kink_gap, kink_gap, x_val)
        weights = rng.uniform(-1, 1, size=7)

        def f(t):
            out = op(t)
            if out.shape == ():
                return out
            return ad.tensor_sum(ad.mul(out, Tensor(weights)))

        x = Tensor(x_val)
        with Tape() as tape:
            loss = f(x)
        tape.backward(loss)
        fd = finite_difference_grad(f, x, h=1e-5)
        assert rel_err(x.grad, fd) < 1e-4, f"{name} seed {seed}"


def test_binary_gradients_match_finite_differences():
    for seed in range(10):
        rng = np.random.default_rng(300 + seed)
        a = Tensor(rng.uniform(-2, 2, size=(2, 3)))
        b_val = rng.uniform(-2, 2, size=(2, 3))
        r = Tensor(rng.uniform(-1, 1, size=(2, 3)))
        for op in (ad.add, ad.sub, ad.mul):
            def f(t):
                return ad.tensor_sum(ad.mul(op(t, Tensor(b_val)), r))
            with Tape() as tape:
                loss = f(a)
            tape.backward(loss)
            fd = finite_difference_grad(f, a, h=1e-5)
            assert rel_err(a.grad, fd) < 1e-4
            a.zero_grad()


def test_matmul_and_bias_gradients_match_finite_differences():
    for seed in range(10):
        rng = np.random.default_rng(500 + seed)
        w = Tensor(rng.uniform(-1, 1, size=(3, 2)))
        x_val = rng.uniform(-2, 2, size=(4, 3))
        bias = Tensor(rng.uniform(-1, 1, size=2))

        def f(t):
            return ad.lp_power_norm(ad.add_bias(ad.matmul(Tensor(x_val), t), bias), 2)

        with Tape() as tape:
            loss = f(w)
        tape.backward(loss)
        fd = finite_difference_grad(f, w, h=1e-5)
        assert rel_err(w.grad, fd) < 1e-4
        bias.zero_grad()

        def fb(t):
            return ad.lp_power_norm(ad.add_bias(ad.matmul(Tensor(x_val), w), t), 2)

        with Tape() as tape:
            loss = fb(bias)
        tape.backward(loss)
        fd = finite_difference_grad(fb, bias, h=1e-5)
        assert rel_err(bias.grad, fd) < 1e-4
