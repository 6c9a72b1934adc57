"""Numeric hot kernels with a numba backend and a pure-numpy fallback.

The numba backend is used when importable; set the environment variable
``GANENS_NO_NUMBA=1`` before import to force the numpy path (useful for
debugging and for benchmarking one backend against the other, see
``benchmarks/bench_kernels.py``).  ``BACKEND`` reports which one is active.

Both backends implement the same functions with identical semantics; they
may differ by a few ulps on transcendental functions.
"""

import os

_flag = os.environ.get("GANENS_NO_NUMBA", "").strip()
if _flag not in ("", "0"):
    from . import numpy_impl as _impl

    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
        from . import numpy_impl as _impl

        BACKEND = "numpy"

leaky_relu_fwd = _impl.leaky_relu_fwd
leaky_relu_bwd = _impl.leaky_relu_bwd
sigmoid_fwd = _impl.sigmoid_fwd
sigmoid_bwd = _impl.sigmoid_bwd
tanh_fwd = _impl.tanh_fwd
tanh_bwd = _impl.tanh_bwd
log_clamped_fwd = _impl.log_clamped_fwd
log_clamped_bwd = _impl.log_clamped_bwd
abs_fwd = _impl.abs_fwd
abs_bwd = _impl.abs_bwd
pow_fwd = _impl.pow_fwd
pow_bwd = _impl.pow_bwd
lp_power = _impl.lp_power
lp_power_grad = _impl.lp_power_grad
row_lp_power = _impl.row_lp_power
adam_update = _impl.adam_update
clip_inplace = _impl.clip_inplace
pairwise_dist = _impl.pairwise_dist
closed_form_eval = _impl.closed_form_eval
lipschitz_max_excess = _impl.lipschitz_max_excess
