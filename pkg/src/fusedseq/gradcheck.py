"""Finite-difference gradient verification.

The oracle is the central difference (f(x+eps e_i) - f(x-eps e_i)) / 2eps
evaluated coordinate by coordinate, compared to tape gradients with the
relative error  max|g_bp - g_fd| / max(1, max|g_fd|).
"""

from __future__ import annotations

import math
from typing import Callable, Iterable

import numpy as np

from .exceptions import NumericError
from .params import Parameter
from .tensor import Tensor

DEFAULT_EPSILON = 1e-5
DEFAULT_TOLERANCE = 1e-4


def finite_diff_grad(f: Callable[[np.ndarray], float], theta, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Central-difference gradient of a scalar function at theta.

    f must be deterministic; a non-finite evaluation raises NumericError
    naming the offending coordinate.
    """
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    base = np.array(theta.data if isinstance(theta, Tensor) else theta, dtype=np.float64)
    flat = base.ravel()
    grad = np.zeros_like(flat)
    work = flat.copy()
    for i in range(flat.size):
        orig = work[i]
        work[i] = orig + epsilon
        hi = float(f(work.reshape(base.shape)))
        work[i] = orig - epsilon
        lo = float(f(work.reshape(base.shape)))
        work[i] = orig
        if not (math.isfinite(hi) and math.isfinite(lo)):
            raise NumericError(f"non-finite evaluation at coordinate {i}")
        grad[i] = (hi - lo) / (2.0 * epsilon)
    return grad.reshape(base.shape)


def relative_error(g_bp: np.ndarray, g_fd: np.ndarray) -> float:
    """max-norm error of backprop against the finite-difference oracle."""
    diff = np.max(np.abs(np.asarray(g_bp) - np.asarray(g_fd))) if g_fd.size else 0.0
    scale = max(1.0, float(np.max(np.abs(g_fd))) if g_fd.size else 0.0)
    return float(diff) / scale


def check_parameter_grads(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Parameter],
    epsilon: float = DEFAULT_EPSILON,
) -> dict[str, float]:
    """Compare tape gradients of loss_fn against finite differences.

    loss_fn rebuilds the loss from current parameter values on every call.
    Returns the relative error per parameter name.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {p.name: (np.zeros(p.shape) if p.grad is None else p.grad.copy()) for p in params}

    errors: dict[str, float] = {}
    for p in params:
        saved = p.value.data

        def eval_at(theta: np.ndarray, p=p, saved=saved) -> float:
            p.value.data = np.array(theta, dtype=np.float64)
            try:
                return loss_fn().item()
            finally:
                p.value.data = saved

        fd = finite_diff_grad(eval_at, saved, epsilon)
        errors[p.name] = relative_error(analytic[p.name], fd)
        p.zero_grad()
    return errors
