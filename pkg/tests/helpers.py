"""Shared test utilities: finite-difference gradient checking.

The checker is deliberately independent of the tape: it re-evaluates the
forward function around perturbed leaf values and compares central
differences against backpropagated gradients, elementwise, with relative
error measured against max(|a|, |b|, 1e-8).
"""

import numpy as np

from logigraph import tensor as T

FD_STEP = 1e-3
FD_TOL = 1e-4


def rel_err(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return np.abs(a - b) / denom


def finite_diff(fn, leaf: T.Tensor, coords=None, h: float = FD_STEP) -> np.ndarray:
    """Central differences of the scalar fn() w.r.t. selected leaf entries."""
    flat = leaf.data.reshape(-1)
    if coords is None:
        coords = range(flat.size)
    grad = np.zeros(flat.size)
    for i in coords:
        orig = flat[i]
        flat[i] = orig + h
        up = fn().data.item()
        flat[i] = orig - h
        down = fn().data.item()
        flat[i] = orig
        grad[i] = (up - down) / (2.0 * h)
    return grad.reshape(leaf.data.shape)


def check_grads(fn, leaves, coords_per_leaf=None, h: float = FD_STEP, tol: float = FD_TOL):
    """Assert backprop and finite differences agree on every checked entry.

    ``fn`` must rebuild the computation from the same leaf tensors on every
    call.  Returns the worst relative error seen.
    """
    loss = fn()
    T.zero_grad(leaves)
    loss = fn()
    T.backward(loss)
    analytic = [
        leaf.grad.copy() if leaf.grad is not None else np.zeros_like(leaf.data)
        for leaf in leaves
    ]
    T.zero_grad(leaves)
    worst = 0.0
    for idx, leaf in enumerate(leaves):
        coords = None if coords_per_leaf is None else coords_per_leaf[idx]
        numeric = finite_diff(fn, leaf, coords=coords, h=h)
        if coords is None:
            err = rel_err(analytic[idx], numeric).max()
        else:
            a = analytic[idx].reshape(-1)[list(coords)]
            n = numeric.reshape(-1)[list(coords)]
            err = rel_err(a, n).max() if len(list(coords)) else 0.0
        worst = max(worst, float(err))
        assert err < tol, f"leaf {idx}: rel err {err:.3e} >= {tol}"
    return worst


def away_from_kinks(arr: np.ndarray, margin: float = 0.05) -> np.ndarray:
    """Push entries away from zero so ReLU kinks cannot straddle the FD step."""
    out = arr.copy()
    small = np.abs(out) < margin
    out[small] = np.where(out[small] >= 0, margin, -margin) + out[small]
    return out
