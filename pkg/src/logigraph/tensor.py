"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every operation the model needs is built from a small primitive set; each
primitive records a backward closure on the result.  ``backward`` walks the
tape once, accumulating gradients additively, and ``zero_grad`` resets them.
Tapes are per-sample and single-threaded; no graph is retained across steps.

``bigru_packed`` is the one fused kernel: it runs a masked bidirectional GRU
over several packed sequences in a single tape node with a hand-derived
backward pass, and is verified against the composite ``gru_cell`` chain.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erf, expit

_SQRT2 = float(np.sqrt(2.0))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(data) -> Tensor:
    """A constant (no gradient tracking)."""
    return Tensor(data)


def param(data) -> Tensor:
    """A learnable leaf."""
    return Tensor(data, requires_grad=True)


def zero_grad(tensors) -> None:
    for t in tensors:
        t.zero_grad()


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t: Tensor, g) -> None:
    if not t.requires_grad:
        return
    t.grad = g.copy() if t.grad is None else t.grad + g


def _make(data, parents, backward) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=tuple(parents), backward=backward)
    return Tensor(data)


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def backward(loss: Tensor) -> None:
    """Populate grads of all tape participants reachable from ``loss``."""
    if loss.data.size != 1:
        raise ValueError("backward expects a scalar loss")
    if not loss.requires_grad:
        return
    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------- primitives

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data + b.data

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data * b.data

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), bwd)


def scale(a, s: float) -> Tensor:
    a = _wrap(a)
    s = float(s)

    def bwd(g):
        _accum(a, g * s)

    return _make(a.data * s, (a,), bwd)


def sub(a, b) -> Tensor:
    return add(a, scale(_wrap(b), -1.0))


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul operands must be 2-D")

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _make(a.data @ b.data, (a, b), bwd)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accum(t, piece)

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, bwd)


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    a = _wrap(a)
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def bwd(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[index] = g
            _accum(a, full)

    return _make(a.data[index], (a,), bwd)


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def powc(a, p: float) -> Tensor:
    a = _wrap(a)
    p = float(p)
    out_data = a.data**p

    def bwd(g):
        _accum(a, g * p * a.data ** (p - 1.0))

    return _make(out_data, (a,), bwd)


def exp_(a) -> Tensor:
    a = _wrap(a)
    out_data = np.exp(a.data)

    def bwd(g):
        _accum(a, g * out_data)

    return _make(out_data, (a,), bwd)


def log_(a) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        _accum(a, g / a.data)

    return _make(np.log(a.data), (a,), bwd)


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    out_data = expit(a.data)

    def bwd(g):
        _accum(a, g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), bwd)


def tanh_(a) -> Tensor:
    a = _wrap(a)
    out_data = np.tanh(a.data)

    def bwd(g):
        _accum(a, g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), bwd)


def relu(a) -> Tensor:
    a = _wrap(a)

    def bwd(g):
        _accum(a, g * (a.data > 0.0))

    return _make(np.maximum(a.data, 0.0), (a,), bwd)


def gelu(a) -> Tensor:
    a = _wrap(a)
    phi = 0.5 * (1.0 + erf(a.data / _SQRT2))
    out_data = a.data * phi

    def bwd(g):
        pdf = np.exp(-0.5 * a.data * a.data) * _INV_SQRT_2PI
        _accum(a, g * (phi + a.data * pdf))

    return _make(out_data, (a,), bwd)


def gather_rows(table, ids) -> Tensor:
    """Row lookup ``table[ids]``; gradients scatter-add back into the table."""
    table = _wrap(table)
    ids = np.asarray(ids, dtype=np.int64)

    def bwd(g):
        if table.requires_grad:
            full = np.zeros_like(table.data)
            np.add.at(full, ids, g)
            _accum(table, full)

    return _make(table.data[ids], (table,), bwd)


# ---------------------------------------------------------------- composites

def softmax(x, axis: int = 0) -> Tensor:
    """Numerically stabilized softmax along ``axis`` (max is detached)."""
    x = _wrap(x)
    shift = tensor(x.data.max(axis=axis, keepdims=True))
    e = exp_(sub(x, shift))
    total = sum_(e, axis=axis, keepdims=True)
    return mul(e, powc(total, -1.0))


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x = _wrap(x)
    n = x.data.shape[-1]
    mu = scale(sum_(x, axis=-1, keepdims=True), 1.0 / n)
    centered = sub(x, mu)
    var = scale(sum_(mul(centered, centered), axis=-1, keepdims=True), 1.0 / n)
    inv = powc(add(var, eps), -0.5)
    return add(mul(mul(centered, inv), gain), bias)


def cross_entropy(probs, label: int) -> Tensor:
    """``-log p[label]`` for a probability column vector."""
    p = narrow(_wrap(probs), 0, int(label), 1)
    return scale(log_(p), -1.0)


def dropout(x, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with a seeded generator; identity when rate is 0."""
    if rate <= 0.0:
        return _wrap(x)
    keep = (rng.random(_wrap(x).data.shape) >= rate) / (1.0 - rate)
    return mul(x, tensor(keep))


@dataclass
class GruParams:
    """Fused GRU cell weights; gate order r | z | n along the last axis."""

    w: Tensor  # (input, 3h)
    u: Tensor  # (h, 3h)
    bx: Tensor  # (1, 3h)
    bh: Tensor  # (1, 3h)

    @property
    def hidden(self) -> int:
        return self.u.data.shape[0]

    def tensors(self):
        return (self.w, self.u, self.bx, self.bh)


def gru_cell(x, h, p: GruParams) -> Tensor:
    """One GRU step: update/reset gates plus candidate state.

    n = tanh(Wn x + r * (Un h + bhn)); h' = (1 - z) * n + z * h.
    """
    k = p.hidden
    gx = add(matmul(x, p.w), p.bx)
    gh = add(matmul(h, p.u), p.bh)
    r = sigmoid(add(narrow(gx, 1, 0, k), narrow(gh, 1, 0, k)))
    z = sigmoid(add(narrow(gx, 1, k, k), narrow(gh, 1, k, k)))
    n = tanh_(add(narrow(gx, 1, 2 * k, k), mul(r, narrow(gh, 1, 2 * k, k))))
    one_minus_z = add(scale(z, -1.0), 1.0)
    return add(mul(one_minus_z, n), mul(z, h))


def bigru_packed(xs, lengths, fwd: GruParams, bwd_p: GruParams) -> Tensor:
    """Bidirectional GRU over packed sequences, one fused tape node.

    ``xs`` stacks the per-sequence rows candidate-major: rows
    ``[offset_i, offset_i + lengths[i])`` belong to sequence i.  Sequences
    run batched and masked, so shorter ones never see pad positions; the
    output concatenates forward and backward states per row to width 2h.
    """
    xs = _wrap(xs)
    lengths = [int(l) for l in lengths]
    total, din = xs.data.shape
    if sum(lengths) != total or min(lengths) < 1:
        raise ValueError("lengths must be positive and sum to the row count")
    n_seq = len(lengths)
    l_max = max(lengths)
    h = fwd.hidden
    offsets = np.concatenate([[0], np.cumsum(lengths)])

    padded = np.zeros((l_max, n_seq, din))
    mask = np.zeros((l_max, n_seq, 1))
    for ci, ln in enumerate(lengths):
        padded[:ln, ci] = xs.data[offsets[ci] : offsets[ci + 1]]
        mask[:ln, ci] = 1.0

    def run(p: GruParams, reverse: bool):
        gx = (padded.reshape(-1, din) @ p.w.data).reshape(l_max, n_seq, 3 * h) + p.bx.data
        state = np.zeros((n_seq, h))
        outs = np.zeros((l_max, n_seq, h))
        cache = []
        order = range(l_max - 1, -1, -1) if reverse else range(l_max)
        for t in order:
            gh = state @ p.u.data + p.bh.data
            r = expit(gx[t, :, :h] + gh[:, :h])
            z = expit(gx[t, :, h : 2 * h] + gh[:, h : 2 * h])
            ghn = gh[:, 2 * h :]
            n = np.tanh(gx[t, :, 2 * h :] + r * ghn)
            candidate = (1.0 - z) * n + z * state
            new_state = mask[t] * candidate + (1.0 - mask[t]) * state
            cache.append((t, state, r, z, n, ghn))
            state = new_state
            outs[t] = new_state
        return outs, cache

    outs_f, cache_f = run(fwd, reverse=False)
    outs_b, cache_b = run(bwd_p, reverse=True)
    stacked = np.concatenate([outs_f, outs_b], axis=2)
    out_data = np.concatenate(
        [stacked[: lengths[ci], ci] for ci in range(n_seq)], axis=0
    )

    parents = (xs,) + fwd.tensors() + bwd_p.tensors()

    def bwd(g):
        g_pad = np.zeros((l_max, n_seq, 2 * h))
        for ci, ln in enumerate(lengths):
            g_pad[:ln, ci] = g[offsets[ci] : offsets[ci + 1]]
        dx_pad = np.zeros_like(padded)
        for p, cache, sl in ((fwd, cache_f, slice(0, h)), (bwd_p, cache_b, slice(h, 2 * h))):
            u_mat = p.u.data
            d_u = np.zeros_like(u_mat)
            d_bh = np.zeros_like(p.bh.data)
            d_gx = np.zeros((l_max, n_seq, 3 * h))
            d_state = np.zeros((n_seq, h))
            for t, h_prev, r, z, n, ghn in reversed(cache):
                d_total = d_state + g_pad[t, :, sl]
                m = mask[t]
                d_cand = d_total * m
                d_state = d_total * (1.0 - m)
                dz = d_cand * (h_prev - n)
                dn = d_cand * (1.0 - z)
                d_state = d_state + d_cand * z
                d_pre_n = dn * (1.0 - n * n)
                dr = d_pre_n * ghn
                d_gh_n = d_pre_n * r
                d_pre_z = dz * z * (1.0 - z)
                d_pre_r = dr * r * (1.0 - r)
                d_gh = np.concatenate([d_pre_r, d_pre_z, d_gh_n], axis=1)
                d_gx[t, :, :h] = d_pre_r
                d_gx[t, :, h : 2 * h] = d_pre_z
                d_gx[t, :, 2 * h :] = d_pre_n
                d_u += h_prev.T @ d_gh
                d_bh += d_gh.sum(axis=0, keepdims=True)
                d_state = d_state + d_gh @ u_mat.T
            flat_dgx = d_gx.reshape(-1, 3 * h)
            _accum(p.w, padded.reshape(-1, din).T @ flat_dgx)
            _accum(p.bx, flat_dgx.sum(axis=0, keepdims=True))
            _accum(p.u, d_u)
            _accum(p.bh, d_bh)
            dx_pad += (flat_dgx @ p.w.data.T).reshape(l_max, n_seq, din)
        if xs.requires_grad:
            _accum(
                xs,
                np.concatenate([dx_pad[: lengths[ci], ci] for ci in range(n_seq)], axis=0),
            )

    return _make(out_data, parents, bwd)
