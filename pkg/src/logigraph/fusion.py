"""Hierarchical fusion, segment pooling, option ranking, and eval metrics.

Token and logic embeddings are added under layer normalization, passed
through a residual bidirectional GRU, pooled per segment (first token,
passage, question-option), integrated by a GeLU perceptron, and scored by
a linear ranking head with softmax over the candidates.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .encoder import init_gru
from .errors import DataError


@dataclass
class LnParams:
    gain: T.Tensor  # (1, b)
    bias: T.Tensor  # (1, b)


@dataclass
class FusionParams:
    gru_fwd: T.GruParams  # b -> b/2
    gru_bwd: T.GruParams
    ln_add: LnParams  # after logic + token residual
    ln_out: LnParams  # after recurrent residual
    ln_int: LnParams  # after the integration perceptron
    w_int: T.Tensor  # (3b, b)
    b_int: T.Tensor  # (1, b)
    w_rank: T.Tensor  # (b, 1)
    b_rank: T.Tensor  # (1, 1)

    def tensors(self):
        return (
            *self.gru_fwd.tensors(),
            *self.gru_bwd.tensors(),
            self.ln_add.gain, self.ln_add.bias,
            self.ln_out.gain, self.ln_out.bias,
            self.ln_int.gain, self.ln_int.bias,
            self.w_int, self.b_int, self.w_rank, self.b_rank,
        )


def _ln(rng, hidden) -> LnParams:
    return LnParams(gain=T.param(np.ones((1, hidden))), bias=T.param(np.zeros((1, hidden))))


def init_fusion(rng: np.random.Generator, hidden: int) -> FusionParams:
    half = hidden // 2
    lim = np.sqrt(6.0 / (4 * hidden))
    return FusionParams(
        gru_fwd=init_gru(rng, hidden, half),
        gru_bwd=init_gru(rng, hidden, half),
        ln_add=_ln(rng, hidden),
        ln_out=_ln(rng, hidden),
        ln_int=_ln(rng, hidden),
        w_int=T.param(rng.uniform(-lim, lim, size=(3 * hidden, hidden))),
        b_int=T.param(np.zeros((1, hidden))),
        w_rank=T.param(rng.uniform(-lim, lim, size=(hidden, 1))),
        b_rank=T.param(np.zeros((1, 1))),
    )


def fuse_packed(tokens: T.Tensor, logic: T.Tensor, lengths, params: FusionParams) -> T.Tensor:
    """Residual fusion over packed rows: LN(add) -> BiGRU -> LN(residual)."""
    t_hat = T.layer_norm(T.add(logic, tokens), params.ln_add.gain, params.ln_add.bias)
    t_bar = T.bigru_packed(t_hat, lengths, params.gru_fwd, params.gru_bwd)
    return T.layer_norm(T.add(t_hat, t_bar), params.ln_out.gain, params.ln_out.bias)


def fuse(tokens: T.Tensor, logic: T.Tensor, params: FusionParams) -> T.Tensor:
    """Single-sequence fusion (t-hat, BiGRU residual, output LN)."""
    if tokens.data.shape != logic.data.shape:
        raise ValueError("token and logic embeddings must shape-match")
    return fuse_packed(tokens, logic, [tokens.data.shape[0]], params)


def _attention_pool(segment: T.Tensor, scalar: bool) -> T.Tensor:
    if scalar:
        width = segment.data.shape[1]
        score = T.scale(T.sum_(segment, axis=1, keepdims=True), 1.0 / width)
        weights = T.softmax(score, axis=0)
    else:
        # element-wise softmax across positions, independently per feature
        weights = T.softmax(segment, axis=0)
    return T.sum_(T.mul(weights, segment), axis=0, keepdims=True)


def pool(e: T.Tensor, boundary: int, params: FusionParams, scalar: bool = False) -> T.Tensor:
    """Segment-wise attention pooling and integration into one vector."""
    rows = e.data.shape[0]
    if not 1 < boundary < rows:
        raise ValueError(f"boundary must satisfy 1 < M < L, got M={boundary}, L={rows}")
    first = T.narrow(e, 0, 0, 1)
    passage = _attention_pool(T.narrow(e, 0, 1, boundary - 1), scalar)
    option = _attention_pool(T.narrow(e, 0, boundary, rows - boundary), scalar)
    joined = T.concat([first, passage, option], axis=1)
    hidden = T.gelu(T.add(T.matmul(joined, params.w_int), params.b_int))
    return T.layer_norm(hidden, params.ln_int.gain, params.ln_int.bias)


def score_and_rank(pooled, params: FusionParams, label: int | None):
    """Scalar score per candidate, softmax probabilities, optional loss."""
    if len(pooled) < 2:
        raise ValueError("ranking needs at least two candidates")
    scores = T.concat(
        [T.add(T.matmul(p, params.w_rank), params.b_rank) for p in pooled], axis=0
    )
    probs = T.softmax(scores, axis=0)
    loss = T.cross_entropy(probs, label) if label is not None else None
    return loss, probs.data.reshape(-1).copy(), scores.data.reshape(-1).copy()


# ----------------------------------------------------------------- metrics

@dataclass(frozen=True)
class Prediction:
    sample_id: str
    scores: tuple[float, ...]
    probabilities: tuple[float, ...]
    predicted: int
    label: int | None = None


def rank_of_gold(scores, label: int) -> int:
    """1-based rank; ties broken by candidate index (lower index first)."""
    gold = scores[label]
    rank = 1
    for j, s in enumerate(scores):
        if s > gold or (s == gold and j < label):
            rank += 1
    return rank


def metrics(predictions) -> dict:
    """Accuracy, R@1, R@2, and MRR over an evaluation set."""
    predictions = list(predictions)
    if not predictions:
        raise DataError("metrics need a non-empty evaluation set")
    ranks = []
    for p in predictions:
        if p.label is None:
            raise DataError(f"prediction {p.sample_id} has no gold label")
        ranks.append(rank_of_gold(p.scores, p.label))
    n = len(ranks)
    r_at_1 = sum(r <= 1 for r in ranks) / n
    r_at_2 = sum(r <= 2 for r in ranks) / n
    mrr = sum(1.0 / r for r in ranks) / n
    return {"accuracy": r_at_1, "r_at_1": r_at_1, "r_at_2": r_at_2, "mrr": mrr}
