"""Full model assembly: encoder -> graph reasoner -> fusion -> ranking.

One forward pass handles all candidates of a sample at once: their token
sequences run packed through the encoder and fusion GRUs, while graph
reasoning runs per candidate (each candidate has its own logic graph).
"""

import zlib
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .encoder import EncoderParams, encode_packed, init_encoder
from .errors import ConfigError
from .fusion import FusionParams, fuse_packed, init_fusion, pool, score_and_rank
from .graph import LogicGraph
from .reasoner import (
    EDGE_TYPES,
    LayerParams,
    assign_tokens,
    init_nodes,
    init_reasoner,
    propagate,
)

NODE_INIT_MODES = ("pooled", "random")


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 64
    layers: int = 2
    per_type_messages: bool = False
    scalar_pool: bool = False
    dropout: float = 0.1
    no_graph: bool = False
    node_init: str = "pooled"
    node_seed: int = 0

    def __post_init__(self):
        if self.hidden % 2:
            raise ConfigError("hidden size must be even")
        if self.layers < 1:
            raise ConfigError("layers must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.node_init not in NODE_INIT_MODES:
            raise ConfigError(f"node_init must be one of {NODE_INIT_MODES}")


@dataclass
class ModelParams:
    encoder: EncoderParams
    reasoner: list
    fusion: FusionParams


def init_model(rng: np.random.Generator, vocab_size: int, cfg: ModelConfig) -> ModelParams:
    return ModelParams(
        encoder=init_encoder(rng, vocab_size, cfg.hidden),
        reasoner=init_reasoner(rng, cfg.hidden, cfg.layers, cfg.per_type_messages),
        fusion=init_fusion(rng, cfg.hidden),
    )


def named_parameters(params: ModelParams) -> dict:
    """Stable name -> tensor map; iteration order is the storage order."""
    out: dict[str, T.Tensor] = {}
    enc = params.encoder
    out["encoder.embed"] = enc.embed
    for direction, gru in (("fwd", enc.fwd), ("bwd", enc.bwd)):
        for part, t in zip(("w", "u", "bx", "bh"), gru.tensors()):
            out[f"encoder.gru_{direction}.{part}"] = t
    for k, layer in enumerate(params.reasoner):
        prefix = f"reasoner.{k}"
        out[f"{prefix}.wa"] = layer.wa
        out[f"{prefix}.ba"] = layer.ba
        if layer.per_type:
            for key in EDGE_TYPES:
                out[f"{prefix}.wg.{key}"] = layer.wg_typed[key]
                out[f"{prefix}.bg.{key}"] = layer.bg_typed[key]
        else:
            out[f"{prefix}.wg"] = layer.wg
            out[f"{prefix}.bg"] = layer.bg
        out[f"{prefix}.we"] = layer.we
        out[f"{prefix}.be"] = layer.be
    fus = params.fusion
    for direction, gru in (("fwd", fus.gru_fwd), ("bwd", fus.gru_bwd)):
        for part, t in zip(("w", "u", "bx", "bh"), gru.tensors()):
            out[f"fusion.gru_{direction}.{part}"] = t
    for name, ln in (("ln_add", fus.ln_add), ("ln_out", fus.ln_out), ("ln_int", fus.ln_int)):
        out[f"fusion.{name}.gain"] = ln.gain
        out[f"fusion.{name}.bias"] = ln.bias
    out["fusion.w_int"] = fus.w_int
    out["fusion.b_int"] = fus.b_int
    out["fusion.w_rank"] = fus.w_rank
    out["fusion.b_rank"] = fus.b_rank
    return out


def parameter_groups(params: ModelParams) -> dict:
    """Learning-rate groups; the ranking head trains with the fusion group."""
    names = named_parameters(params)
    groups = {"encoder": [], "reasoner": [], "fusion": []}
    for name in names:
        groups[name.split(".", 1)[0]].append(name)
    return groups


@dataclass
class CandidateInput:
    ids: np.ndarray
    boundary: int
    graph: LogicGraph | None = None
    external: np.ndarray | None = None  # precomputed (L, b) embeddings


@dataclass
class ForwardResult:
    loss: T.Tensor | None
    probabilities: np.ndarray
    scores: np.ndarray
    logic: list = field(default_factory=list)


def _random_node_states(graph: LogicGraph, hidden: int, seed: int) -> T.Tensor:
    key = zlib.crc32(f"{graph.sample_id}:{graph.candidate}".encode("utf-8"))
    rng = np.random.default_rng(np.random.SeedSequence([seed, key]))
    return T.tensor(rng.normal(size=(graph.n_nodes, hidden)))


def forward(
    params: ModelParams,
    cfg: ModelConfig,
    candidates: list[CandidateInput],
    label: int | None,
    train_rng: np.random.Generator | None = None,
    keep_logic: bool = False,
) -> ForwardResult:
    """Score every candidate of one sample and (optionally) compute the loss."""
    lengths = [int(c.ids.size) for c in candidates]
    if any(c.external is not None for c in candidates):
        if not all(c.external is not None for c in candidates):
            raise ConfigError("either all candidates use external embeddings or none")
        tokens = T.tensor(np.concatenate([c.external for c in candidates], axis=0))
    else:
        ids_concat = np.concatenate([c.ids for c in candidates])
        tokens = encode_packed(params.encoder, ids_concat, lengths)

    logic_parts = []
    kept = []
    offset = 0
    for cand, length in zip(candidates, lengths):
        if cfg.no_graph:
            logic_parts.append(T.tensor(np.zeros((length, cfg.hidden))))
        else:
            graph = cand.graph
            if graph is None:
                raise ConfigError("graph reasoning enabled but candidate has no graph")
            token_rows = T.narrow(tokens, 0, offset, length)
            if cfg.node_init == "random":
                states = _random_node_states(graph, cfg.hidden, cfg.node_seed)
            else:
                states = init_nodes(token_rows, graph.pos_map)
            for layer in params.reasoner:
                states = propagate(graph, states, layer)
            if keep_logic:
                kept.append(states.data.copy())
            logic_parts.append(assign_tokens(states, graph.pos_map))
        offset += length
    logic = T.concat(logic_parts, axis=0)

    fused = fuse_packed(tokens, logic, lengths, params.fusion)
    if train_rng is not None and cfg.dropout > 0:
        fused = T.dropout(fused, cfg.dropout, train_rng)

    pooled = []
    offset = 0
    for cand, length in zip(candidates, lengths):
        rows = T.narrow(fused, 0, offset, length)
        pooled.append(pool(rows, cand.boundary, params.fusion, cfg.scalar_pool))
        offset += length
    loss, probs, scores = score_and_rank(pooled, params.fusion, label)
    return ForwardResult(loss=loss, probabilities=probs, scores=scores, logic=kept)
