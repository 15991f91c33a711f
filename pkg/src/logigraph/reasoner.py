"""Graph reasoning over logic graphs.

Nodes start as sum-pooled token embeddings.  Each layer computes a scalar
sigmoid weight per node, projects neighbor states, and averages the
weighted messages arriving over the three adjacency matrices (explicit,
implicit, variable) before a ReLU update.  Final node states are assigned
back to every token of their unit.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .graph import LogicGraph
from .segmentation import PositionMap

EDGE_TYPES = ("explicit", "implicit", "variable")


@dataclass
class LayerParams:
    """One propagation layer.

    Message projections are shared across edge types by default (``wg``,
    ``bg``); the per-type extension stores one projection per edge type in
    ``wg_typed``/``bg_typed`` instead.
    """

    wa: T.Tensor  # (b, 1) node-weight head
    ba: T.Tensor  # (1, 1)
    we: T.Tensor  # (b, b) self update
    be: T.Tensor  # (1, b)
    wg: T.Tensor | None = None  # (b, b) shared message projection
    bg: T.Tensor | None = None  # (1, b)
    wg_typed: dict | None = None  # edge type -> (b, b)
    bg_typed: dict | None = None  # edge type -> (1, b)

    def __post_init__(self):
        shared = self.wg is not None
        typed = self.wg_typed is not None
        if shared == typed:
            raise ValueError("exactly one of shared / per-type projections required")

    @property
    def per_type(self) -> bool:
        return self.wg_typed is not None

    def tensors(self):
        out = [self.wa, self.ba, self.we, self.be]
        if self.per_type:
            for key in EDGE_TYPES:
                out.extend((self.wg_typed[key], self.bg_typed[key]))
        else:
            out.extend((self.wg, self.bg))
        return tuple(out)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def init_layer(rng: np.random.Generator, hidden: int, per_type: bool) -> LayerParams:
    common = dict(
        wa=T.param(_glorot(rng, hidden, 1)),
        ba=T.param(np.zeros((1, 1))),
        we=T.param(_glorot(rng, hidden, hidden)),
        be=T.param(np.zeros((1, hidden))),
    )
    if per_type:
        return LayerParams(
            **common,
            wg_typed={k: T.param(_glorot(rng, hidden, hidden)) for k in EDGE_TYPES},
            bg_typed={k: T.param(np.zeros((1, hidden))) for k in EDGE_TYPES},
        )
    return LayerParams(
        **common,
        wg=T.param(_glorot(rng, hidden, hidden)),
        bg=T.param(np.zeros((1, hidden))),
    )


def init_reasoner(rng: np.random.Generator, hidden: int, k: int, per_type: bool = False):
    if k < 1:
        raise ValueError("at least one propagation layer is required")
    return [init_layer(rng, hidden, per_type) for _ in range(k)]


def pooling_matrix(pos_map: PositionMap, n_nodes: int) -> np.ndarray:
    p = np.zeros((n_nodes, len(pos_map)))
    for l, n in enumerate(pos_map):
        p[n, l] = 1.0
    return p


def init_nodes(tokens: T.Tensor, pos_map: PositionMap) -> T.Tensor:
    """Sum-pool each unit's token embeddings into its initial node state."""
    n_nodes = max(pos_map.assignments) + 1
    if len(pos_map) != tokens.data.shape[0]:
        raise ValueError("position map does not cover the token rows")
    return T.matmul(T.tensor(pooling_matrix(pos_map, n_nodes)), tokens)


def propagate(graph: LogicGraph, states: T.Tensor, layer: LayerParams) -> T.Tensor:
    """One message-passing layer.

    Messages to node i average the sender-weighted projections over the
    union neighborhood: sum_j sum_E alpha_j A^E_ji proj(v_j) / |N_i|, with
    isolated nodes receiving zero message.
    """
    alpha = T.sigmoid(T.add(T.matmul(states, layer.wa), layer.ba))
    union = graph.union_support()
    degrees = union.sum(axis=0)
    inv = np.divide(1.0, degrees, out=np.zeros_like(degrees), where=degrees > 0)
    adjacency = {
        "explicit": graph.adj_explicit,
        "implicit": graph.adj_implicit,
        "variable": graph.adj_variable,
    }
    if layer.per_type:
        message = None
        for key in EDGE_TYPES:
            projected = T.add(T.matmul(states, layer.wg_typed[key]), layer.bg_typed[key])
            term = T.matmul(T.tensor(adjacency[key].T), T.mul(alpha, projected))
            message = term if message is None else T.add(message, term)
    else:
        projected = T.add(T.matmul(states, layer.wg), layer.bg)
        stacked = adjacency["explicit"] + adjacency["implicit"] + adjacency["variable"]
        message = T.matmul(T.tensor(stacked.T), T.mul(alpha, projected))
    message = T.mul(message, T.tensor(inv.reshape(-1, 1)))
    return T.relu(T.add(T.add(T.matmul(states, layer.we), message), layer.be))


def assign_tokens(states: T.Tensor, pos_map: PositionMap) -> T.Tensor:
    """Every token receives its node's embedding (Eq. t_l = v_n)."""
    n_nodes = states.data.shape[0]
    return T.matmul(T.tensor(pooling_matrix(pos_map, n_nodes).T), states)


def node_weights(states: T.Tensor, layer: LayerParams) -> np.ndarray:
    """The alpha gate values, exposed for inspection and tests."""
    return T.sigmoid(T.add(T.matmul(states, layer.wa), layer.ba)).data
