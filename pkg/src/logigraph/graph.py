"""Logic-graph assembly.

Nodes are the EDUs of one (sample, candidate) input split into the disjoint
context set V_u and candidate set V_v.  Connective edges (explicit/implicit)
link consecutive units within a set; variable edges link cross-set pairs
that share a topic term, row-normalized by degree.  Ablations rewrite the
adjacency structure for the experiment grid.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Sample, assemble_input
from .delimiters import DelimiterHit, DelimiterLibrary, Kind
from .errors import ConfigError, GraphBuildError
from .segmentation import (
    EDU,
    Granularity,
    Origin,
    PositionMap,
    TokenizedText,
    boundary_kind,
    segment,
    tokenize,
)
from .topicterms import STOPWORDS, TopicTerm, detect_terms


@dataclass(frozen=True)
class GraphConfig:
    granularity: Granularity = Granularity.EDU
    max_ngram: int = 4
    stopwords: frozenset = STOPWORDS
    max_len: int = 256


@dataclass(frozen=True)
class LogicGraph:
    """Immutable graph for one candidate: typed nodes plus three adjacencies.

    ``nodes[:n_context]`` is V_u, the rest V_v.  ``adj_explicit`` and
    ``adj_implicit`` are 0/1 symmetric and block-diagonal; ``adj_variable``
    has symmetric support confined to the cross blocks, with each nonzero
    row normalized to sum 1 (values need not be symmetric).
    """

    sample_id: str
    candidate: int
    tokens: tuple[str, ...]
    boundary: int  # M: first token index after the first </s>
    nodes: tuple[EDU, ...]
    n_context: int
    terms: tuple[TopicTerm, ...]
    adj_explicit: np.ndarray
    adj_implicit: np.ndarray
    adj_variable: np.ndarray
    pos_map: PositionMap

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def union_support(self) -> np.ndarray:
        """0/1 matrix of pairs linked by any edge type."""
        return (
            (self.adj_explicit != 0) | (self.adj_implicit != 0) | (self.adj_variable != 0)
        ).astype(np.float64)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _shift(edu: EDU, tok_off: int, id_off: int) -> EDU:
    def mv(h: DelimiterHit) -> DelimiterHit:
        return DelimiterHit(h.start + tok_off, h.end + tok_off, h.kind, h.surface)

    return EDU(
        id=edu.id + id_off,
        start=edu.start + tok_off,
        end=edu.end + tok_off,
        origin=edu.origin,
        leading_connective=mv(edu.leading_connective) if edu.leading_connective else None,
        boundary_hits=tuple(mv(h) for h in edu.boundary_hits),
    )


def normalize_variable(adj_raw: np.ndarray) -> np.ndarray:
    """Divide each nonzero row by its degree; zero rows stay zero."""
    adj_raw = np.asarray(adj_raw, dtype=np.float64)
    degrees = adj_raw.sum(axis=1, keepdims=True)
    safe = np.where(degrees > 0, degrees, 1.0)
    return adj_raw / safe


def build_graph(
    sample: Sample,
    candidate_index: int,
    lib: DelimiterLibrary,
    cfg: GraphConfig = GraphConfig(),
) -> LogicGraph:
    """Construct the logic graph for one candidate of a sample."""
    if not tokenize(sample.context):
        raise GraphBuildError(f"sample {sample.id}: empty context text")
    if not (0 <= candidate_index < len(sample.options)):
        raise GraphBuildError(
            f"sample {sample.id}: candidate index {candidate_index} out of range"
        )
    if not tokenize(sample.options[candidate_index]):
        raise GraphBuildError(
            f"sample {sample.id}: empty candidate text {candidate_index}"
        )
    tokens, m = assemble_input(sample, candidate_index, cfg.max_len)

    ctx_edus, ctx_pos = segment(
        TokenizedText(tuple(tokens[:m]), Origin.CONTEXT), lib, cfg.granularity
    )
    cand_edus, cand_pos = segment(
        TokenizedText(tuple(tokens[m:]), Origin.CANDIDATE), lib, cfg.granularity
    )
    n_context = len(ctx_edus)
    nodes = tuple(ctx_edus) + tuple(_shift(e, m, n_context) for e in cand_edus)
    pos_map = PositionMap.concat(ctx_pos, cand_pos, n_context)

    n = len(nodes)
    adj_e = np.zeros((n, n))
    adj_i = np.zeros((n, n))
    for side_start, side_edus in ((0, nodes[:n_context]), (n_context, nodes[n_context:])):
        for node in side_edus:
            if node.id == side_start or not node.boundary_hits:
                continue
            kind = boundary_kind(node)
            target = adj_e if kind is Kind.EXPLICIT else adj_i
            target[node.id - 1, node.id] = 1.0
            target[node.id, node.id - 1] = 1.0

    terms = tuple(detect_terms(list(nodes), tokens, cfg.stopwords, cfg.max_ngram))
    raw = np.zeros((n, n))
    for term in terms:
        touched = {occ[0] for occ in term.occurrences}
        ctx_nodes = sorted(t for t in touched if t < n_context)
        cand_nodes = sorted(t for t in touched if t >= n_context)
        for u in ctx_nodes:
            for v in cand_nodes:
                raw[u, v] = 1.0
                raw[v, u] = 1.0

    return LogicGraph(
        sample_id=sample.id,
        candidate=candidate_index,
        tokens=tuple(tokens),
        boundary=m,
        nodes=nodes,
        n_context=n_context,
        terms=terms,
        adj_explicit=_freeze(adj_e),
        adj_implicit=_freeze(adj_i),
        adj_variable=_freeze(normalize_variable(raw)),
        pos_map=pos_map,
    )


# ------------------------------------------------------------------ ablation

@dataclass(frozen=True)
class FullyConnected:
    """All node pairs joined as explicit edges; implicit edges removed."""


@dataclass(frozen=True)
class RandomEdges:
    """All edges removed, then explicit edges drawn iid Bernoulli(p).

    ``p=None`` matches the observed edge density of the unablated graph.
    """

    p: float | None = None
    seed: int = 0


@dataclass(frozen=True)
class SingleEdgeType:
    """All three edge types folded into one binary matrix."""


Ablation = FullyConnected | RandomEdges | SingleEdgeType


def ablate(graph: LogicGraph, mode: Ablation) -> LogicGraph:
    n = graph.n_nodes
    if isinstance(mode, FullyConnected):
        return replace(
            graph,
            adj_explicit=_freeze(np.ones((n, n)) - np.eye(n)),
            adj_implicit=_freeze(np.zeros((n, n))),
        )
    if isinstance(mode, RandomEdges):
        p = mode.p
        if p is None:
            support = graph.union_support()
            pairs = n * (n - 1) / 2.0
            p = float(np.triu(support, 1).sum() / pairs) if pairs else 0.0
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"edge probability must lie in [0, 1], got {p}")
        rng = np.random.default_rng(mode.seed)
        upper = np.triu(rng.random((n, n)) < p, 1).astype(np.float64)
        return replace(
            graph,
            adj_explicit=_freeze(upper + upper.T),
            adj_implicit=_freeze(np.zeros((n, n))),
            adj_variable=_freeze(np.zeros((n, n))),
        )
    if isinstance(mode, SingleEdgeType):
        return replace(
            graph,
            adj_explicit=_freeze(graph.union_support()),
            adj_implicit=_freeze(np.zeros((n, n))),
            adj_variable=_freeze(np.zeros((n, n))),
        )
    raise ConfigError(f"unknown ablation mode: {mode!r}")


# -------------------------------------------------------------- serialization

def to_json(graph: LogicGraph) -> str:
    def edge_list(a: np.ndarray) -> list:
        rows, cols = np.nonzero(np.triu(a, 1))
        return [[int(i), int(j)] for i, j in zip(rows, cols)]

    rows, cols = np.nonzero(graph.adj_variable)
    variable = [
        [int(i), int(j), float(graph.adj_variable[i, j])] for i, j in zip(rows, cols)
    ]
    doc = {
        "schema": "logigraph-graph-v1",
        "sample_id": graph.sample_id,
        "candidate": graph.candidate,
        "boundary": graph.boundary,
        "n_context": graph.n_context,
        "tokens": list(graph.tokens),
        "nodes": [
            {
                "id": e.id,
                "span": [e.start, e.end],
                "origin": e.origin.value,
                "leading_connective": (
                    e.leading_connective.surface if e.leading_connective else None
                ),
                "text": " ".join(graph.tokens[e.start : e.end]),
            }
            for e in graph.nodes
        ],
        "terms": [
            {"stems": list(t.stems), "occurrences": [list(o) for o in t.occurrences]}
            for t in graph.terms
        ],
        "edges": {
            "explicit": edge_list(graph.adj_explicit),
            "implicit": edge_list(graph.adj_implicit),
            "variable": variable,
        },
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def to_dot(graph: LogicGraph) -> str:
    """Graphviz rendering: solid explicit, dashed implicit, dotted variable."""

    def esc(s: str) -> str:
        return s.replace("\\", "\\\\").replace('"', '\\"')

    lines = ["graph logic {", "  rankdir=LR;"]
    for e in graph.nodes:
        text = " ".join(graph.tokens[e.start : e.end])
        if len(text) > 48:
            text = text[:45] + "..."
        shape = "box" if e.origin is Origin.CONTEXT else "ellipse"
        lines.append(f'  n{e.id} [shape={shape}, label="EDU{e.id}: {esc(text)}"];')
    for name, adj, style in (
        ("explicit", graph.adj_explicit, "solid"),
        ("implicit", graph.adj_implicit, "dashed"),
    ):
        rows, cols = np.nonzero(np.triu(adj, 1))
        for i, j in zip(rows, cols):
            lines.append(f"  n{i} -- n{j} [style={style}, label={name!r}];".replace("'", '"'))
    rows, cols = np.nonzero(np.triu((graph.adj_variable != 0).astype(float), 1))
    for i, j in zip(rows, cols):
        lines.append(f'  n{i} -- n{j} [style=dotted, color=blue, label="variable"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
