"""Fundamental token embeddings.

The built-in trainable encoder is an embedding table followed by one
bidirectional GRU pass (half width per direction), which makes token
embeddings contextual while staying desk-sized.  Precomputed embeddings
from a real pretrained model can be ingested instead through a binary
record store keyed by (sample id, candidate index).
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .data import BOS, EOS, PAD, SEP, UNK, Sample, assemble_input
from .errors import CheckpointError, MissingEmbeddingError, ShapeMismatchError

PAD_ID, UNK_ID, BOS_ID, EOS_ID, SEP_ID = 0, 1, 2, 3, 4
_SPECIALS = (PAD, UNK, BOS, EOS, SEP)


class Vocab:
    """Token/id bijection with specials reserved at fixed low ids."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if tokens[:5] != list(_SPECIALS):
            raise ValueError("vocab must start with the special tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocab contains duplicates")
        self.id_to_token = tokens
        self.token_to_id = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.id_to_token)

    @staticmethod
    def build(token_iter, min_freq: int = 1) -> "Vocab":
        counts: dict[str, int] = {}
        for tok in token_iter:
            if tok in _SPECIALS:
                continue
            counts[tok] = counts.get(tok, 0) + 1
        kept = sorted(
            (t for t, c in counts.items() if c >= min_freq),
            key=lambda t: (-counts[t], t),
        )
        return Vocab(list(_SPECIALS) + kept)

    def encode(self, tokens) -> np.ndarray:
        return np.array(
            [self.token_to_id.get(t, UNK_ID) for t in tokens], dtype=np.int64
        )

    def to_json(self) -> str:
        return json.dumps({"schema": "logigraph-vocab-v1", "tokens": self.id_to_token})

    @staticmethod
    def from_json(text: str) -> "Vocab":
        doc = json.loads(text)
        return Vocab(doc["tokens"])


def build_input(
    sample: Sample, c: int, vocab: Vocab, max_len: int = 256
) -> tuple[np.ndarray, int]:
    """Token ids plus segment boundary M for one candidate."""
    tokens, m = assemble_input(sample, c, max_len)
    return vocab.encode(tokens), m


@dataclass
class EncoderOutput:
    embeddings: T.Tensor  # (L, b)
    boundary: int  # M


@dataclass
class EncoderParams:
    embed: T.Tensor  # (V, b)
    fwd: T.GruParams
    bwd: T.GruParams

    @property
    def hidden(self) -> int:
        return self.embed.data.shape[1]

    def tensors(self):
        return (self.embed, *self.fwd.tensors(), *self.bwd.tensors())


def init_gru(rng: np.random.Generator, din: int, hidden: int) -> T.GruParams:
    lim = np.sqrt(6.0 / (din + 3 * hidden))
    lim_u = np.sqrt(6.0 / (hidden + 3 * hidden))
    return T.GruParams(
        w=T.param(rng.uniform(-lim, lim, size=(din, 3 * hidden))),
        u=T.param(rng.uniform(-lim_u, lim_u, size=(hidden, 3 * hidden))),
        bx=T.param(np.zeros((1, 3 * hidden))),
        bh=T.param(np.zeros((1, 3 * hidden))),
    )


def init_encoder(rng: np.random.Generator, vocab_size: int, hidden: int) -> EncoderParams:
    if hidden % 2:
        raise ValueError("hidden size must be even (two GRU directions)")
    half = hidden // 2
    return EncoderParams(
        embed=T.param(rng.normal(scale=1.0 / np.sqrt(hidden), size=(vocab_size, hidden))),
        fwd=init_gru(rng, hidden, half),
        bwd=init_gru(rng, hidden, half),
    )


def encode_packed(params: EncoderParams, ids_concat: np.ndarray, lengths) -> T.Tensor:
    """Contextual embeddings for several concatenated sequences at once."""
    looked_up = T.gather_rows(params.embed, ids_concat)
    return T.bigru_packed(looked_up, lengths, params.fwd, params.bwd)


def encode_toy(ids: np.ndarray, params: EncoderParams) -> EncoderOutput:
    """Trainable stand-in for a pretrained encoder: lookup + one BiGRU pass."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("encode_toy requires non-empty ids")
    out = encode_packed(params, ids, [ids.size])
    return EncoderOutput(embeddings=out, boundary=_boundary_from_ids(ids))


def _boundary_from_ids(ids: np.ndarray) -> int:
    eos = np.nonzero(ids == EOS_ID)[0]
    if eos.size == 0:
        raise ValueError("input has no </s> marker")
    return int(eos[0]) + 1


# ----------------------------------------------------- external embeddings

_MAGIC = b"LGEMB001"


def write_store(path: str | Path, records: dict) -> None:
    """Write an embedding store: {(sample_id, candidate): (L, b) float array}."""
    index = []
    payload = bytearray()
    for (sid, c), matrix in records.items():
        matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        raw = matrix.tobytes()
        index.append(
            {
                "id": str(sid),
                "candidate": int(c),
                "rows": matrix.shape[0],
                "cols": matrix.shape[1],
                "offset": len(payload),
            }
        )
        payload += struct.pack("<Q", len(raw)) + raw
    header = json.dumps(
        {"schema": "logigraph-emb-v1", "dtype": "float32", "records": index},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(payload)


class EmbeddingStore:
    """Reader for the length-prefixed embedding record stream."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        blob = self.path.read_bytes()
        if blob[:8] != _MAGIC:
            raise CheckpointError(f"{path}: not an embedding store")
        (header_len,) = struct.unpack("<Q", blob[8:16])
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
        self._payload = blob[16 + header_len :]
        self._index = {
            (r["id"], r["candidate"]): (r["offset"], r["rows"], r["cols"])
            for r in header["records"]
        }

    def get(self, sample_id: str, c: int, expected_rows: int) -> np.ndarray:
        key = (str(sample_id), int(c))
        if key not in self._index:
            raise MissingEmbeddingError(
                f"{self.path}: no embedding for sample {sample_id!r} candidate {c}"
            )
        offset, rows, cols = self._index[key]
        if rows != expected_rows:
            raise ShapeMismatchError(
                f"{self.path}: sample {sample_id!r} candidate {c}: stored {rows} rows, "
                f"input has {expected_rows} tokens"
            )
        (nbytes,) = struct.unpack("<Q", self._payload[offset : offset + 8])
        raw = self._payload[offset + 8 : offset + 8 + nbytes]
        return np.frombuffer(raw, dtype=np.float32).reshape(rows, cols).astype(np.float64)


def encode_external(
    store: "EmbeddingStore | str | Path", sample_id: str, c: int, ids: np.ndarray
) -> EncoderOutput:
    """Fetch a precomputed embedding matrix for one candidate input."""
    if not isinstance(store, EmbeddingStore):
        store = EmbeddingStore(store)
    ids = np.asarray(ids, dtype=np.int64)
    matrix = store.get(sample_id, c, ids.size)
    return EncoderOutput(embeddings=T.tensor(matrix), boundary=_boundary_from_ids(ids))
