"""Elementary discourse unit segmentation.

Splits a token sequence on detected delimiters, producing EDU nodes and the
token-to-node position map used by the graph reasoner.  A delimiter token
belongs to the unit it introduces; a trailing delimiter with nothing after
it folds into the last unit.
"""

import re
from dataclasses import dataclass, field
from enum import Enum

from .delimiters import DelimiterHit, DelimiterLibrary, Kind, SENTENCE_MARK, find_delimiters

_TOKEN_RE = re.compile(r"[\w']+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace+punctuation tokenizer; punctuation stands alone."""
    return _TOKEN_RE.findall(text.lower())


class Origin(Enum):
    CONTEXT = "context"
    CANDIDATE = "candidate"


class Granularity(Enum):
    EDU = "edu"
    CLAUSE = "clause"
    SENTENCE = "sentence"


@dataclass(frozen=True)
class TokenizedText:
    tokens: tuple[str, ...]
    origin: Origin


@dataclass(frozen=True)
class EDU:
    """One segment: node id, token span [start, end), origin, leading run.

    ``leading_connective`` is the first delimiter of the boundary run that
    opened this unit (None for a text-initial unit).  ``boundary_hits`` keeps
    the whole run so edge typing can apply explicit precedence.
    """

    id: int
    start: int
    end: int
    origin: Origin
    leading_connective: DelimiterHit | None = None
    boundary_hits: tuple[DelimiterHit, ...] = field(default=())

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def tokens_of(self, tokens) -> list[str]:
        return list(tokens[self.start : self.end])


class PositionMap:
    """Total map from token index l to node index n; monotone non-decreasing."""

    def __init__(self, assignments):
        self.assignments = tuple(int(a) for a in assignments)

    def node_of(self, l: int) -> int:
        return self.assignments[l]

    def __len__(self) -> int:
        return len(self.assignments)

    def __eq__(self, other) -> bool:
        return isinstance(other, PositionMap) and self.assignments == other.assignments

    def __iter__(self):
        return iter(self.assignments)

    @staticmethod
    def concat(first: "PositionMap", second: "PositionMap", offset: int) -> "PositionMap":
        return PositionMap(first.assignments + tuple(a + offset for a in second.assignments))


def _granular_library(lib: DelimiterLibrary, granularity: Granularity) -> DelimiterLibrary:
    if granularity is Granularity.EDU:
        return lib
    if granularity is Granularity.CLAUSE:
        return lib.restricted(explicit=False)
    if granularity is Granularity.SENTENCE:
        return lib.restricted(explicit=False, marks=(SENTENCE_MARK,))
    raise ValueError(f"unknown granularity: {granularity!r}")


def segment(
    text: TokenizedText,
    lib: DelimiterLibrary,
    granularity: Granularity = Granularity.EDU,
) -> tuple[list[EDU], PositionMap]:
    """Split a token sequence into EDUs and build its position map.

    Boundary runs: consecutive adjacent hits collapse into a single boundary
    so that no unit consists of delimiter tokens alone.  A run at the very
    end of the text attaches to the last unit instead of opening a new one.
    """
    tokens = list(text.tokens)
    if not tokens:
        raise ValueError("segment requires a non-empty token sequence")
    hits = find_delimiters(tokens, _granular_library(lib, granularity))

    runs: list[list[DelimiterHit]] = []
    for h in hits:
        if runs and h.start == runs[-1][-1].end:
            runs[-1].append(h)
        else:
            runs.append([h])
    # a trailing run has no following token to delimit; fold it into the
    # last unit (runs are contiguous, so the last one ends flush with the
    # text exactly when nothing follows it)
    if runs and runs[-1][-1].end == len(tokens):
        runs.pop()

    starts = [0] + [run[0].start for run in runs]
    bounds = starts + [len(tokens)]
    edus = []
    for i, run in enumerate([None] + runs):
        edus.append(
            EDU(
                id=i,
                start=bounds[i],
                end=bounds[i + 1],
                origin=text.origin,
                leading_connective=run[0] if run else None,
                boundary_hits=tuple(run) if run else (),
            )
        )
    assignments = []
    for edu in edus:
        assignments.extend([edu.id] * (edu.end - edu.start))
    return edus, PositionMap(assignments)


def boundary_kind(edu: EDU) -> Kind | None:
    """Edge type for the junction this unit opens; explicit takes precedence."""
    if not edu.boundary_hits:
        return None
    if any(h.kind is Kind.EXPLICIT for h in edu.boundary_hits):
        return Kind.EXPLICIT
    return Kind.IMPLICIT
