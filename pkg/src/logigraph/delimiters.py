"""Discourse-aware delimiter library and connective detection.

The library couples the PDTB 2.0 explicit-connective inventory with the
punctuation marks that stand in for implicit relations.  Detection is a
greedy longest-match scan over a lowercased token sequence.
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import LibraryError

# PDTB 2.0 explicit connective inventory (100 types, "and" listed twice in
# the source table).  Discontinuous pairs are kept here for reference but are
# excluded from contiguous matching, see DISCONTINUOUS_PAIRS.
_EXPLICIT_RAW = (
    "once", "although", "though", "but", "because", "nevertheless", "before",
    "for example", "until", "if", "previously", "when", "and", "so", "then",
    "while", "as long as", "however", "also", "after", "separately", "still",
    "so that", "or", "moreover", "in addition", "instead",
    "on the other hand", "as", "for instance", "nonetheless", "unless",
    "meanwhile", "yet", "since", "rather", "in fact", "indeed", "later",
    "ultimately", "as a result", "either or", "therefore", "in turn", "thus",
    "in particular", "further", "afterward", "next", "similarly", "besides",
    "if and when", "nor", "alternatively", "whereas", "overall",
    "by comparison", "till", "in contrast", "finally", "otherwise", "as if",
    "thereby", "now that", "before and after", "additionally", "meantime",
    "by contrast", "if then", "likewise", "in the end", "regardless",
    "thereafter", "earlier", "in other words", "as soon as", "except",
    "in short", "neither nor", "furthermore", "lest", "as though",
    "specifically", "conversely", "consequently", "as well", "much as",
    "plus", "and", "hence", "by then", "accordingly", "on the contrary",
    "simultaneously", "for", "in sum", "when and if", "insofar as", "else",
    "as an alternative", "on the one hand on the other hand",
)

# Paired connectives whose members are separated by free text.  There is no
# deterministic way to match them contiguously, so they never fire as
# phrases; members that are connectives in their own right ("or", "if",
# "before", "on the other hand") still match individually.
DISCONTINUOUS_PAIRS = frozenset({
    "either or",
    "if then",
    "neither nor",
    "before and after",
    "when and if",
    "on the one hand on the other hand",
})

IMPLICIT_MARKS = (".", ",", ";", ":", "?", "!", "<s>", "</s>")

SENTENCE_MARK = "."


class Kind(Enum):
    EXPLICIT = "explicit"
    IMPLICIT = "implicit"


@dataclass(frozen=True)
class DelimiterHit:
    """One matched delimiter: token span [start, end), kind, and surface."""

    start: int
    end: int
    kind: Kind
    surface: str

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class DelimiterLibrary:
    """Immutable set of explicit phrases (token tuples) and implicit marks."""

    explicit: tuple[tuple[str, ...], ...]
    implicit: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_explicit_set", frozenset(self.explicit))
        object.__setattr__(self, "_implicit_set", frozenset(self.implicit))
        object.__setattr__(
            self, "_max_len", max((len(p) for p in self.explicit), default=0)
        )

    @property
    def explicit_set(self) -> frozenset:
        return self._explicit_set

    @property
    def implicit_set(self) -> frozenset:
        return self._implicit_set

    @property
    def max_phrase_len(self) -> int:
        return self._max_len

    def restricted(self, explicit: bool = True, marks: tuple[str, ...] | None = None):
        """Sub-library for coarser node granularities."""
        return DelimiterLibrary(
            explicit=self.explicit if explicit else (),
            implicit=self.implicit if marks is None else marks,
        )


def builtin_library() -> DelimiterLibrary:
    """The library from the built-in inventory, deduplicated and ordered."""
    seen = []
    for phrase in _EXPLICIT_RAW:
        if phrase in DISCONTINUOUS_PAIRS:
            continue
        parts = tuple(phrase.split())
        if parts not in seen:
            seen.append(parts)
    return DelimiterLibrary(explicit=tuple(seen), implicit=IMPLICIT_MARKS)


def load_library(override_path: str | Path | None = None) -> DelimiterLibrary:
    """Return the built-in library, or one parsed from an override file.

    Override format: UTF-8 text, one ``phrase<TAB>kind`` per line with kind
    in {explicit, implicit}.  Blank lines are ignored.
    """
    if override_path is None:
        return builtin_library()
    explicit: list[tuple[str, ...]] = []
    implicit: list[str] = []
    text = Path(override_path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise LibraryError(
                f"{override_path}: line {lineno}: expected 'phrase<TAB>kind'"
            )
        phrase, kind = line.rstrip("\n").split("\t", 1)
        phrase = phrase.strip().lower()
        kind = kind.strip().lower()
        if not phrase:
            raise LibraryError(f"{override_path}: line {lineno}: empty phrase")
        if kind == "explicit":
            parts = tuple(phrase.split())
            if parts not in explicit:
                explicit.append(parts)
        elif kind == "implicit":
            if " " in phrase:
                raise LibraryError(
                    f"{override_path}: line {lineno}: implicit marks are single tokens"
                )
            if phrase not in implicit:
                implicit.append(phrase)
        else:
            raise LibraryError(
                f"{override_path}: line {lineno}: unknown kind {kind!r}"
            )
    lib = DelimiterLibrary(explicit=tuple(explicit), implicit=tuple(implicit))
    overlap = lib.explicit_set & {(m,) for m in lib.implicit_set}
    if overlap:
        raise LibraryError(f"{override_path}: phrases listed as both kinds: {overlap}")
    return lib


def find_delimiters(tokens: list[str], lib: DelimiterLibrary) -> list[DelimiterHit]:
    """Greedy left-to-right longest-match scan for delimiters.

    Hits are non-overlapping and sorted by start.  A connective at position 0
    has nothing to its left to delimit and is skipped.  Implicit hits
    immediately adjacent to an explicit hit are suppressed: when both kinds
    mark the same junction only the explicit connective is used.
    """
    if not tokens:
        raise ValueError("find_delimiters requires a non-empty token sequence")
    hits: list[DelimiterHit] = []
    n = len(tokens)
    i = 0
    while i < n:
        hit = None
        for width in range(min(lib.max_phrase_len, n - i), 0, -1):
            phrase = tuple(tokens[i : i + width])
            if phrase in lib.explicit_set:
                hit = DelimiterHit(i, i + width, Kind.EXPLICIT, " ".join(phrase))
                break
        if hit is None and tokens[i] in lib.implicit_set:
            hit = DelimiterHit(i, i + 1, Kind.IMPLICIT, tokens[i])
        if hit is None:
            i += 1
            continue
        if hit.start > 0:
            hits.append(hit)
        i = hit.end

    explicit_starts = {h.start for h in hits if h.kind is Kind.EXPLICIT}
    explicit_ends = {h.end for h in hits if h.kind is Kind.EXPLICIT}
    return [
        h
        for h in hits
        if h.kind is Kind.EXPLICIT
        or (h.end not in explicit_starts and h.start not in explicit_ends)
    ]
