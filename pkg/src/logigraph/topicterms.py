"""Topic-related term detection.

Recurring stemmed n-grams act as instantiated logical variables: stemming
first unifies morphological variants, a sliding window then collects n-grams
that occur at least twice, and stopword-only or overlapped windows are
filtered out.  Occurrences are tagged onto the EDU nodes that contain them.
"""

from dataclasses import dataclass
from pathlib import Path

from .errors import LibraryError
from .segmentation import EDU

_VOWELS = "aeiou"


def _is_cons(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_cons(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of VC sequences in [C](VC)^m[V]."""
    n = 0
    i = 0
    ln = len(stem)
    while i < ln and _is_cons(stem, i):
        i += 1
    while True:
        while i < ln and not _is_cons(stem, i):
            i += 1
        if i >= ln:
            return n
        n += 1
        while i < ln and _is_cons(stem, i):
            i += 1


def _has_vowel(stem: str) -> bool:
    return any(not _is_cons(stem, i) for i in range(len(stem)))


def _double_cons(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_cons(word, len(word) - 1)


def _cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    if (
        _is_cons(word, len(word) - 3)
        and not _is_cons(word, len(word) - 2)
        and _is_cons(word, len(word) - 1)
    ):
        return word[-1] not in "wxy"
    return False


_STEP2 = (
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
)

_STEP3 = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
)

_STEP4 = (
    "ement", "ance", "ence", "able", "ible", "ment", "ant", "ent", "ion",
    "ism", "ate", "iti", "ous", "ive", "ize", "al", "er", "ic", "ou",
)


def stem(token: str) -> str:
    """Porter suffix stripping, iterated to a fixed point.

    A single Porter pass is not idempotent (``house -> hous -> hou``);
    iterating until stable makes re-stemming a no-op, which downstream
    term matching relies on.  Non-alphabetic tokens pass through unchanged.
    """
    if not token.isalpha():
        return token
    w = token
    for _ in range(8):
        nxt = _porter_pass(w)
        if nxt == w:
            return w
        w = nxt
    return w


def _porter_pass(token: str) -> str:
    if len(token) <= 2:
        return token
    w = token

    # step 1a
    if w.endswith("sses") or w.endswith("ies"):
        w = w[:-2]
    elif not w.endswith("ss") and w.endswith("s"):
        w = w[:-1]

    # step 1b
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            w = w[:-1]
    else:
        stripped = False
        if w.endswith("ed") and _has_vowel(w[:-2]):
            w = w[:-2]
            stripped = True
        elif w.endswith("ing") and _has_vowel(w[:-3]):
            w = w[:-3]
            stripped = True
        if stripped:
            if w.endswith(("at", "bl", "iz")):
                w += "e"
            elif _double_cons(w) and w[-1] not in "lsz":
                w = w[:-1]
            elif _measure(w) == 1 and _cvc(w):
                w += "e"

    # step 1c
    if w.endswith("y") and _has_vowel(w[:-1]):
        w = w[:-1] + "i"

    # step 2
    for suf, rep in _STEP2:
        if w.endswith(suf):
            if _measure(w[: -len(suf)]) > 0:
                w = w[: -len(suf)] + rep
            break

    # step 3
    for suf, rep in _STEP3:
        if w.endswith(suf):
            if _measure(w[: -len(suf)]) > 0:
                w = w[: -len(suf)] + rep
            break

    # step 4
    for suf in _STEP4:
        if w.endswith(suf):
            base = w[: -len(suf)]
            if _measure(base) > 1 and (suf != "ion" or base.endswith(("s", "t"))):
                w = base
            break

    # step 5a
    if w.endswith("e"):
        base = w[:-1]
        m = _measure(base)
        if m > 1 or (m == 1 and not _cvc(base)):
            w = base

    # step 5b
    if _measure(w) > 1 and _double_cons(w) and w.endswith("l"):
        w = w[:-1]

    return w


STOPWORDS = frozenset("""
a about above accordingly after again against all almost also although always am an and another any
anyway are aren't as at be because been before being below besides between both but by can cannot
consequently could couldn't did didn't do does doesn't doing don't down during each either else ever
every few finally for from further had hadn't has hasn't have haven't having he hence her here hers
herself him himself his how however i if in indeed instead into is isn't it its itself just least
let's like likewise many may maybe me meanwhile might mine moreover most much must mustn't my myself
neither never nevertheless next no nonetheless nor not now of off often on once one only onto or
other otherwise ought our ours ourselves out over own per rather regardless said same second shall
she should shouldn't similarly simultaneously since so some something sometimes soon still such than
that the their theirs them themselves then there thereafter thereby therefore these they third this
those though through thus till to too two under unless until up upon us very was wasn't we were
weren't what when where whereas whether which while who whom why will with within without won't
would wouldn't yet you your yours yourself yourselves
""".split())


def load_stopwords(path: str | Path) -> frozenset:
    """Read a one-word-per-line stopword file."""
    words = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        word = line.strip().lower()
        if not word:
            continue
        if " " in word or "\t" in word:
            raise LibraryError(f"{path}: line {lineno}: stopwords are single words")
        words.add(word)
    return frozenset(words)


@dataclass(frozen=True)
class TopicTerm:
    """A recurring stemmed n-gram and where it survives overlap filtering.

    ``occurrences`` holds (node id, token start, token end) triples; the raw
    recurrence count (pre-filter) is at least two, and at least one
    occurrence survives the overlap filter.
    """

    stems: tuple[str, ...]
    occurrences: tuple[tuple[int, int, int], ...]


def _contained(occ, spans) -> bool:
    return any(s <= occ[1] and occ[2] <= e for s, e in spans)


def _overlapping(occ, spans) -> bool:
    return any(occ[1] < e and s < occ[2] for s, e in spans)


def detect_terms(
    edus: list[EDU],
    tokens: list[str],
    stopwords: frozenset = STOPWORDS,
    max_n: int = 4,
) -> list[TopicTerm]:
    """Collect recurring stemmed n-grams and attach them to nodes.

    Windows slide within each EDU (a phrase never crosses a delimiter).
    Windows containing punctuation or special markers are skipped, as are
    windows made solely of stopwords.  An n-gram needs two raw occurrences;
    occurrences contained in a longer retained term, or overlapping an
    earlier retained term of the same length, are pruned.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    stems = [stem(t) for t in tokens]
    word_like = [t.isalpha() for t in tokens]

    raw: dict[tuple[str, ...], list[tuple[int, int, int]]] = {}
    for edu in edus:
        for n in range(1, max_n + 1):
            for s in range(edu.start, edu.end - n + 1):
                if not all(word_like[s : s + n]):
                    continue
                if all(t in stopwords for t in tokens[s : s + n]):
                    continue
                key = tuple(stems[s : s + n])
                raw.setdefault(key, []).append((edu.id, s, s + n))

    recurring = {k: v for k, v in raw.items() if len(v) >= 2}

    retained: list[TopicTerm] = []
    spans_by_len: dict[int, list[tuple[int, int]]] = {}
    for length in range(max_n, 0, -1):
        longer_spans = [sp for ln, sps in spans_by_len.items() if ln > length for sp in sps]
        level_spans: list[tuple[int, int]] = []
        keys = sorted(
            (k for k in recurring if len(k) == length),
            key=lambda k: (recurring[k][0][1], k),
        )
        for key in keys:
            surviving = tuple(
                occ
                for occ in recurring[key]
                if not _contained(occ, longer_spans) and not _overlapping(occ, level_spans)
            )
            if surviving:
                retained.append(TopicTerm(stems=key, occurrences=surviving))
                level_spans.extend((s, e) for _, s, e in surviving)
        spans_by_len[length] = level_spans

    retained.sort(key=lambda t: (t.occurrences[0][1], -len(t.stems), t.stems))
    return retained
