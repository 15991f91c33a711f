import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logigraph.delimiters import load_library
from logigraph.errors import LibraryError
from logigraph.segmentation import Origin, TokenizedText, segment
from logigraph.topicterms import STOPWORDS, detect_terms, load_stopwords, stem


class TestStem:
    @pytest.mark.parametrize(
        "word,expected",
        [
            ("systems", "system"),
            ("signals", "signal"),
            ("a", "a"),
            ("caresses", "caress"),
            ("ponies", "poni"),
            ("cats", "cat"),
            ("feed", "feed"),
            ("agreed", "agr"),
            ("agree", "agr"),
            ("motoring", "motor"),
            ("sing", "sing"),
            ("hopping", "hop"),
            ("sized", "size"),
            ("happy", "happi"),
            ("sky", "sky"),
            ("digital", "digit"),
            ("conflated", "conflat"),
            ("relational", "relat"),
            ("rational", "ration"),
            ("amplifies", "amplifi"),
            ("amplify", "amplifi"),
        ],
    )
    def test_known_reductions(self, word, expected):
        assert stem(word) == expected

    def test_non_alpha_passthrough(self):
        assert stem(",") == ","
        assert stem("42") == "42"
        assert stem("<s>") == "<s>"

    @settings(max_examples=400, deadline=None)
    @given(st.from_regex(r"[a-z]{3,14}", fullmatch=True))
    def test_idempotent(self, word):
        once = stem(word)
        assert stem(once) == once

    def test_plural_singular_unify(self):
        assert stem("signals") == stem("signal")
        assert stem("systems") == stem("system")


def _segment(text):
    lib = load_library(None)
    from logigraph.segmentation import tokenize

    tokens = tokenize(text)
    edus, _ = segment(TokenizedText(tuple(tokens), Origin.CONTEXT), lib)
    return edus, tokens


class TestDetectTerms:
    def test_nothing_recurs(self):
        edus, tokens = _segment("every word here differs completely")
        assert detect_terms(edus, tokens) == []

    def test_red_fox(self):
        edus, tokens = _segment("red fox red fox red")
        terms = detect_terms(edus, tokens, max_n=2)
        by_stems = {t.stems: t for t in terms}
        assert ("red", "fox") in by_stems
        assert [o[1:] for o in by_stems[("red", "fox")].occurrences] == [(0, 2), (2, 4)]
        # the unigram survives only through its third, uncovered occurrence
        assert ("red",) in by_stems
        assert [o[1:] for o in by_stems[("red",)].occurrences] == [(4, 5)]
        # fully covered or fully overlapped n-grams are gone
        assert ("fox",) not in by_stems
        assert ("fox", "red") not in by_stems

    def test_morphology_unifies_occurrences(self):
        edus, tokens = _segment(
            "digital systems process data , while a digital system stores it"
        )
        terms = detect_terms(edus, tokens)
        stems_sets = {t.stems for t in terms}
        assert ("digit", "system") in stems_sets

    def test_stopword_only_windows_dropped(self):
        # "a" recurs but is a stopword; only the noun qualifies
        edus, tokens = _segment("a cat sat on a mat near this cat")
        stems_sets = {t.stems for t in detect_terms(edus, tokens)}
        assert ("cat",) in stems_sets
        assert ("a",) not in stems_sets
        assert ("a", "cat") not in stems_sets

    def test_occurrences_reference_valid_nodes(self):
        edus, tokens = _segment("alpha beta , because alpha beta runs . alpha beta")
        terms = detect_terms(edus, tokens)
        for term in terms:
            for node, s, e in term.occurrences:
                assert 0 <= node < len(edus)
                assert edus[node].start <= s < e <= edus[node].end

    def test_windows_do_not_cross_unit_boundaries(self):
        # "beta , alpha" recurs as raw tokens but the comma splits units, so
        # no bigram spanning the junction is ever counted
        edus, tokens = _segment("beta , alpha runs . beta , alpha sits")
        terms = detect_terms(edus, tokens)
        for t in terms:
            assert "," not in t.stems

    def test_max_n_validation(self):
        edus, tokens = _segment("a b")
        with pytest.raises(ValueError):
            detect_terms(edus, tokens, max_n=0)

    def test_raw_recurrence_at_least_two(self):
        edus, tokens = _segment("gamma delta runs . gamma delta sits . epsilon")
        for term in detect_terms(edus, tokens):
            assert len(term.occurrences) >= 1
            assert "epsilon" not in term.stems


class TestStability:
    def test_canonical_order(self):
        edus, tokens = _segment("red fox red fox red")
        terms = detect_terms(edus, tokens, max_n=2)
        keys = [(t.occurrences[0][1], -len(t.stems)) for t in terms]
        assert keys == sorted(keys)

    def test_deterministic(self):
        edus, tokens = _segment("blue jay blue jay blue sky blue sky")
        assert detect_terms(edus, tokens) == detect_terms(edus, tokens)


def test_stopword_file_roundtrip(tmp_path):
    p = tmp_path / "stop.txt"
    p.write_text("foo\nbar\n", encoding="utf-8")
    words = load_stopwords(p)
    assert words == frozenset({"foo", "bar"})
    bad = tmp_path / "bad.txt"
    bad.write_text("two words\n", encoding="utf-8")
    with pytest.raises(LibraryError, match="line 1"):
        load_stopwords(bad)


def test_builtin_stopwords_cover_function_words():
    for w in ("the", "a", "of", "and", "because", "is", "while"):
        assert w in STOPWORDS
