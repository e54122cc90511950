import functools
import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from childbot.speech import (
    DuplicateSentence,
    EmptyGrammar,
    Grammar,
    LengthMismatch,
    ParseError,
    align,
    demo_grammar_path,
    evaluate_transcripts,
    levenshtein_ids,
    load_grammar,
    parse_grammar,
    read_transcripts,
    recognize_constrained,
    score_recognition,
    word_distance,
)
from childbot.speech.grammar import _lev_numba, _lev_numpy

FIXTURE_GRAMMAR = "YES\tyes\nDONE\tI am done\nNEG\tno I don't know\nNEG\tno\nANIMAL\tthe cow\nHELP\thelp me\nHELP\thelp\n"

# 12 reference words; one substitution (don't -> do) and one deletion (me)
FIXTURE = [
    ("yes", "yes"),
    ("I am done", "I am done"),
    ("no I don't know", "no I do know"),
    ("the cow", "the cow"),
    ("help me", "help"),
]


def oracle_distance(a, b):
    """Plain recursive edit distance, memoised."""
    a, b = tuple(a), tuple(b)

    @functools.lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))


# parsing

def test_negation_variants():
    g = parse_grammar("NEG\tno\nNEG\tno I don't know\n")
    assert len(g) == 2
    assert set(g.labels) == {"NEG"}
    assert g.sentences[1] == ("no", "i", "don't", "know")


def test_duplicate_rejected():
    with pytest.raises(DuplicateSentence):
        parse_grammar("NEG\tno\nYES\tNo\n")


def test_empty_file():
    with pytest.raises(ParseError):
        parse_grammar("")
    with pytest.raises(ParseError):
        parse_grammar("# only a comment\n\n")


@pytest.mark.parametrize("text,line", [
    ("NEG no tab\n", 1),
    ("YES\tyes\n\tno label\n", 2),
    ("YES\tyes\nNEG\t   \n", 2),
    ("@game solo\nYES\tyes\n", 1),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as e:
        parse_grammar(text)
    assert e.value.line == line


def test_game_directive_and_roundtrip():
    g = parse_grammar("# farm\n@game cooperative\nANIMAL\tthe cow\nANIMAL\tthe pig\n")
    assert g.game == "cooperative"
    back = parse_grammar(g.to_text())
    assert back.sentences == g.sentences and back.labels == g.labels and back.game == g.game


def test_demo_grammar_loads():
    g = load_grammar(demo_grammar_path())
    assert len(g) > 20
    assert "NEG" in g.labels


def test_empty_grammar_object():
    with pytest.raises(EmptyGrammar):
        Grammar([], [])


# recognition

def test_exact_match():
    g = parse_grammar(FIXTURE_GRAMMAR)
    r = recognize_constrained("I am done", g)
    assert r.sentence == ("i", "am", "done") and r.distance == 0 and r.label == "DONE"


def test_one_substitution():
    g = parse_grammar(FIXTURE_GRAMMAR)
    r = recognize_constrained("the dog", g)
    assert r.sentence == ("the", "cow") and r.distance == 1


def test_ties_go_to_earliest():
    g = parse_grammar("A\tred ball\nB\tblue ball\n")
    r = recognize_constrained("green ball", g)
    assert r.label == "A" and r.distance == 1


def test_levenshtein_kernels_agree():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a = rng.integers(0, 5, rng.integers(0, 9))
        b = rng.integers(0, 5, rng.integers(0, 9))
        want = oracle_distance(a.tolist(), b.tolist())
        assert _lev_numba(a, b) == want
        assert _lev_numpy(a, b) == want
        assert levenshtein_ids(a, b) == want


def random_grammar(rng, n, vocab=30):
    words = [f"w{i}" for i in range(vocab)]
    seen, sents = set(), []
    while len(sents) < n:
        s = tuple(rng.choice(words, int(rng.integers(1, 7))))
        if s not in seen:
            seen.add(s)
            sents.append(s)
    labels = [f"L{int(rng.integers(0, 8))}" for _ in sents]
    return Grammar(sents, labels)


def corrupt(tokens, rng, rate=0.1, vocab=30):
    out = []
    for t in tokens:
        r = rng.random()
        if r < rate / 3:
            continue
        if r < 2 * rate / 3:
            out.append(f"w{int(rng.integers(0, vocab))}")
        elif r < rate:
            out += [t, f"w{int(rng.integers(0, vocab))}"]
        else:
            out.append(t)
    return out or list(tokens[:1])


@pytest.mark.parametrize("size", [1, 17, 200])
def test_matches_brute_force(size):
    rng = np.random.default_rng(size)
    g = random_grammar(rng, size)
    for _ in range(40):
        src = g.sentences[int(rng.integers(len(g)))]
        utt = corrupt(src, rng, 0.3)
        r = recognize_constrained(utt, g)
        dists = [oracle_distance(utt, s) for s in g.sentences]
        assert r.distance == min(dists)
        assert r.index == dists.index(min(dists))


def test_corrupted_utterances_against_oracle():
    rng = np.random.default_rng(42)
    g = random_grammar(rng, 150)
    ours = oracle = 0
    for _ in range(500):
        k = int(rng.integers(len(g)))
        utt = corrupt(g.sentences[k], rng, 0.1)
        r = recognize_constrained(utt, g)
        dists = [oracle_distance(utt, s) for s in g.sentences]
        best = dists.index(min(dists))
        ours += r.label == g.labels[k]
        oracle += g.labels[best] == g.labels[k]
    assert ours == oracle
    assert ours / 500 > 0.8


# alignment and scores

def test_align_counts():
    assert align(("a", "b", "c"), ("a", "x", "c")) == (1, 0, 0)
    assert align(("a", "b", "c"), ("a", "c")) == (0, 1, 0)
    assert align(("a", "c"), ("a", "b", "c")) == (0, 0, 1)
    assert sum(align(("a",) * 3, ())) == 3


def test_identity_scores():
    refs = [r for r, _ in FIXTURE]
    s = score_recognition(refs, refs, parse_grammar(FIXTURE_GRAMMAR))
    assert (s.wcor, s.scor, s.labelcor) == (100.0, 100.0, 100.0)


def test_negation_label_hit_sentence_miss():
    g = parse_grammar(FIXTURE_GRAMMAR)
    s = score_recognition(["no"], ["no I don't know"], g)
    assert s.scor == 0.0 and s.labelcor == 100.0


def test_fixture_hand_values():
    g = parse_grammar(FIXTURE_GRAMMAR)
    refs = [r for r, _ in FIXTURE]
    hyps = [h for _, h in FIXTURE]
    s = score_recognition(hyps, refs, g)
    assert s.n_words == 12
    assert (s.subs, s.dels, s.ins) == (1, 1, 0)
    assert s.wcor == 100.0 * (1 - 2 / 12)
    assert round(s.wcor, 2) == 83.33
    assert s.scor == 60.0
    # "help" carries HELP like "help me"; "no I do know" is not a grammar sentence
    assert s.labelcor == 80.0


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        score_recognition(["a"], ["a", "b"])


def random_transcripts(rng, g, n):
    hyps, refs = [], []
    for _ in range(n):
        ref = g.sentences[int(rng.integers(len(g)))]
        r = rng.random()
        if r < 0.4:
            hyp = ref
        elif r < 0.7:
            hyp = g.sentences[int(rng.integers(len(g)))]
        else:
            hyp = tuple(corrupt(ref, rng, 0.5))
        hyps.append(hyp)
        refs.append(ref)
    return hyps, refs


def test_scor_bounded_by_labelcor_1000():
    rng = np.random.default_rng(5)
    g = random_grammar(rng, 60)
    for _ in range(1000):
        hyps, refs = random_transcripts(rng, g, int(rng.integers(1, 8)))
        s = score_recognition(hyps, refs, g)
        assert s.scor <= s.labelcor
        assert s.wcor <= 100.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    g = random_grammar(rng, 20)
    hyps, refs = random_transcripts(rng, g, 12)
    order = list(range(12))
    random.Random(seed).shuffle(order)
    a = score_recognition(hyps, refs, g)
    b = score_recognition([hyps[i] for i in order], [refs[i] for i in order], g)
    assert a == b


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from("abcd"), max_size=8), st.lists(st.sampled_from("abcd"), max_size=8))
def test_alignment_cost_is_edit_distance(a, b):
    assert sum(align(a, b)) == oracle_distance(a, b) == word_distance(a, b)


def test_transcript_file(tmp_path):
    g = parse_grammar(FIXTURE_GRAMMAR)
    p = tmp_path / "t.jsonl"
    p.write_text("".join(json.dumps({"ref": r, "hyp": h}) + "\n" for r, h in FIXTURE))
    recs = read_transcripts(p)
    out = evaluate_transcripts(recs, g)
    assert round(out["raw"]["wcor"], 2) == 83.33
    # snapping "no I do know" to the grammar recovers the sentence
    assert out["constrained"]["scor"] == 80.0
