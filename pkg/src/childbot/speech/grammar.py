"""Sentence grammars and grammar-constrained recognition over word tokens.

File format, one entry per line::

    # comment
    @game cooperative
    NEG<TAB>no I don't know

Tokens are lower-cased and split on whitespace.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..accel import njit, pick

GAMES = ("single", "cooperative")


class ParseError(ValueError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DuplicateSentence(ValueError):
    pass


class EmptyGrammar(ValueError):
    pass


def tokenize(text) -> tuple:
    return tuple(str(text).lower().split())


@dataclass
class Grammar:
    sentences: list  # tuples of tokens
    labels: list
    game: str = "single"
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.sentences = [tuple(s) for s in self.sentences]
        if not self.sentences:
            raise EmptyGrammar("grammar has no sentences")
        if len(self.labels) != len(self.sentences):
            raise ValueError("one label per sentence")
        if any(not lab for lab in self.labels):
            raise ValueError("labels must be non-empty")
        if self.game not in GAMES:
            raise ValueError(f"game must be one of {GAMES}")
        seen = {}
        for i, s in enumerate(self.sentences):
            if not s or any(not t for t in s):
                raise ValueError(f"sentence {i} is empty")
            if s in seen:
                raise DuplicateSentence(" ".join(s))
            seen[s] = i
        self._index = seen
        vocab = {}
        for s in self.sentences:
            for t in s:
                vocab.setdefault(t, len(vocab))
        self.vocab = vocab
        self._ids = [np.array([vocab[t] for t in s], dtype=np.int64) for s in self.sentences]
        self._flat = np.concatenate(self._ids)
        self._offsets = np.cumsum([0] + [len(s) for s in self.sentences]).astype(np.int64)

    def __len__(self):
        return len(self.sentences)

    def label_of(self, tokens):
        i = self._index.get(tuple(tokens))
        return None if i is None else self.labels[i]

    def encode(self, tokens) -> np.ndarray:
        # out-of-vocabulary words get ids that match nothing in the grammar
        oov = len(self.vocab)
        return np.array([self.vocab.get(t, oov) for t in tokens], dtype=np.int64)

    def to_text(self) -> str:
        lines = [f"@game {self.game}"]
        lines += [f"{lab}\t{' '.join(s)}" for s, lab in zip(self.sentences, self.labels)]
        return "\n".join(lines) + "\n"


def parse_grammar(text) -> Grammar:
    sentences, labels, game = [], [], "single"
    seen = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("@"):
            parts = line[1:].split()
            if len(parts) != 2 or parts[0] != "game" or parts[1] not in GAMES:
                raise ParseError(n, f"bad directive {line!r}")
            game = parts[1]
            continue
        if "\t" not in raw:
            raise ParseError(n, "expected LABEL<TAB>sentence")
        label, sentence = raw.split("\t", 1)
        label = label.strip()
        tokens = tokenize(sentence)
        if not label:
            raise ParseError(n, "empty label")
        if not tokens:
            raise ParseError(n, "empty sentence")
        if tokens in seen:
            raise DuplicateSentence(f"line {n} repeats line {seen[tokens]}: {' '.join(tokens)}")
        seen[tokens] = n
        sentences.append(tokens)
        labels.append(label)
    if not sentences:
        raise ParseError(0, "grammar file has no entries")
    return Grammar(sentences, labels, game)


def load_grammar(path) -> Grammar:
    return parse_grammar(Path(path).read_text(encoding="utf-8"))


def demo_grammar_path() -> Path:
    return Path(__file__).parent / "data" / "demo.tsv"


# word-level Levenshtein

def _lev_numpy(a, b):
    prev = np.arange(len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = np.empty_like(prev)
        cur[0] = i
        sub = prev[:-1] + (b != a[i - 1])
        for j in range(1, len(b) + 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, sub[j - 1])
        prev = cur
    return int(prev[-1])


@njit
def _lev_numba(a, b):
    m = b.shape[0]
    prev = np.empty(m + 1, dtype=np.int64)
    cur = np.empty(m + 1, dtype=np.int64)
    for j in range(m + 1):
        prev[j] = j
    for i in range(1, a.shape[0] + 1):
        cur[0] = i
        for j in range(1, m + 1):
            c = prev[j - 1] + (0 if a[i - 1] == b[j - 1] else 1)
            if prev[j] + 1 < c:
                c = prev[j] + 1
            if cur[j - 1] + 1 < c:
                c = cur[j - 1] + 1
            cur[j] = c
        for j in range(m + 1):
            prev[j] = cur[j]
    return prev[m]


def _all_numpy(x, flat, offsets):
    return np.array([_lev_numpy(x, flat[offsets[k]:offsets[k + 1]])
                     for k in range(len(offsets) - 1)], dtype=np.int64)


@njit
def _all_numba(x, flat, offsets):
    n = offsets.shape[0] - 1
    out = np.empty(n, dtype=np.int64)
    for k in range(n):
        out[k] = _lev_numba(x, flat[offsets[k]:offsets[k + 1]])
    return out


levenshtein_ids = pick(_lev_numba, _lev_numpy)
_all_distances = pick(_all_numba, _all_numpy)


def word_distance(a, b) -> int:
    vocab = {}
    ia = np.array([vocab.setdefault(t, len(vocab)) for t in a], dtype=np.int64)
    ib = np.array([vocab.setdefault(t, len(vocab)) for t in b], dtype=np.int64)
    return int(levenshtein_ids(ia, ib))


@dataclass
class Recognition:
    sentence: tuple
    label: str
    distance: int
    index: int


def distances(tokens, grammar: Grammar) -> np.ndarray:
    return _all_distances(grammar.encode(tokens), grammar._flat, grammar._offsets)


def recognize_constrained(tokens, grammar: Grammar) -> Recognition:
    """Grammar sentence nearest in word edit distance; ties go to the earliest."""
    if grammar is None or len(grammar) == 0:
        raise EmptyGrammar("no grammar to recognise against")
    tokens = tokenize(tokens) if isinstance(tokens, str) else tuple(tokens)
    if not tokens:
        raise ValueError("empty token sequence")
    d = distances(tokens, grammar)
    i = int(np.argmin(d))
    return Recognition(grammar.sentences[i], grammar.labels[i], int(d[i]), i)
