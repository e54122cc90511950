"""WCOR / SCOR / LabelCOR scoring of recognised transcripts."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .grammar import Grammar, recognize_constrained, tokenize


class LengthMismatch(ValueError):
    pass


def align(ref, hyp) -> tuple:
    """(substitutions, deletions, insertions) of a minimum-cost word alignment.

    Ties prefer a match or substitution, then deletion, then insertion.
    """
    n, m = len(ref), len(hyp)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]),
                          d[i - 1][j] + 1, d[i][j - 1] + 1)
    s = dl = ins = 0
    i, j = n, m
    while i or j:
        if i and j and d[i][j] == d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            s += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i and d[i][j] == d[i - 1][j] + 1:
            dl += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return s, dl, ins


@dataclass
class Scores:
    wcor: float
    scor: float
    labelcor: float
    n_words: int
    n_utts: int
    subs: int
    dels: int
    ins: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _tokens(x):
    return tokenize(x) if isinstance(x, str) else tuple(x)


def score_recognition(hyps, refs, label_map=None, ref_labels=None) -> Scores:
    """Scores over aligned hypothesis / reference lists.

    ``label_map`` maps a sentence (token tuple) to its label, e.g. a
    ``Grammar``.  A reference's label is ``ref_labels[i]`` when given, otherwise
    its ``label_map`` entry.  An exact sentence match always counts as a label
    hit.
    """
    hyps = [_tokens(h) for h in hyps]
    refs = [_tokens(r) for r in refs]
    if len(hyps) != len(refs) or (ref_labels is not None and len(ref_labels) != len(refs)):
        raise LengthMismatch(f"{len(hyps)} hypotheses for {len(refs)} references")
    if not refs:
        raise LengthMismatch("nothing to score")
    if isinstance(label_map, Grammar):
        lookup = label_map.label_of
    elif label_map is not None:
        table = {_tokens(k): v for k, v in dict(label_map).items()}
        lookup = table.get
    else:
        lookup = lambda s: None  # noqa: E731
    S = D = I = N = exact = lab = 0
    for i, (h, r) in enumerate(zip(hyps, refs)):
        s, d, ins = align(r, h)
        S, D, I, N = S + s, D + d, I + ins, N + len(r)
        if h == r:
            exact += 1
            lab += 1
            continue
        want = ref_labels[i] if ref_labels is not None else lookup(r)
        got = lookup(h)
        lab += want is not None and got == want
    n = len(refs)
    wcor = 100.0 * (1.0 - (S + D + I) / N) if N else 0.0
    return Scores(wcor, 100.0 * exact / n, 100.0 * lab / n, N, n, S, D, I)


def read_transcripts(path) -> list:
    """JSON lines with ``ref`` and ``hyp`` (strings) and an optional ``label``."""
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        rec = json.loads(line)
        if "ref" not in rec or "hyp" not in rec:
            raise ValueError(f"line {n}: transcript needs ref and hyp")
        out.append(rec)
    return out


def evaluate_transcripts(records, grammar: Grammar) -> dict:
    """Scores for the raw hypotheses and after snapping each to the grammar."""
    refs = [r["ref"] for r in records]
    labels = [r.get("label") for r in records]
    ref_labels = labels if all(lb is not None for lb in labels) else None
    raw = [r["hyp"] for r in records]
    snapped = [recognize_constrained(h, grammar).sentence if tokenize(h) else () for h in raw]
    return {
        "raw": score_recognition(raw, refs, grammar, ref_labels).to_dict(),
        "constrained": score_recognition(snapped, refs, grammar, ref_labels).to_dict(),
    }
