"""Comparison taggers: a feature-based linear-chain CRF trained as an
averaged structured perceptron, and a majority-class tagger."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .checkpoint import CRF_MAGIC, CheckpointError, read_container, write_container
from .corpus import DEFAULT_ALIASES, N_LABELS, Label, Phrase, Token

BOS, EOS = "<BOS>", "<EOS>"
_NUMERIC = re.compile(r"^[\d¼½¾⅓⅔⅛⅜⅝⅞]+([./-][\d]+)*(/\d+)?$")
_PUNCT = re.compile(r"^[^\w\s]+$")


def word_shape(s: str) -> str:
    """Collapsed character classes, e.g. ``Cream`` -> ``Xx``, ``1/2`` -> ``d/d``."""
    out = []
    for ch in s:
        c = "X" if ch.isupper() else "x" if ch.isalpha() else "d" if ch.isdigit() else ch
        if not out or out[-1] != c:
            out.append(c)
    return "".join(out)


def extract_features(tokens: Sequence[Token], position: int) -> list[str]:
    """Feature ids for one position.

    Templates: bias; current/previous/next lower-cased word; POS of the
    current token and its neighbours and their trigram; is_numeric;
    has_slash; 2- and 3-char suffixes; is_punct; word shape.
    """
    if not 0 <= position < len(tokens):
        raise IndexError(f"position {position} outside phrase of length {len(tokens)}")
    tok = tokens[position]
    w = tok.lower
    prev_w = tokens[position - 1].lower if position > 0 else BOS
    next_w = tokens[position + 1].lower if position + 1 < len(tokens) else EOS
    prev_p = tokens[position - 1].pos if position > 0 else BOS
    next_p = tokens[position + 1].pos if position + 1 < len(tokens) else EOS
    feats = [
        "bias",
        f"w={w}",
        f"prev={prev_w}",
        f"next={next_w}",
        f"pos={tok.pos}",
        f"pos_prev={prev_p}",
        f"pos_next={next_p}",
        f"pos3={prev_p}|{tok.pos}|{next_p}",
        f"suf2={w[-2:]}",
        f"suf3={w[-3:]}",
        f"shape={word_shape(tok.surface)}",
    ]
    if _NUMERIC.match(w):
        feats.append("is_numeric")
    if "/" in w:
        feats.append("has_slash")
    if _PUNCT.match(w):
        feats.append("is_punct")
    return feats


@dataclass
class CrfModel:
    """Linear-chain scores: emission rows per feature id plus label bigrams."""

    feature_index: dict[str, int] = field(default_factory=dict)
    emission: np.ndarray = field(default_factory=lambda: np.zeros((0, N_LABELS)))
    transitions: np.ndarray = field(default_factory=lambda: np.zeros((N_LABELS, N_LABELS)))
    start: np.ndarray = field(default_factory=lambda: np.zeros(N_LABELS))
    stop: np.ndarray = field(default_factory=lambda: np.zeros(N_LABELS))
    label_aliases: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_ALIASES))

    @property
    def n_labels(self) -> int:
        return self.transitions.shape[0]

    def feature_ids(self, phrase: Phrase) -> tuple[np.ndarray, np.ndarray]:
        """CSR layout (indptr, ids) of the known features of every position."""
        indptr = [0]
        ids: list[int] = []
        for i in range(len(phrase)):
            for f in extract_features(phrase.tokens, i):
                j = self.feature_index.get(f)
                if j is not None:
                    ids.append(j)
            indptr.append(len(ids))
        return np.asarray(indptr, dtype=np.int64), np.asarray(ids, dtype=np.int64)

    def emission_scores(self, phrase: Phrase) -> np.ndarray:
        indptr, ids = self.feature_ids(phrase)
        return _kernels.emission_scores(indptr, ids, np.ascontiguousarray(self.emission))

    def path_score(self, emit: np.ndarray, path: Sequence[int]) -> float:
        return path_score(emit, self.transitions, self.start, self.stop, path)


def path_score(emit, trans, start, stop, path) -> float:
    score = start[path[0]] + emit[0, path[0]]
    for t in range(1, len(path)):
        score += trans[path[t - 1], path[t]] + emit[t, path[t]]
    return float(score + stop[path[-1]])


def viterbi_decode(emit: np.ndarray, trans: np.ndarray, start: np.ndarray,
                   stop: np.ndarray) -> tuple[list[int], float]:
    """Exact best path and its score for raw score arrays."""
    emit = np.ascontiguousarray(emit, dtype=np.float64)
    if emit.shape[0] < 1:
        raise ValueError("viterbi needs at least one position")
    path, score = _kernels.viterbi(emit, np.ascontiguousarray(trans, dtype=np.float64),
                                   np.ascontiguousarray(start, dtype=np.float64),
                                   np.ascontiguousarray(stop, dtype=np.float64))
    return [int(x) for x in path], float(score)


def viterbi(model: CrfModel, phrase: Phrase) -> list[Label]:
    if len(phrase) == 0:
        return []
    path, _ = viterbi_decode(model.emission_scores(phrase), model.transitions, model.start, model.stop)
    return [Label(x) for x in path]


def build_feature_index(phrases: Sequence[Phrase]) -> dict[str, int]:
    index: dict[str, int] = {}
    for ph in phrases:
        for i in range(len(ph)):
            for f in extract_features(ph.tokens, i):
                if f not in index:
                    index[f] = len(index)
    return index


class _Averager:
    """Averaged perceptron bookkeeping: ``avg = w - accum / c``."""

    def __init__(self, model: CrfModel):
        self.m = model
        self.acc_emit = np.zeros_like(model.emission)
        self.acc_trans = np.zeros_like(model.transitions)
        self.acc_start = np.zeros_like(model.start)
        self.acc_stop = np.zeros_like(model.stop)
        self.c = 1.0

    def update(self, indptr, ids, gold: np.ndarray, pred: np.ndarray) -> None:
        m, c = self.m, self.c
        _kernels.perceptron_update(m.emission, self.acc_emit, indptr, ids, gold, pred, c)
        for seq, sign in ((gold, 1.0), (pred, -1.0)):
            m.start[seq[0]] += sign
            self.acc_start[seq[0]] += sign * c
            m.stop[seq[-1]] += sign
            self.acc_stop[seq[-1]] += sign * c
            for a, b in zip(seq[:-1], seq[1:]):
                m.transitions[a, b] += sign
                self.acc_trans[a, b] += sign * c

    def finalize(self) -> CrfModel:
        m, c = self.m, self.c
        return CrfModel(
            feature_index=m.feature_index,
            emission=m.emission - self.acc_emit / c,
            transitions=m.transitions - self.acc_trans / c,
            start=m.start - self.acc_start / c,
            stop=m.stop - self.acc_stop / c,
            label_aliases=m.label_aliases,
        )


def perceptron_step(model: CrfModel, phrase: Phrase, averager: _Averager | None = None) -> bool:
    """Decode one phrase and update on mismatch; returns True if updated."""
    indptr, ids = model.feature_ids(phrase)
    emit = _kernels.emission_scores(indptr, ids, model.emission)
    pred, _ = viterbi_decode(emit, model.transitions, model.start, model.stop)
    gold = np.asarray(phrase.gold, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if np.array_equal(gold, pred):
        return False
    if averager is None:
        averager = _Averager(model)
    averager.update(indptr, ids, gold, pred)
    return True


def train_crf(train_set: Sequence[Phrase], epochs: int = 10, seed: int = 13,
              label_aliases=None) -> CrfModel:
    """Averaged structured perceptron over a shuffled corpus."""
    for i, ph in enumerate(train_set):
        if ph.gold is None:
            raise ValueError(f"phrase {i} ({ph.raw!r}) has no gold labels")
    index = build_feature_index(train_set)
    model = CrfModel(feature_index=index, emission=np.zeros((len(index), N_LABELS)))
    if label_aliases is not None:
        model.label_aliases = dict(label_aliases)
    if epochs <= 0:
        return model
    avg = _Averager(model)
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for i in rng.permutation(len(train_set)):
            if len(train_set[i]):
                perceptron_step(model, train_set[i], avg)
            avg.c += 1.0
    return avg.finalize()


def save_crf(model: CrfModel, path: str | Path) -> None:
    features = sorted(model.feature_index, key=model.feature_index.__getitem__)
    header = {"kind": "crf", "features": features, "n_labels": model.n_labels,
              "label_aliases": model.label_aliases}
    write_container(path, CRF_MAGIC, header, {
        "emission": model.emission, "transitions": model.transitions,
        "start": model.start, "stop": model.stop,
    })


def load_crf(path: str | Path) -> CrfModel:
    header, arrays = read_container(path, CRF_MAGIC)
    try:
        return CrfModel(
            feature_index={f: i for i, f in enumerate(header["features"])},
            emission=arrays["emission"],
            transitions=arrays["transitions"],
            start=arrays["start"],
            stop=arrays["stop"],
            label_aliases=dict(header["label_aliases"]),
        )
    except KeyError as e:
        raise CheckpointError(f"{path}: missing field {e}") from e


class MajorityTagger:
    """Predicts the most frequent training label for every token."""

    def __init__(self, label: Label = Label.NAME):
        self.label = label

    @classmethod
    def fit(cls, phrases: Sequence[Phrase]) -> "MajorityTagger":
        counts = Counter(lab for ph in phrases for lab in (ph.gold or ()))
        if not counts:
            return cls()
        top = max(counts.values())
        return cls(min(lab for lab, n in counts.items() if n == top))

    def __call__(self, phrase: Phrase) -> list[Label]:
        return [self.label] * len(phrase)
