"""Ingredient-phrase corpora: labels, tokenisation, TSV reading/writing."""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class CorpusError(ValueError):
    """Malformed corpus input."""


class Label(enum.IntEnum):
    NAME = 0
    STATE = 1
    UNIT = 2
    QUANTITY = 3
    SIZE = 4
    TEMPERATURE = 5
    DRY_FRESH = 6
    OTHERS = 7

    @property
    def key(self) -> str:
        """Lower-case name used in JSON output."""
        return self.name.lower()

    @property
    def title(self) -> str:
        return _TITLES[self]


_TITLES = {
    Label.NAME: "Name",
    Label.STATE: "State",
    Label.UNIT: "Unit",
    Label.QUANTITY: "Quantity",
    Label.SIZE: "Size",
    Label.TEMPERATURE: "Temperature",
    Label.DRY_FRESH: "Dry/Fresh",
    Label.OTHERS: "Others",
}

N_LABELS = len(Label)

# Upper-cased dataset tag -> canonical label.  User maps are merged on top.
DEFAULT_ALIASES: dict[str, str] = {
    "NAME": "NAME",
    "STATE": "STATE",
    "UNIT": "UNIT",
    "QUANTITY": "QUANTITY",
    "QTY": "QUANTITY",
    "SIZE": "SIZE",
    "TEMP": "TEMPERATURE",
    "TEMPERATURE": "TEMPERATURE",
    "DF": "DRY_FRESH",
    "DRY/FRESH": "DRY_FRESH",
    "DRY_FRESH": "DRY_FRESH",
    "DRYFRESH": "DRY_FRESH",
    "O": "OTHERS",
    "OTHER": "OTHERS",
    "OTHERS": "OTHERS",
}


def make_alias_table(extra: Mapping[str, str] | None = None) -> dict[str, str]:
    table = dict(DEFAULT_ALIASES)
    for k, v in (extra or {}).items():
        if v.upper() not in Label.__members__:
            raise CorpusError(f"alias {k!r} points at unknown label {v!r}")
        table[k.upper()] = v.upper()
    return table


def load_alias_file(path: str | Path) -> dict[str, str]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise CorpusError(f"{path}: alias file must hold a JSON object")
    return make_alias_table(data)


def resolve_label(tag: str, aliases: Mapping[str, str] | None = None) -> Label:
    table = aliases if aliases is not None else DEFAULT_ALIASES
    key = tag.strip().upper()
    if key[:2] in ("B-", "I-"):
        key = key[2:]
    try:
        return Label[table[key]]
    except KeyError:
        raise CorpusError(f"unknown label string {tag!r} (no alias)") from None


@dataclass(frozen=True)
class Token:
    surface: str
    lower: str
    pos: str
    span: tuple[int, int]


@dataclass(frozen=True)
class Phrase:
    raw: str
    tokens: tuple[Token, ...]
    gold: tuple[Label, ...] | None = None

    def __post_init__(self):
        if self.gold is not None and len(self.gold) != len(self.tokens):
            raise CorpusError(f"{len(self.gold)} labels for {len(self.tokens)} tokens in {self.raw!r}")

    def __len__(self):
        return len(self.tokens)

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    @property
    def labeled(self) -> bool:
        return self.gold is not None


# ---------------------------------------------------------------------------
# tokenisation
# ---------------------------------------------------------------------------

_SPLIT_CHARS = ",();:"


def _split_chunk(chunk: str, offset: int) -> list[tuple[str, int, int]]:
    lead: list[tuple[str, int, int]] = []
    trail: list[tuple[str, int, int]] = []
    i, j = 0, len(chunk)
    while i < j and chunk[i] in _SPLIT_CHARS:
        lead.append((chunk[i], offset + i, offset + i + 1))
        i += 1
    while j > i and chunk[j - 1] in _SPLIT_CHARS:
        j -= 1
        trail.append((chunk[j], offset + j, offset + j + 1))
    mid = [(chunk[i:j], offset + i, offset + j)] if j > i else []
    return lead + mid + trail[::-1]


def _make_tokens(pieces: Iterable[tuple[str, int, int]], tagger=None) -> tuple[Token, ...]:
    pieces = list(pieces)
    if tagger is None:
        from .features import pos_tag as tagger
    tags = tagger([p[0] for p in pieces])
    return tuple(Token(s, s.lower(), tag, (a, b)) for (s, a, b), tag in zip(pieces, tags))


def tokenize(raw: str) -> list[Token]:
    """Split on whitespace, then peel ``,();:`` off both ends of each chunk.

    Numerals such as ``1/2`` or ``2.5`` stay whole.  POS tags come from the
    built-in tagger.
    """
    pieces = []
    for m in re.finditer(r"\S+", raw):
        pieces.extend(_split_chunk(m.group(), m.start()))
    return list(_make_tokens(pieces))


def phrase_from_text(raw: str) -> Phrase:
    return Phrase(raw, tuple(tokenize(raw)))


def phrase_from_tokens(surfaces: Sequence[str], pos: Sequence[str] | None = None,
                       gold: Sequence[Label] | None = None) -> Phrase:
    """Build a phrase from pre-split tokens; raw text is their space join."""
    pieces, off = [], 0
    for s in surfaces:
        pieces.append((s, off, off + len(s)))
        off += len(s) + 1
    raw = " ".join(surfaces)
    if pos is None or any(p == "_" for p in pos):
        from .features import pos_tag
        auto = pos_tag(list(surfaces))
        pos = auto if pos is None else [a if p == "_" else p for p, a in zip(pos, auto)]
    tokens = tuple(Token(s, s.lower(), p, (a, b)) for (s, a, b), p in zip(pieces, pos))
    return Phrase(raw, tokens, tuple(gold) if gold is not None else None)


# ---------------------------------------------------------------------------
# TSV I/O
# ---------------------------------------------------------------------------


def read_tsv(lines: Iterable[str], aliases: Mapping[str, str] | None = None,
             source: str = "<input>") -> list[Phrase]:
    table = aliases if aliases is not None else DEFAULT_ALIASES
    phrases: list[Phrase] = []
    block: list[tuple[str, str, str]] = []

    def flush():
        if block:
            surfaces = [b[0] for b in block]
            pos = [b[1] for b in block]
            labels = [resolve_label(b[2], table) for b in block]
            phrases.append(phrase_from_tokens(surfaces, pos, labels))
            block.clear()

    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if line.startswith("#"):
            continue
        if not line.strip():
            flush()
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise CorpusError(f"{source}:{lineno}: expected 3 tab-separated columns, got {len(cols)}")
        surface, pos, tag = cols
        if not surface or not pos:
            raise CorpusError(f"{source}:{lineno}: empty token or POS column")
        try:
            resolve_label(tag, table)
        except CorpusError as e:
            raise CorpusError(f"{source}:{lineno}: {e}") from None
        block.append((surface, pos, tag))
    flush()
    return phrases


def load_corpus(path: str | Path, format: str = "tsv",
                aliases: Mapping[str, str] | None = None) -> list[Phrase]:
    """Read a labelled corpus; one :class:`Phrase` per blank-line block."""
    if format != "tsv":
        raise CorpusError(f"unsupported corpus format {format!r}")
    with open(path, encoding="utf-8") as f:
        return read_tsv(f, aliases, source=str(path))


def format_tsv(phrases: Iterable[Phrase]) -> str:
    out = []
    for ph in phrases:
        if ph.gold is None:
            raise CorpusError(f"cannot write unlabeled phrase {ph.raw!r}")
        for tok, lab in zip(ph.tokens, ph.gold):
            out.append(f"{tok.surface}\t{tok.pos}\t{lab.name}\n")
        out.append("\n")
    return "".join(out)


def write_corpus(phrases: Iterable[Phrase], path: str | Path) -> None:
    Path(path).write_text(format_tsv(phrases), encoding="utf-8")


# ---------------------------------------------------------------------------
# upstream dialects (normalised by `ingtag convert`)
# ---------------------------------------------------------------------------


def _read_conll(lines: Iterable[str], aliases, source) -> list[Phrase]:
    phrases, block = [], []

    def flush():
        if block:
            surfaces = [b[0] for b in block]
            pos = [b[1] for b in block]
            labels = [b[2] for b in block]
            phrases.append(phrase_from_tokens(surfaces, pos, labels))
            block.clear()

    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if line.startswith("#") or line.startswith("-DOCSTART-"):
            continue
        if not line:
            flush()
            continue
        cols = line.split()
        if len(cols) == 2:
            surface, pos, tag = cols[0], "_", cols[1]
        elif len(cols) >= 3:
            surface, pos, tag = cols[0], cols[1], cols[-1]
        else:
            raise CorpusError(f"{source}:{lineno}: expected TOKEN [POS] LABEL")
        try:
            block.append((surface, pos, resolve_label(tag, aliases)))
        except CorpusError as e:
            raise CorpusError(f"{source}:{lineno}: {e}") from None
    flush()
    return phrases


def _read_jsonl(lines: Iterable[str], aliases, source) -> list[Phrase]:
    phrases = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            labels = [resolve_label(t, aliases) for t in rec["labels"]]
            if "tokens" in rec:
                phrases.append(phrase_from_tokens(rec["tokens"], rec.get("pos"), labels))
            else:
                ph = phrase_from_text(rec["phrase"])
                phrases.append(Phrase(ph.raw, ph.tokens, tuple(labels)))
        except (KeyError, json.JSONDecodeError, CorpusError) as e:
            raise CorpusError(f"{source}:{lineno}: {e}") from None
    return phrases


DIALECTS = {
    "tsv": lambda lines, aliases, source: read_tsv(lines, aliases, source),
    "conll": _read_conll,
    "jsonl": _read_jsonl,
}


def read_dialect(path: str | Path, dialect: str, aliases: Mapping[str, str] | None = None) -> list[Phrase]:
    if dialect not in DIALECTS:
        raise CorpusError(f"unknown dialect {dialect!r}; supported: {', '.join(sorted(DIALECTS))}")
    with open(path, encoding="utf-8") as f:
        return DIALECTS[dialect](f, aliases if aliases is not None else DEFAULT_ALIASES, str(path))


# ---------------------------------------------------------------------------
# vocabulary and splits
# ---------------------------------------------------------------------------

UNK_INDEX = -1


@dataclass
class Vocab:
    index: dict[str, int] = field(default_factory=dict)
    oov: set[str] = field(default_factory=set)
    frozen: bool = False

    def __len__(self):
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def add(self, token: str) -> int:
        if token not in self.index:
            if self.frozen:
                return UNK_INDEX
            self.index[token] = len(self.index)
        return self.index[token]

    def lookup(self, token: str) -> int:
        """Index of ``token``; unseen tokens map to ``UNK_INDEX`` once frozen."""
        return self.add(token)

    def freeze(self) -> "Vocab":
        self.frozen = True
        return self

    @property
    def tokens(self) -> list[str]:
        return sorted(self.index, key=self.index.__getitem__)

    def to_dict(self) -> dict:
        return {"tokens": self.tokens, "oov": sorted(self.oov), "frozen": self.frozen}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Vocab":
        return cls({t: i for i, t in enumerate(d["tokens"])}, set(d["oov"]), bool(d["frozen"]))


def build_vocab(phrases: Iterable[Phrase], embedding_index) -> Vocab:
    """Index every distinct lower-cased token in first-seen order."""
    vocab = Vocab()
    for ph in phrases:
        for tok in ph.tokens:
            if tok.lower not in vocab:
                vocab.add(tok.lower)
                if tok.lower not in embedding_index:
                    vocab.oov.add(tok.lower)
    return vocab


def split_train_dev(phrases: Sequence[Phrase], dev_fraction: float = 0.1,
                    seed: int = 13) -> tuple[list[Phrase], list[Phrase]]:
    """Seeded split; the dev part has ``ceil(n * dev_fraction)`` phrases."""
    if not 0.0 <= dev_fraction < 1.0:
        raise ValueError(f"dev_fraction must be in [0, 1), got {dev_fraction}")
    n = len(phrases)
    n_dev = math.ceil(n * dev_fraction)
    perm = np.random.default_rng(seed).permutation(n)
    dev_idx = set(perm[:n_dev].tolist())
    train = [p for i, p in enumerate(phrases) if i not in dev_idx]
    dev = [p for i, p in enumerate(phrases) if i in dev_idx]
    return train, dev
