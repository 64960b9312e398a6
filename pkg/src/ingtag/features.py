"""Per-token input vectors: word embeddings, a rule-based POS tagger and
trainable POS-tag embeddings."""

from __future__ import annotations

import hashlib
import logging
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Phrase, Token
from .tensor import Tensor, gather_rows

log = logging.getLogger(__name__)


class EmbeddingError(ValueError):
    """Bad word-vector file."""


# ---------------------------------------------------------------------------
# POS tagging
# ---------------------------------------------------------------------------

PENN_TAGS = (
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS",
    "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO",
    "UH", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB",
    ",", ".", ":", "(", ")", "``", "''", "#", "$",
)
UNK_TAG = "UNK"
ALL_TAGS = PENN_TAGS + (UNK_TAG,)

_PUNCT = {
    ",": ",", "(": "(", ")": ")", "[": "(", "]": ")", ";": ":", ":": ":", "-": ":",
    "--": ":", ".": ".", "!": ".", "?": ".", '"': "``", "'": "''", "#": "#", "$": "$",
    "&": "CC", "+": "CC", "/": "CC", "%": "NN", "*": "SYM",
}

_NUMERIC = re.compile(
    r"^[+-]?(\d+([.,]\d+)?|\d*\.\d+)(/\d+)?([-–](\d+([.,]\d+)?|\d*\.\d+)(/\d+)?)?$"
)
_VULGAR = "¼½¾⅐⅑⅒⅓⅔⅕⅖⅗⅘⅙⅚⅛⅜⅝⅞"
_WORDLIKE = re.compile(r"^[a-z][a-z'\-]*$")


def _lex(tag: str, words: str) -> dict[str, str]:
    return {w: tag for w in words.split()}


LEXICON: dict[str, str] = {
    **_lex("DT", "a an the each every some any another this that these those all no half"),
    **_lex("IN", "of in into for with without from to by on at about per as if than "
                 "over under plus like until through after before inside"),
    **_lex("TO", "to"),
    **_lex("CC", "and or but nor either"),
    **_lex("RB", "very more less well not only just about approximately roughly finely "
                 "thinly coarsely lightly freshly firmly loosely packed divided optional "
                 "optionally also too then well-drained"),
    **_lex("CD", "one two three four five six seven eight nine ten eleven twelve dozen "
                 "fifteen twenty"),
    **_lex("JJ", "small medium large big extra-large jumbo mini baby whole fresh dry "
                 "hot cold warm cool lukewarm frozen ripe raw lean boneless skinless "
                 "unsalted salted sweet sour red green yellow white black brown dark "
                 "light heavy low-fat fat-free nonfat reduced-fat all-purpose self-rising "
                 "instant plain kosher ground virgin extra sharp mild bittersweet "
                 "semisweet unsweetened firm soft thick thin fine coarse optional "
                 "room pure italian mexican chinese french greek english dijon "
                 "granulated powdered seedless medium-size bite-size"),
    **_lex("NN", "salt pepper sugar flour water butter oil milk cream garlic onion "
                 "cup teaspoon tablespoon tsp tbsp oz ounce pound lb gram g kg ml liter "
                 "pinch dash clove package pkg can jar bunch head stalk sprig slice "
                 "piece stick bottle container envelope bag box loaf inch temperature "
                 "juice zest cheese chicken beef pork rice pasta bread egg lemon lime "
                 "tomato potato carrot celery parsley cilantro basil thyme oregano "
                 "vanilla cinnamon nutmeg paprika cumin chili honey vinegar wine "
                 "broth stock sauce mustard mayonnaise yogurt taste serving garnish"),
    **_lex("NNS", "cups teaspoons tablespoons ounces pounds lbs grams ml liters cloves "
                  "packages cans jars bunches heads stalks sprigs slices pieces sticks "
                  "bottles containers envelopes bags boxes inches eggs tomatoes potatoes "
                  "carrots onions leaves flakes chips crumbs seeds noodles beans peas "
                  "mushrooms peppers apples bananas berries nuts pecans walnuts almonds"),
    **_lex("VBN", "chopped minced diced sliced crushed grated shredded melted softened "
                  "beaten thawed drained rinsed peeled cooked cubed halved quartered "
                  "toasted divided sifted mashed pitted seeded trimmed julienned "
                  "torn cut frozen dried smoked canned packed separated scalded"),
    **_lex("VB", "taste"),
    **_lex("VBG", "boiling cooking baking frying whipping"),
    **_lex("PRP", "it they you"),
    **_lex("MD", "can may"),
}
# words with a more specific sense in ingredient lists
LEXICON.update({"to": "TO", "can": "NN", "taste": "NN", "frozen": "JJ", "dried": "JJ",
                "ground": "JJ", "optional": "JJ"})


def _tag_one(token: str) -> str:
    if token in _PUNCT:
        return _PUNCT[token]
    low = token.lower()
    if _NUMERIC.match(low) or (low and all(ch in _VULGAR or ch.isdigit() for ch in low)):
        return "CD"
    if low in LEXICON:
        return LEXICON[low]
    if _WORDLIKE.match(low):
        if len(low) > 3 and low.endswith("ly"):
            return "RB"
        if len(low) > 3 and low.endswith("ed"):
            return "VBN"
        if len(low) > 4 and low.endswith("ing"):
            return "VBG"
        return "NN"
    return UNK_TAG


def pos_tag(tokens: Sequence[Token | str]) -> list[str]:
    """Penn-style tags from a lexicon plus suffix rules.

    numerals -> CD, known words -> lexicon tag, punctuation -> its own tag,
    then ``-ly`` RB, ``-ed`` VBN, ``-ing`` VBG, otherwise NN.  Tokens that
    are neither words, numbers nor known punctuation get ``UNK``.
    """
    return [_tag_one(t.surface if isinstance(t, Token) else t) for t in tokens]


# ---------------------------------------------------------------------------
# embedding tables
# ---------------------------------------------------------------------------

OOV_INIT_SCALE = 0.05


def _oov_vector(token: str, dim: int, seed: int) -> np.ndarray:
    h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
    rng = np.random.default_rng([seed, h])
    return rng.uniform(-OOV_INIT_SCALE, OOV_INIT_SCALE, dim)


class EmbeddingTable:
    """Word vectors keyed by lower-cased token.

    Pretrained rows live in ``pretrained`` (frozen unless tuning is on);
    out-of-vocabulary tokens get rows in ``oov`` (always trainable), created
    on first access with a seeded uniform draw that depends only on
    ``(seed, token)``.  Once ``frozen``, unknown tokens resolve to a zero
    vector instead of growing the table.
    """

    def __init__(self, dim: int = 300, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.pretrained_index: dict[str, int] = {}
        self.pretrained = Tensor(np.zeros((0, dim)), requires_grad=False, name="emb.pretrained")
        self.oov_index: dict[str, int] = {}
        self.oov = Tensor(np.zeros((0, dim)), requires_grad=True, name="emb.oov")
        self.frozen = False

    def __len__(self):
        return len(self.pretrained_index) + len(self.oov_index)

    def __contains__(self, token: str) -> bool:
        return token in self.pretrained_index

    def set_pretrained(self, tokens: Sequence[str], matrix: np.ndarray) -> None:
        self.pretrained_index = {t: i for i, t in enumerate(tokens)}
        self.pretrained = Tensor(matrix, requires_grad=self.pretrained.requires_grad, name="emb.pretrained")

    def add_pretrained(self, other: "EmbeddingTable") -> int:
        """Copy rows of ``other`` for tokens this table has no row for."""
        new = [t for t in other.pretrained_index if t not in self.pretrained_index and t not in self.oov_index]
        if not new:
            return 0
        rows = other.pretrained.data[[other.pretrained_index[t] for t in new]]
        base = len(self.pretrained_index)
        for i, t in enumerate(new):
            self.pretrained_index[t] = base + i
        self.pretrained.data = np.concatenate([self.pretrained.data, rows])
        return len(new)

    def restrict(self, keep: Iterable[str]) -> "EmbeddingTable":
        """A new table holding only the pretrained rows for ``keep``."""
        keep = sorted({t for t in keep if t in self.pretrained_index})
        out = EmbeddingTable(self.dim, self.seed)
        if keep:
            out.set_pretrained(keep, self.pretrained.data[[self.pretrained_index[t] for t in keep]])
        return out

    def set_tunable(self, flag: bool) -> None:
        self.pretrained.requires_grad = flag

    def is_trainable(self, token: str) -> bool:
        if token in self.pretrained_index:
            return self.pretrained.requires_grad
        return token in self.oov_index

    def ensure_oov(self, token: str) -> int:
        if token in self.oov_index:
            return self.oov_index[token]
        if self.frozen:
            return -1
        row = _oov_vector(token, self.dim, self.seed)
        self.oov_index[token] = len(self.oov_index)
        self.oov.data = np.concatenate([self.oov.data, row[None, :]])
        return self.oov_index[token]

    def resolve(self, tokens: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """Row ids into (pretrained, oov); ``-1`` where the other source holds it."""
        pre = np.full(len(tokens), -1, dtype=np.int64)
        oov = np.full(len(tokens), -1, dtype=np.int64)
        for i, t in enumerate(tokens):
            if t in self.pretrained_index:
                pre[i] = self.pretrained_index[t]
            else:
                oov[i] = self.ensure_oov(t)
        return pre, oov

    def lookup(self, token: str) -> np.ndarray:
        pre, oov = self.resolve([token])
        if pre[0] >= 0:
            return self.pretrained.data[pre[0]]
        if oov[0] >= 0:
            return self.oov.data[oov[0]]
        return np.zeros(self.dim)


def embed_token(table: EmbeddingTable, token: Token | str) -> np.ndarray:
    """The vector for one token (creating its OOV row if needed)."""
    key = token.lower if isinstance(token, Token) else token.lower()
    return table.lookup(key).copy()


def load_embeddings(path: str | Path, dimension: int = 300, keep: Iterable[str] | None = None,
                    strict: bool = True, seed: int = 0) -> EmbeddingTable:
    """Parse a ``TOKEN v1 ... vd`` text file into a frozen table.

    Keys are lower-cased and the first occurrence wins.  ``keep`` limits the
    rows retained (large GloVe files do not fit in memory otherwise).  A
    leading ``count dim`` header line is skipped.  With ``strict=False``,
    malformed lines are logged and skipped instead of raising; they are
    listed in ``table.skipped``.
    """
    keep_set = None if keep is None else {k.lower() for k in keep}
    tokens: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    skipped: list[int] = []
    try:
        f = open(path, encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot read embeddings {path}: {e}") from e
    with f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            if len(parts) == 1 and not parts[0]:
                continue
            if len(parts) < dimension + 1:
                msg = f"{path}:{lineno}: expected {dimension} values, got {len(parts) - 1}"
                if strict:
                    raise EmbeddingError(msg)
                log.warning(msg)
                skipped.append(lineno)
                continue
            # some GloVe tokens contain spaces; the vector is always the tail
            token = " ".join(parts[:-dimension]).lower()
            if token in seen or (keep_set is not None and token not in keep_set):
                continue
            try:
                vec = np.array(parts[-dimension:], dtype=np.float64)
            except ValueError:
                msg = f"{path}:{lineno}: non-numeric vector entry"
                if strict:
                    raise EmbeddingError(msg) from None
                log.warning(msg)
                skipped.append(lineno)
                continue
            seen.add(token)
            tokens.append(token)
            rows.append(vec)
    table = EmbeddingTable(dimension, seed)
    table.set_pretrained(tokens, np.stack(rows) if rows else np.zeros((0, dimension)))
    table.skipped = skipped
    return table


class PosEmbeddingTable:
    """One trainable, zero-initialised row per tag in :data:`ALL_TAGS`."""

    def __init__(self, dim: int = 300, tags: Sequence[str] = ALL_TAGS):
        self.tags = tuple(tags)
        self.index = {t: i for i, t in enumerate(self.tags)}
        self.vectors = Tensor(np.zeros((len(self.tags), dim)), requires_grad=True, name="pos")

    def ids(self, tags: Sequence[str]) -> np.ndarray:
        unk = self.index[UNK_TAG]
        return np.array([self.index.get(t, unk) for t in tags], dtype=np.int64)

    def __getitem__(self, tag: str) -> np.ndarray:
        return self.vectors.data[self.ids([tag])[0]]


def encode_phrase(phrase: Phrase, emb: EmbeddingTable, pos_emb: PosEmbeddingTable) -> Tensor:
    """``s x d`` matrix: word vector plus POS-tag vector for every token."""
    if len(phrase) == 0:
        raise ValueError("cannot encode an empty phrase")
    pre, oov = emb.resolve([t.lower for t in phrase.tokens])
    words = gather_rows(emb.pretrained, pre) + gather_rows(emb.oov, oov)
    return words + gather_rows(pos_emb.vectors, pos_emb.ids([t.pos for t in phrase.tokens]))
