"""The attention tagger: encoded tokens -> N self-attention/feed-forward
layers -> per-token linear-softmax classifier."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import tensor as T
from .corpus import DEFAULT_ALIASES, N_LABELS, Label, Phrase, Vocab
from .features import EmbeddingTable, PosEmbeddingTable, encode_phrase
from .tensor import Tensor

SCORE_FNS = ("dot", "additive")


@dataclass
class Hyper:
    n_layers: int = 4
    learning_rate: float = 5e-5
    batch_size: int = 1
    dropout_rate: float = 0.1
    max_epochs: int = 20
    patience: int = 3
    seed: int = 13
    score_fn: str = "dot"
    residual: bool = False
    positional: bool = False
    qkv: bool = True
    ffn_relu: bool = False
    tune_embeddings: bool = False
    dim: int = 300

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.max_epochs < 0 or self.patience < 1:
            raise ValueError("max_epochs must be >= 0 and patience >= 1")
        if self.score_fn not in SCORE_FNS:
            raise ValueError(f"score_fn must be one of {SCORE_FNS}")
        if self.dim < 1:
            raise ValueError("dim must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Hyper":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class LayerParams:
    ffn_weight: Tensor
    ffn_bias: Tensor
    norm_gain: Tensor
    norm_bias: Tensor
    wq: Tensor | None = None
    wk: Tensor | None = None
    wv: Tensor | None = None
    att_w1: Tensor | None = None
    att_w2: Tensor | None = None
    att_v: Tensor | None = None

    def named(self) -> Iterator[tuple[str, Tensor]]:
        for f in fields(self):
            t = getattr(self, f.name)
            if t is not None:
                yield f.name, t


@dataclass
class ModelParams:
    hyper: Hyper
    layers: list[LayerParams]
    output_w: Tensor
    embeddings: EmbeddingTable
    pos: PosEmbeddingTable
    vocab: Vocab = field(default_factory=Vocab)
    label_aliases: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_ALIASES))

    @property
    def dim(self) -> int:
        return self.output_w.shape[0]

    def named_tensors(self) -> Iterator[tuple[str, Tensor]]:
        """Every tensor of the model, trainable or not, in a fixed order."""
        for i, layer in enumerate(self.layers):
            for name, t in layer.named():
                yield f"layers.{i}.{name}", t
        yield "output_w", self.output_w
        yield "emb.pretrained", self.embeddings.pretrained
        yield "emb.oov", self.embeddings.oov
        yield "pos", self.pos.vectors

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_tensors() if t.requires_grad]

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_tensors()}

    def restore(self, snap: Mapping[str, np.ndarray]) -> None:
        for name, t in self.named_tensors():
            t.data = snap[name].copy()


def _xavier(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    a = math.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-a, a, (n_in, n_out))


def init_model(hyper: Hyper, embeddings: EmbeddingTable, vocab: Vocab | None = None,
               label_aliases: Mapping[str, str] | None = None) -> ModelParams:
    """Fresh parameters; attention projections start at the identity."""
    d = embeddings.dim
    if hyper.dim != d:
        hyper = Hyper.from_dict({**hyper.to_dict(), "dim": d})
    rng = np.random.default_rng(hyper.seed)
    embeddings.set_tunable(hyper.tune_embeddings)
    layers = []
    for i in range(hyper.n_layers):
        p = f"layers.{i}."
        layer = LayerParams(
            ffn_weight=Tensor(_xavier(rng, d, d), requires_grad=True, name=p + "ffn_weight"),
            ffn_bias=Tensor(np.zeros(d), requires_grad=True, name=p + "ffn_bias"),
            norm_gain=Tensor(np.ones(d), requires_grad=True, name=p + "norm_gain"),
            norm_bias=Tensor(np.zeros(d), requires_grad=True, name=p + "norm_bias"),
        )
        if hyper.qkv:
            layer.wq = Tensor(np.eye(d), requires_grad=True, name=p + "wq")
            layer.wk = Tensor(np.eye(d), requires_grad=True, name=p + "wk")
            layer.wv = Tensor(np.eye(d), requires_grad=True, name=p + "wv")
        if hyper.score_fn == "additive":
            layer.att_w1 = Tensor(_xavier(rng, d, d), requires_grad=True, name=p + "att_w1")
            layer.att_w2 = Tensor(_xavier(rng, d, d), requires_grad=True, name=p + "att_w2")
            layer.att_v = Tensor(rng.uniform(-0.1, 0.1, d), requires_grad=True, name=p + "att_v")
        layers.append(layer)
    output_w = Tensor(_xavier(rng, d, N_LABELS), requires_grad=True, name="output_w")
    return ModelParams(
        hyper=hyper,
        layers=layers,
        output_w=output_w,
        embeddings=embeddings,
        pos=PosEmbeddingTable(d),
        vocab=vocab if vocab is not None else Vocab(),
        label_aliases=dict(label_aliases) if label_aliases is not None else dict(DEFAULT_ALIASES),
    )


def sinusoidal_positions(s: int, d: int) -> np.ndarray:
    pos = np.arange(s)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def self_attention(u: Tensor, layer: LayerParams, score_fn: str = "dot") -> Tensor:
    """Every token attends over all tokens of the phrase, itself included."""
    q = u @ layer.wq if layer.wq is not None else u
    k = u @ layer.wk if layer.wk is not None else u
    v = u @ layer.wv if layer.wv is not None else u
    if score_fn == "dot":
        scores = T.scaled_dot_scores(q, k)
    else:
        scores = T.additive_scores(q @ layer.att_w1, k @ layer.att_w2, layer.att_v)
    return T.softmax(scores, axis=-1) @ v


def forward(params: ModelParams, encoded: Tensor, mode: str = "eval",
            rng: np.random.Generator | None = None) -> Tensor:
    """Per-token class logits, shape ``s x 8``.

    Dropout is active only in ``mode="train"``, which then needs ``rng``.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if encoded.ndim != 2 or encoded.shape[0] < 1 or encoded.shape[1] != params.dim:
        raise ValueError(f"expected an s x {params.dim} input, got {encoded.shape}")
    hyper = params.hyper
    train = mode == "train"
    u = encoded
    if hyper.positional:
        u = u + sinusoidal_positions(u.shape[0], u.shape[1])
    for layer in params.layers:
        h = self_attention(u, layer, hyper.score_fn)
        if hyper.residual:
            h = h + u
        f = h @ layer.ffn_weight + layer.ffn_bias
        if hyper.ffn_relu:
            f = T.relu(f)
        f = T.dropout(f, hyper.dropout_rate, train, rng)
        if hyper.residual:
            f = f + h
        u = T.layer_norm(f, layer.norm_gain, layer.norm_bias)
    return u @ params.output_w


def phrase_logits(params: ModelParams, phrase: Phrase, mode: str = "eval",
                  rng: np.random.Generator | None = None) -> Tensor:
    return forward(params, encode_phrase(phrase, params.embeddings, params.pos), mode, rng)


def _probabilities(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def decide(logits: np.ndarray) -> list[tuple[Label, float]]:
    """Argmax label and its probability per row; ties go to the lowest index."""
    probs = _probabilities(np.asarray(logits, dtype=np.float64))
    best = probs.argmax(axis=1)
    return [(Label(int(b)), float(probs[i, b])) for i, b in enumerate(best)]


def classify_tokens(params: ModelParams, phrase: Phrase) -> list[tuple[Label, float]]:
    if len(phrase) == 0:
        return []
    return decide(phrase_logits(params, phrase).data)


def predict_labels(params: ModelParams, phrase: Phrase) -> list[Label]:
    return [lab for lab, _ in classify_tokens(params, phrase)]


@dataclass
class ParseResult:
    phrase: str
    tokens: list[tuple[str, Label, float]]
    spans: list[tuple[Label, str]]
    attributes: dict[Label, list[str]]

    def to_json(self) -> dict:
        return {
            "phrase": self.phrase,
            "tokens": [
                {"surface": s, "label": lab.key, "confidence": c} for s, lab, c in self.tokens
            ],
            "attributes": {
                lab.key: list(self.attributes.get(lab, [])) for lab in Label if lab is not Label.OTHERS
            },
        }


def structure(phrase: Phrase, labels: Sequence[Label], confidences: Sequence[float] | None = None) -> ParseResult:
    """Group maximal same-label token runs into attribute spans."""
    if len(labels) != len(phrase):
        raise ValueError(f"{len(labels)} labels for {len(phrase)} tokens")
    if confidences is None:
        confidences = [1.0] * len(labels)
    spans: list[tuple[Label, str]] = []
    run: list[str] = []
    for i, (tok, lab) in enumerate(zip(phrase.tokens, labels)):
        run.append(tok.surface)
        if i + 1 == len(labels) or labels[i + 1] != lab:
            spans.append((Label(lab), " ".join(run)))
            run = []
    attributes: dict[Label, list[str]] = {}
    for lab, text in spans:
        if lab is not Label.OTHERS:
            attributes.setdefault(lab, []).append(text)
    tokens = [(t.surface, Label(lab), float(c)) for t, lab, c in zip(phrase.tokens, labels, confidences)]
    return ParseResult(phrase.raw, tokens, spans, attributes)


def parse(params: ModelParams, phrase: Phrase) -> ParseResult:
    decided = classify_tokens(params, phrase)
    return structure(phrase, [lab for lab, _ in decided], [c for _, c in decided])
