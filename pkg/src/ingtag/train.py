"""Training loop for the attention tagger."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import Phrase, build_vocab
from .features import EmbeddingTable
from .metrics import evaluate
from .model import Hyper, ModelParams, init_model, phrase_logits, predict_labels
from .tensor import Adam, cross_entropy

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    params: ModelParams
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    timings: list[float] = field(default_factory=list)


def check_labeled(phrases: Sequence[Phrase], what: str = "training set") -> None:
    for i, ph in enumerate(phrases):
        if ph.gold is None:
            raise ValueError(f"{what}: phrase {i} ({ph.raw!r}) has no gold labels")
        if len(ph) == 0:
            raise ValueError(f"{what}: phrase {i} is empty")


def phrase_loss(params: ModelParams, phrase: Phrase, mode: str = "train", rng=None):
    """Sum of per-token cross-entropy losses for one phrase."""
    logits = phrase_logits(params, phrase, mode, rng)
    return cross_entropy(logits, np.asarray(phrase.gold, dtype=np.int64))


def corpus_loss(params: ModelParams, phrases: Sequence[Phrase]) -> float:
    """Eval-mode loss summed over ``phrases``."""
    return float(sum(phrase_loss(params, ph, "eval").item() for ph in phrases))


def prepare_model(train_set: Sequence[Phrase], hyper: Hyper, embeddings: EmbeddingTable,
                  label_aliases: Mapping[str, str] | None = None) -> ModelParams:
    """Vocabulary, OOV rows for every training token, then fresh parameters."""
    vocab = build_vocab(train_set, embeddings)
    for tok in sorted(vocab.oov):
        embeddings.ensure_oov(tok)
    vocab.freeze()
    embeddings.frozen = True
    return init_model(hyper, embeddings, vocab, label_aliases)


def fit(params: ModelParams, train_set: Sequence[Phrase], dev_set: Sequence[Phrase] = (),
        steps: int | None = None, on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    """Optimise ``params`` in place.

    One optimiser step per ``batch_size`` phrases; loss is the summed token
    cross-entropy.  With a non-empty dev set, training stops once dev
    micro-F1 has not improved for ``patience`` epochs and the best-dev
    parameters are restored.  ``steps`` caps the total optimiser steps.
    """
    check_labeled(train_set)
    hyper = params.hyper
    seeds = np.random.SeedSequence(hyper.seed).spawn(2)
    order_rng = np.random.default_rng(seeds[0])
    drop_rng = np.random.default_rng(seeds[1])
    opt = Adam(params.parameters(), lr=hyper.learning_rate)
    result = TrainResult(params)
    best_f1, best_snap, stale = -1.0, None, 0
    n_steps = 0
    for epoch in range(1, hyper.max_epochs + 1):
        t0 = time.perf_counter()
        order = order_rng.permutation(len(train_set))
        epoch_loss = 0.0
        opt.zero_grad()
        pending = 0
        for i in order:
            loss = phrase_loss(params, train_set[i], "train", drop_rng)
            loss.backward()
            epoch_loss += loss.item()
            pending += 1
            if pending == hyper.batch_size:
                opt.step()
                opt.zero_grad()
                pending = 0
                n_steps += 1
                if steps is not None and n_steps >= steps:
                    break
        if pending:
            opt.step()
            opt.zero_grad()
            n_steps += 1
        record = {"epoch": epoch, "train_loss": epoch_loss, "steps": n_steps}
        if dev_set:
            dev_f1 = evaluate(dev_set, [predict_labels(params, ph) for ph in dev_set]).micro_f1
            record["dev_micro_f1"] = dev_f1
            if dev_f1 > best_f1:
                best_f1, best_snap, stale = dev_f1, params.snapshot(), 0
                result.best_epoch = epoch
            else:
                stale += 1
        else:
            result.best_epoch = epoch
        result.history.append(record)
        result.timings.append(time.perf_counter() - t0)
        log.info("epoch %d loss %.4f dev %s", epoch, epoch_loss, record.get("dev_micro_f1"))
        if on_epoch is not None:
            on_epoch(record)
        if dev_set and stale >= hyper.patience:
            break
        if steps is not None and n_steps >= steps:
            break
    if best_snap is not None:
        params.restore(best_snap)
    return result


def train(train_set: Sequence[Phrase], dev_set: Sequence[Phrase], hyper: Hyper,
          embeddings: EmbeddingTable, label_aliases: Mapping[str, str] | None = None,
          on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    check_labeled(train_set)
    check_labeled(dev_set, "dev set")
    params = prepare_model(train_set, hyper, embeddings, label_aliases)
    return fit(params, train_set, dev_set, on_epoch=on_epoch)
