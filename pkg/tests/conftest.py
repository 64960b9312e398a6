import numpy as np
import pytest

from ingtag.corpus import Label, phrase_from_tokens
from ingtag.features import EmbeddingTable
from ingtag.model import Hyper, init_model
from ingtag.synthetic import make_dataset

L = Label


def toy_model(seed=0, d=8, n_layers=1, words=("salt", "cup", "1", "chopped"), **hyper_kw):
    """Small model with every parameter randomised (no identity/zero init)."""
    rng = np.random.default_rng(seed)
    emb = EmbeddingTable(d, seed=seed)
    emb.set_pretrained(list(words), rng.normal(0, 1, (len(words), d)))
    hyper_kw.setdefault("dropout_rate", 0.0)
    hyper = Hyper(n_layers=n_layers, dim=d, seed=seed, **hyper_kw)
    params = init_model(hyper, emb)
    for _, t in params.named_tensors():
        if t.requires_grad:
            t.data = rng.normal(0, 0.5, t.shape)
    for layer in params.layers:
        layer.norm_gain.data = 1.0 + rng.normal(0, 0.2, d)
    return params


@pytest.fixture
def toy():
    return toy_model()


@pytest.fixture
def garlic_phrase():
    return phrase_from_tokens(
        ["1", "garlic", "clove", ",", "crushed"],
        gold=[L.QUANTITY, L.NAME, L.NAME, L.OTHERS, L.STATE],
    )


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """Tiny synthetic corpus with 16-d vectors."""
    return make_dataset(tmp_path_factory.mktemp("synth16"), n_train=60, n_test=40, dim=16, seed=3)


TINY_PHRASES = [
    (["1", "cup", "sugar"], [L.QUANTITY, L.UNIT, L.NAME]),
    (["2", "large", "eggs", ",", "beaten"], [L.QUANTITY, L.SIZE, L.NAME, L.OTHERS, L.STATE]),
    (["1/2", "cup", "warm", "milk"], [L.QUANTITY, L.UNIT, L.TEMPERATURE, L.NAME]),
    (["3", "cloves", "garlic", ",", "minced"], [L.QUANTITY, L.UNIT, L.NAME, L.OTHERS, L.STATE]),
    (["1", "tablespoon", "dried", "oregano"], [L.QUANTITY, L.UNIT, L.DRY_FRESH, L.NAME]),
    (["salt", "to", "taste"], [L.NAME, L.OTHERS, L.OTHERS]),
    (["4", "small", "potatoes", ",", "diced"], [L.QUANTITY, L.SIZE, L.NAME, L.OTHERS, L.STATE]),
    (["2", "cups", "cold", "water"], [L.QUANTITY, L.UNIT, L.TEMPERATURE, L.NAME]),
    (["1", "bunch", "fresh", "parsley"], [L.QUANTITY, L.UNIT, L.DRY_FRESH, L.NAME]),
    (["1", "pound", "ground", "beef"], [L.QUANTITY, L.UNIT, L.STATE, L.NAME]),
]


def tiny_set():
    return [phrase_from_tokens(t, gold=g) for t, g in TINY_PHRASES]


def tiny_embeddings(d=8, seed=0):
    """Pretrained rows for about half the tiny vocabulary; the rest go OOV."""
    words = sorted({w.lower() for toks, _ in TINY_PHRASES for w in toks})
    keep = words[::2]
    emb = EmbeddingTable(d, seed=seed)
    emb.set_pretrained(keep, np.random.default_rng(seed).normal(0, 1, (len(keep), d)))
    return emb
