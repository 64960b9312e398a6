"""Seeded generator of labelled ingredient phrases and matching word vectors.

Stands in for the annotated recipe corpora when they are not on disk.
Phrases follow common ingredient-line patterns; every lexical pool is split
into a train part and a held-out part so that test phrases contain words
never seen in training.  The generated word vectors cluster by attribute
class (class centroid plus noise), the property that makes pretrained
vectors useful for unseen words.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import Label, Phrase, phrase_from_tokens, write_corpus

L = Label

POOLS: dict[Label, list[str]] = {
    L.QUANTITY: "1 2 3 4 5 6 8 10 12 1/2 1/3 1/4 2/3 3/4 1/8 1.5 2.5 0.5 16 24 one two three".split(),
    L.UNIT: ("cup cups teaspoon teaspoons tablespoon tablespoons ounce ounces pound pounds "
             "gram grams kg ml liter pinch dash clove cloves package packages can cans jar "
             "bunch head stalk stalks sprig sprigs slice slices piece pieces stick sticks "
             "bottle envelope bag loaf quart pint gallon inch tsp tbsp oz lb").split(),
    L.SIZE: "small medium large jumbo big extra-large mini baby thick thin bite-size".split(),
    L.TEMPERATURE: "hot cold warm chilled lukewarm boiling iced frozen room-temperature cool".split(),
    L.DRY_FRESH: "fresh freshly dry dried dehydrated sun-dried".split(),
    L.STATE: ("chopped minced diced sliced crushed grated shredded melted softened beaten "
              "thawed drained rinsed peeled cooked cubed halved quartered toasted sifted "
              "mashed pitted seeded trimmed julienned torn ground packed separated squeezed "
              "crumbled cored deveined skinned zested scrubbed blanched roasted whisked").split(),
    L.NAME: ("salt pepper sugar flour water butter oil milk cream garlic onion onions "
             "cheese chicken beef pork rice pasta bread egg eggs lemon lime tomato tomatoes "
             "potato potatoes carrot carrots celery parsley cilantro basil thyme oregano "
             "vanilla cinnamon nutmeg paprika cumin chili honey vinegar wine broth stock "
             "mustard mayonnaise yogurt shrimp salmon tuna bacon ham turkey sausage spinach "
             "kale lettuce cabbage broccoli cauliflower zucchini cucumber mushrooms corn "
             "peas beans lentils chickpeas almonds walnuts pecans peanuts raisins apples "
             "bananas strawberries blueberries oats cornmeal cornstarch yeast ginger "
             "shallots leeks scallions chives dill rosemary sage mint coriander turmeric "
             "cardamom cloves-spice allspice molasses syrup cocoa chocolate coconut "
             "avocado mango pineapple peaches pears cherries cranberries olives capers "
             "anchovies tofu tempeh quinoa barley couscous noodles tortillas crackers").split(),
}
MULTI_NAMES = [
    "cream cheese", "olive oil", "brown sugar", "sour cream", "soy sauce", "baking soda",
    "baking powder", "black pepper", "chicken broth", "bell pepper", "green onions",
    "lemon juice", "heavy cream", "red wine", "parmesan cheese", "cheddar cheese",
    "maple syrup", "sesame oil", "tomato paste", "ground beef", "egg whites", "rolled oats",
]
CONNECTORS = {"or": L.OTHERS, "and": L.OTHERS, "to": L.OTHERS, "of": L.OTHERS}
PUNCT = [",", "(", ")"]


def _split_pool(words: list[str], rng: np.random.Generator, held_out: float):
    words = sorted(set(words))
    perm = rng.permutation(len(words))
    n_out = int(round(len(words) * held_out))
    out = {words[i] for i in perm[:n_out]}
    return [w for w in words if w not in out], [w for w in words if w in out]


class PhraseGenerator:
    def __init__(self, seed: int = 0, held_out: float = 0.35):
        rng = np.random.default_rng(seed)
        self.train_pools: dict[Label, list[str]] = {}
        self.test_pools: dict[Label, list[str]] = {}
        for lab, words in POOLS.items():
            keep = held_out if lab in (L.NAME, L.STATE) else 0.0
            tr, te = _split_pool(words, rng, keep)
            self.train_pools[lab] = tr
            self.test_pools[lab] = te or tr
        mn = sorted(MULTI_NAMES)
        perm = rng.permutation(len(mn))
        cut = int(round(len(mn) * held_out))
        self.test_multi = [mn[i] for i in perm[:cut]]
        self.train_multi = [mn[i] for i in perm[cut:]]

    def _pick(self, rng, lab: Label, held: bool) -> str:
        pool = self.test_pools[lab] if held and rng.random() < 0.6 else self.train_pools[lab]
        return pool[rng.integers(len(pool))]

    def _name(self, rng, held: bool) -> list[str]:
        if rng.random() < 0.3:
            pool = self.test_multi if held and rng.random() < 0.6 else self.train_multi
            return pool[rng.integers(len(pool))].split()
        out = [self._pick(rng, L.NAME, held)]
        if rng.random() < 0.15:
            out.insert(0, self._pick(rng, L.NAME, held))
        return out

    def phrase(self, rng: np.random.Generator, held: bool = False) -> Phrase:
        toks: list[tuple[str, Label]] = []

        def add(words, lab):
            toks.extend((w, lab) for w in words)

        pattern = rng.integers(6)
        add([self._pick(rng, L.QUANTITY, held)], L.QUANTITY)
        if pattern == 0:
            # 1 (8 ounce) package cream cheese, softened
            add(["("], L.OTHERS)
            add([self._pick(rng, L.QUANTITY, held)], L.QUANTITY)
            add([self._pick(rng, L.UNIT, held)], L.UNIT)
            add([")"], L.OTHERS)
            add([self._pick(rng, L.UNIT, held)], L.UNIT)
        elif pattern in (1, 2, 3):
            add([self._pick(rng, L.UNIT, held)], L.UNIT)
        if rng.random() < 0.3:
            add([self._pick(rng, L.SIZE, held)], L.SIZE)
        if rng.random() < 0.15:
            add([self._pick(rng, L.TEMPERATURE, held)], L.TEMPERATURE)
        if rng.random() < 0.25:
            add([self._pick(rng, L.DRY_FRESH, held)], L.DRY_FRESH)
        if pattern == 4 and rng.random() < 0.5:
            add([self._pick(rng, L.STATE, held)], L.STATE)
        add(self._name(rng, held), L.NAME)
        if pattern != 4 and rng.random() < 0.6:
            add([","], L.OTHERS)
            add([self._pick(rng, L.STATE, held)], L.STATE)
            if rng.random() < 0.2:
                add(["and"], L.OTHERS)
                add([self._pick(rng, L.STATE, held)], L.STATE)
        elif rng.random() < 0.15:
            add(["or"], L.OTHERS)
            add(["to"], L.OTHERS)
            add(["taste"], L.OTHERS)
        return phrase_from_tokens([w for w, _ in toks], gold=[lab for _, lab in toks])

    def corpus(self, n: int, seed: int, held: bool = False) -> list[Phrase]:
        rng = np.random.default_rng(seed)
        return [self.phrase(rng, held) for _ in range(n)]

    def vocabulary(self) -> dict[str, Label]:
        """Word -> dominant class for every word the generator can emit."""
        vocab: dict[str, Label] = {}
        for lab, words in POOLS.items():
            for w in words:
                vocab.setdefault(w, lab)
        for mw in MULTI_NAMES:
            for w in mw.split():
                vocab.setdefault(w, L.NAME)
        for w, lab in CONNECTORS.items():
            vocab.setdefault(w, lab)
        vocab.setdefault("taste", L.OTHERS)
        return vocab


def synthetic_vectors(words: dict[str, Label], dim: int = 300, seed: int = 0,
                      noise: float = 0.6, skip: set[str] = frozenset()) -> dict[str, np.ndarray]:
    """Class-clustered word vectors (unit-scale centroid plus Gaussian noise)."""
    rng = np.random.default_rng(seed)
    centroids = {lab: rng.normal(0.0, 1.0, dim) / np.sqrt(dim) * 4.0 for lab in Label}
    out = {}
    for w in sorted(words):
        if w in skip:
            continue
        vec = centroids[words[w]] + rng.normal(0.0, noise * 4.0 / np.sqrt(dim), dim)
        out[w] = vec
    return out


def write_vectors(vectors: dict[str, np.ndarray], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for w, v in vectors.items():
            f.write(w + " " + " ".join(f"{x:.6f}" for x in v) + "\n")


def make_dataset(outdir: str | Path, n_train: int = 400, n_test: int = 200, dim: int = 300,
                 seed: int = 0) -> dict[str, Path]:
    """Write ``train.tsv``, ``test.tsv`` and ``vectors.txt`` under ``outdir``.

    Punctuation gets no pretrained vector, so it exercises the OOV path.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    gen = PhraseGenerator(seed)
    train = gen.corpus(n_train, seed + 1, held=False)
    test = gen.corpus(n_test, seed + 2, held=True)
    paths = {"train": outdir / "train.tsv", "test": outdir / "test.tsv", "vectors": outdir / "vectors.txt"}
    write_corpus(train, paths["train"])
    write_corpus(test, paths["test"])
    write_vectors(synthetic_vectors(gen.vocabulary(), dim, seed, skip=set(PUNCT)), paths["vectors"])
    return paths
