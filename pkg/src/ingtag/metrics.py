"""Token-level precision / recall / F1 per attribute class, plus the
train-set x test-set F1 grid."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import N_LABELS, Label, Phrase

Predictor = Callable[[Phrase], Sequence[Label]]
GRID_NAMES = ("AllRecipes", "FOOD.com", "Both")


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class MetricReport:
    """Scores are percentages in [0, 100].

    ``confusion[g, p]`` counts tokens with gold label g predicted as p.
    """

    per_label: dict[Label, tuple[float, float, float]]
    micro: tuple[float, float, float]
    macro: tuple[float, float, float]
    support: dict[Label, int]
    confusion: np.ndarray

    @property
    def micro_f1(self) -> float:
        return self.micro[2]

    @property
    def n_tokens(self) -> int:
        return int(self.confusion.sum())

    def table(self) -> str:
        lines = [f"{'Entity':<12} {'Recall':>8} {'Precision':>10} {'F1 Score':>9} {'Support':>8}"]
        for lab in Label:
            r, p, f = self.per_label[lab]
            lines.append(f"{lab.title:<12} {r:8.2f} {p:10.2f} {f:9.2f} {self.support[lab]:8d}")
        r, p, f = self.micro
        lines.append(f"{'micro':<12} {r:8.2f} {p:10.2f} {f:9.2f} {self.n_tokens:8d}")
        r, p, f = self.macro
        lines.append(f"{'macro':<12} {r:8.2f} {p:10.2f} {f:9.2f}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "entities": {
                lab.key: {"recall": r, "precision": p, "f1": f, "support": self.support[lab]}
                for lab, (r, p, f) in self.per_label.items()
            },
            "micro": dict(zip(("recall", "precision", "f1"), self.micro)),
            "macro": dict(zip(("recall", "precision", "f1"), self.macro)),
            "tokens": self.n_tokens,
            "confusion": self.confusion.tolist(),
        }


def confusion_matrix(gold: Sequence[Phrase], pred: Sequence[Sequence[Label]]) -> np.ndarray:
    if len(gold) != len(pred):
        raise ValueError(f"{len(pred)} predictions for {len(gold)} phrases")
    cm = np.zeros((N_LABELS, N_LABELS), dtype=np.int64)
    for i, (ph, labels) in enumerate(zip(gold, pred)):
        if ph.gold is None:
            raise ValueError(f"phrase {i} has no gold labels")
        if len(labels) != len(ph.gold):
            raise ValueError(f"phrase {i}: {len(labels)} predictions for {len(ph.gold)} tokens")
        np.add.at(cm, (np.asarray(ph.gold, dtype=np.int64), np.asarray(labels, dtype=np.int64)), 1)
    return cm


def report_from_confusion(cm: np.ndarray) -> MetricReport:
    tp = np.diag(cm).astype(float)
    gold_n = cm.sum(axis=1)
    pred_n = cm.sum(axis=0)
    per_label = {}
    for lab in Label:
        i = int(lab)
        p = 100.0 * tp[i] / pred_n[i] if pred_n[i] else 0.0
        r = 100.0 * tp[i] / gold_n[i] if gold_n[i] else 0.0
        per_label[lab] = (r, p, f1_score(p, r))
    total = cm.sum()
    acc = 100.0 * tp.sum() / total if total else 0.0
    present = [lab for lab in Label if gold_n[int(lab)] > 0]
    if present:
        mr = float(np.mean([per_label[lab][0] for lab in present]))
        mp = float(np.mean([per_label[lab][1] for lab in present]))
        mf = float(np.mean([per_label[lab][2] for lab in present]))
    else:
        mr = mp = mf = 0.0
    return MetricReport(
        per_label=per_label,
        micro=(acc, acc, acc),
        macro=(mr, mp, mf),
        support={lab: int(gold_n[int(lab)]) for lab in Label},
        confusion=cm,
    )


def evaluate(gold: Sequence[Phrase], pred: Sequence[Sequence[Label]]) -> MetricReport:
    """Score predicted token labels against the gold labels of ``gold``."""
    return report_from_confusion(confusion_matrix(gold, pred))


def evaluate_predictor(predict: Predictor, phrases: Sequence[Phrase]) -> MetricReport:
    return evaluate(phrases, [predict(ph) for ph in phrases])


def grid_evaluate(predictors: Mapping[str, Predictor],
                  tests: Mapping[str, Sequence[Phrase]]) -> dict[str, dict[str, float]]:
    """Micro-F1 for every (training set, test set) pair.

    Returns ``grid[test_name][train_name]``.
    """
    for name in GRID_NAMES:
        if name not in predictors:
            raise ValueError(f"missing model trained on {name}")
        if name not in tests:
            raise ValueError(f"missing test set {name}")
    return {
        test: {train: evaluate_predictor(predictors[train], tests[test]).micro_f1 for train in GRID_NAMES}
        for test in GRID_NAMES
    }


def format_grid(grid: Mapping[str, Mapping[str, float]], title: str = "Training") -> str:
    width = 11
    head = f"{'Testing':<11}|" + "".join(f"{n:>{width}}" for n in GRID_NAMES)
    lines = [f"{'':<11}|{title:^{width * len(GRID_NAMES)}}", head, "-" * len(head)]
    for test in GRID_NAMES:
        lines.append(f"{test:<11}|" + "".join(f"{grid[test][tr]:>{width}.2f}" for tr in GRID_NAMES))
    return "\n".join(lines)
