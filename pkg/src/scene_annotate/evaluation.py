"""Scoring: confusion tables, precision/recall/F, and padding-strategy comparison.

Everything here consumes plain prediction records (truth/predicted pairs,
per-region pre-test outcomes) and produces small report objects with CSV
exports for human-readable tables and JSON exports at full precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .padding import COMBOS, PaddingStrategy, StrategyMap
from .raster import RegionMask

__all__ = [
    "AdaptiveComparison",
    "ConfusionTable",
    "PrfReport",
    "combo_totals",
    "compare_adaptive",
    "confusion",
    "f_measure",
    "ideal_total",
    "mask_agreement",
    "pretest_counts_csv",
    "pretest_counts_json",
    "prf",
]

# Model training always uses original-content padding; the runtime choice is
# which padding the *test* region gets, so only these combos are reachable.
_TEST_SIDE = {
    PaddingStrategy.PAD_ORIGINAL: "O/O",
    PaddingStrategy.PAD_ZERO: "O/Z",
}


def f_measure(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall <= 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ConfusionTable:
    """Square tally with truth on rows and predicted labels on columns."""

    labels: tuple
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ContractViolation(f"confusion counts must be square, got {counts.shape}")
        labels = tuple(self.labels)
        if len(labels) != counts.shape[0]:
            raise ContractViolation("label count does not match table size")
        if len(set(labels)) != len(labels):
            raise ContractViolation("duplicate confusion labels")
        if (counts < 0).any():
            raise ContractViolation("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def row_percent(self) -> np.ndarray:
        """Integer percentages per truth row, rounded half up; zero rows stay zero.

        Half-up rounding means rows need not sum to exactly 100.
        """
        sums = self.counts.sum(axis=1, keepdims=True)
        pct = np.floor(100.0 * self.counts / np.maximum(sums, 1) + 0.5)
        return pct.astype(np.int64)

    def to_csv(self) -> str:
        """Columns: truth label, then one integer-percent column per predicted
        label in ``labels`` order; final line reports ``correct/total``."""
        pct = self.row_percent()
        lines = ["truth," + ",".join(str(lab) for lab in self.labels)]
        for lab, row in zip(self.labels, pct):
            lines.append(f"{lab}," + ",".join(str(v) for v in row))
        lines.append(f"correct,{self.correct}/{self.total}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "labels": list(self.labels),
                "counts": self.counts.tolist(),
                "correct": self.correct,
                "total": self.total,
            },
            sort_keys=True,
        )


def confusion(pairs, categories) -> ConfusionTable:
    """Tally (truth, predicted) pairs over an explicit category list."""
    labels = tuple(categories)
    index = {c: i for i, c in enumerate(labels)}
    if len(index) != len(labels):
        raise ContractViolation("duplicate categories")
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for truth, predicted in pairs:
        if truth not in index or predicted not in index:
            raise ContractViolation(f"unknown category in pair ({truth!r}, {predicted!r})")
        counts[index[truth], index[predicted]] += 1
    return ConfusionTable(labels, counts)


@dataclass(frozen=True)
class PrfReport:
    """Per-category precision/recall/F and their unweighted macro means.

    ``excluded`` lists requested categories that had neither a truth nor a
    predicted occurrence and therefore do not contribute to the means.
    """

    categories: tuple
    precision: dict
    recall: dict
    f: dict
    macro_precision: float
    macro_recall: float
    macro_f: float
    excluded: tuple = ()

    def __post_init__(self):
        for cat in self.categories:
            p, r, f = self.precision[cat], self.recall[cat], self.f[cat]
            for value in (p, r, f):
                if not 0.0 <= value <= 1.0:
                    raise ContractViolation(f"score out of [0, 1] for category {cat}: {value}")
            if abs(f - f_measure(p, r)) > 1e-9:
                raise ContractViolation(f"F inconsistent with P and R for category {cat}")

    def to_csv(self) -> str:
        """Columns: category, precision, recall, f; final row holds the means."""
        lines = ["category,precision,recall,f"]
        for cat in self.categories:
            lines.append(
                f"{cat},{self.precision[cat]:.4f},{self.recall[cat]:.4f},{self.f[cat]:.4f}"
            )
        lines.append(f"mean,{self.macro_precision:.4f},{self.macro_recall:.4f},{self.macro_f:.4f}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "categories": list(self.categories),
                "precision": {str(c): self.precision[c] for c in self.categories},
                "recall": {str(c): self.recall[c] for c in self.categories},
                "f": {str(c): self.f[c] for c in self.categories},
                "macro_precision": self.macro_precision,
                "macro_recall": self.macro_recall,
                "macro_f": self.macro_f,
                "excluded": list(self.excluded),
            },
            sort_keys=True,
        )


def prf(pairs, categories=None) -> PrfReport:
    """Score (truth, predicted-or-None) pairs per category.

    An untagged region (predicted None) is a miss for its truth category.  A
    category that is predicted but never true gets recall 0; one that is true
    but never predicted gets precision 0.
    """
    pairs = list(pairs)
    if categories is None:
        cats = sorted({t for t, _ in pairs} | {p for _, p in pairs if p is not None})
    else:
        cats = list(categories)
        if len(set(cats)) != len(cats):
            raise ContractViolation("duplicate categories")
    evaluated, excluded = [], []
    for cat in cats:
        occurs = any(t == cat or p == cat for t, p in pairs)
        (evaluated if occurs else excluded).append(cat)
    if not evaluated:
        raise ContractViolation("no category has any truth or predicted occurrence")

    precision, recall, f = {}, {}, {}
    for cat in evaluated:
        tp = sum(1 for t, p in pairs if t == cat and p == cat)
        fp = sum(1 for t, p in pairs if t != cat and p == cat)
        fn = sum(1 for t, p in pairs if t == cat and p != cat)
        precision[cat] = tp / (tp + fp) if tp + fp else 0.0
        recall[cat] = tp / (tp + fn) if tp + fn else 0.0
        f[cat] = f_measure(precision[cat], recall[cat])
    return PrfReport(
        categories=tuple(evaluated),
        precision=precision,
        recall=recall,
        f=f,
        macro_precision=float(np.mean([precision[c] for c in evaluated])),
        macro_recall=float(np.mean([recall[c] for c in evaluated])),
        macro_f=float(np.mean([f[c] for c in evaluated])),
        excluded=tuple(excluded),
    )


def _validate_counts(counts) -> None:
    if not counts:
        raise ContractViolation("empty pre-test counts")
    for cat, row in counts.items():
        for combo in COMBOS:
            if combo not in row:
                raise ContractViolation(f"category {cat} missing combo {combo}")
            if row[combo] < 0:
                raise ContractViolation(f"negative count for category {cat} combo {combo}")


def combo_totals(counts) -> dict:
    """Correct counts per train/test padding combo, summed over categories."""
    _validate_counts(counts)
    return {combo: sum(row[combo] for row in counts.values()) for combo in COMBOS}


def ideal_total(counts) -> int:
    """Correct count when an oracle applies each category's best test-side padding."""
    _validate_counts(counts)
    return sum(max(row["O/O"], row["O/Z"]) for row in counts.values())


def pretest_counts_csv(counts, train_counts=None, test_counts=None) -> str:
    """Columns: category, train, test, O/O, Z/Z, O/Z, Z/O; last row totals.

    train_counts/test_counts give per-category region counts for the two
    splits; missing entries render as 0.
    """
    _validate_counts(counts)
    train_counts = dict(train_counts or {})
    test_counts = dict(test_counts or {})
    lines = ["category,train,test," + ",".join(COMBOS)]
    for cat in sorted(counts):
        row = ",".join(str(counts[cat][combo]) for combo in COMBOS)
        lines.append(f"{cat},{train_counts.get(cat, 0)},{test_counts.get(cat, 0)},{row}")
    totals = combo_totals(counts)
    lines.append(
        "total,{},{},{}".format(
            sum(train_counts.values()),
            sum(test_counts.values()),
            ",".join(str(totals[combo]) for combo in COMBOS),
        )
    )
    return "\n".join(lines) + "\n"


def pretest_counts_json(counts) -> str:
    _validate_counts(counts)
    return json.dumps(
        {str(cat): {combo: counts[cat][combo] for combo in COMBOS} for cat in counts},
        sort_keys=True,
    )


@dataclass(frozen=True)
class AdaptiveComparison:
    """Correct counts under oracle, classifier-driven, and fixed padding."""

    total: int
    ideal: int
    adaptive: int
    fixed: dict

    def __post_init__(self):
        for name, value in (("ideal", self.ideal), ("adaptive", self.adaptive)):
            if not 0 <= value <= self.total:
                raise ContractViolation(f"{name} count {value} outside 0..{self.total}")
        if self.adaptive > self.ideal:
            raise ContractViolation(
                f"adaptive count {self.adaptive} exceeds per-category ideal {self.ideal}"
            )

    def to_csv(self) -> str:
        """Columns: strategy, correct, total; one row per fixed combo, then
        the oracle (ideal) and classifier (adaptive) rows."""
        lines = ["strategy,correct,total"]
        for combo in COMBOS:
            lines.append(f"{combo},{self.fixed[combo]},{self.total}")
        lines.append(f"ideal,{self.ideal},{self.total}")
        lines.append(f"adaptive,{self.adaptive},{self.total}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "total": self.total,
                "ideal": self.ideal,
                "adaptive": self.adaptive,
                "fixed": {combo: self.fixed[combo] for combo in COMBOS},
            },
            sort_keys=True,
        )


def compare_adaptive(outcomes, truths, strategy_map: StrategyMap, decisions) -> AdaptiveComparison:
    """Score per-region pre-test outcomes three ways.

    ``outcomes`` holds one mapping per region, combo -> correct?.  The ideal
    count applies each truth category's best strategy; the adaptive count
    applies the classifier's per-region ``decisions``; fixed counts apply one
    combo uniformly.  An adaptive count above ideal breaks the category-level
    oracle bound and is rejected.
    """
    outcomes = list(outcomes)
    truths = list(truths)
    decisions = list(decisions)
    if not len(outcomes) == len(truths) == len(decisions):
        raise ContractViolation("outcomes, truths and decisions must have equal length")
    for row in outcomes:
        missing = [combo for combo in COMBOS if combo not in row]
        if missing:
            raise ContractViolation(f"outcome row missing combos {missing}")

    fixed = {combo: sum(bool(row[combo]) for row in outcomes) for combo in COMBOS}
    ideal = 0
    adaptive = 0
    for row, truth, decision in zip(outcomes, truths, decisions):
        ideal += bool(row[_TEST_SIDE[strategy_map.strategy_for(truth)]])
        adaptive += bool(row[_TEST_SIDE[decision]])
    return AdaptiveComparison(total=len(outcomes), ideal=ideal, adaptive=adaptive, fixed=fixed)


def mask_agreement(predicted, truth) -> float:
    """Pixel agreement after mapping each predicted region to its majority
    truth label.

    Label values carry no meaning across the two masks, so the score is
    invariant to relabeling; 1.0 means the predicted partition refines the
    truth partition exactly.
    """
    pred = predicted.labels if isinstance(predicted, RegionMask) else np.asarray(predicted)
    true = truth.labels if isinstance(truth, RegionMask) else np.asarray(truth)
    if pred.shape != true.shape:
        raise ContractViolation(f"mask shapes differ: {pred.shape} vs {true.shape}")
    if pred.size == 0:
        raise ContractViolation("empty masks")
    if pred.min() < 0 or true.min() < 0:
        raise ContractViolation("mask labels must be non-negative")
    n_true = int(true.max()) + 1
    joint = np.bincount(
        (pred.astype(np.int64) * n_true + true.astype(np.int64)).ravel(),
        minlength=(int(pred.max()) + 1) * n_true,
    )
    overlap = joint.reshape(-1, n_true)
    return float(overlap.max(axis=1).sum() / pred.size)
