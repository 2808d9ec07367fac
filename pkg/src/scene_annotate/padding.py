"""Rectangular realization of arbitrary-shaped regions, and the machinery
that decides HOW to realize them.

A region is an irregular pixel set; descriptors want rectangles. Two ways to
fill the bbox pixels outside the region: black (pad-zero) or the original
image content (pad-original). Neither wins universally, so a held-out
pre-test evaluates all four train/test padding combinations per category,
a per-category strategy map records the winners, and a small linear
classifier learns to predict the winning strategy from the region's own
feature vector so unseen regions can be padded correctly without labels.

Only pad-original-trained topic models are kept for deployment; the
pre-test still evaluates zero-trained combinations for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .descriptor import DescriptorConfig, cedd
from .errors import ContractViolation
from .plsa import (
    DEFAULT_MAX_ITERS,
    DEFAULT_RESTARTS,
    DEFAULT_TOL,
    TopicRanking,
    assign_topic_categories,
    build_term_matrix,
    fold_in,
    train,
)
from .raster import Region

COMBOS = ("O/O", "Z/Z", "O/Z", "Z/O")  # train side / test side


class PaddingStrategy(Enum):
    PAD_ZERO = "zero"
    PAD_ORIGINAL = "original"


@dataclass(frozen=True, eq=False)
class PaddedPatch:
    """A region rendered as a rectangle; same size as the region's bbox."""

    width: int
    height: int
    pixels: np.ndarray
    strategy: PaddingStrategy
    region_ref: int

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.shape != (self.height, self.width, 3) or px.dtype != np.uint8:
            raise ContractViolation("patch pixels must be (height, width, 3) uint8")
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)


def pad(region: Region, strategy: PaddingStrategy) -> PaddedPatch:
    """Realize a region as a bbox-sized patch under the given strategy.

    Pad-original copies the bbox verbatim; pad-zero blacks out every pixel
    not in the region mask. Masked-in pixels are identical either way.
    """
    x0, y0, x1, y1 = region.bbox
    src = region.source
    if x0 < 0 or y0 < 0 or x1 >= src.width or y1 >= src.height:
        raise ContractViolation("region bbox exceeds source image bounds")
    patch = src.pixels[y0 : y1 + 1, x0 : x1 + 1].copy()
    if strategy is PaddingStrategy.PAD_ZERO:
        patch[~region.mask] = 0
    return PaddedPatch(
        width=region.bbox_width,
        height=region.bbox_height,
        pixels=patch,
        strategy=strategy,
        region_ref=region.id,
    )


@dataclass(frozen=True)
class StrategyMap:
    """Per-category padding choice plus the pre-test counts that justify it.

    counts[category][combo] is the number of correctly reclassified held-out
    regions under that train/test padding combination; totals[category] the
    held-out region count. The chosen strategy is the test-side padding of
    the best pad-original-trained combination (ties prefer O/O).
    """

    entries: dict[int, PaddingStrategy]
    counts: dict[int, dict[str, int]]
    totals: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        for cat, strategy in self.entries.items():
            row = self.counts.get(cat)
            if row is None:
                raise ContractViolation(f"category {cat} has no pre-test counts")
            expected = _best_test_side(row)
            if strategy is not expected:
                raise ContractViolation(
                    f"category {cat}: strategy {strategy} is not pre-test optimal"
                )

    @classmethod
    def from_counts(cls, counts: dict[int, dict[str, int]], totals=None) -> "StrategyMap":
        entries = {cat: _best_test_side(row) for cat, row in counts.items()}
        return cls(entries=entries, counts=dict(counts), totals=dict(totals or {}))

    def strategy_for(self, category: int) -> PaddingStrategy:
        if category not in self.entries:
            raise ContractViolation(f"category {category} not in strategy map")
        return self.entries[category]


def _best_test_side(row: dict[str, int]) -> PaddingStrategy:
    """Best pad-original-trained combination; O/O wins ties."""
    if row.get("O/Z", 0) > row.get("O/O", 0):
        return PaddingStrategy.PAD_ZERO
    return PaddingStrategy.PAD_ORIGINAL


@dataclass(frozen=True, eq=False)
class PaddingClassifier:
    """Linear max-margin strategy predictor over standardized features.

    Decision: w . standardize(x) + b > 0 -> PadZero, else PadOriginal.
    """

    weights: np.ndarray  # (144,) in standardized feature space
    bias: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    reg: float
    epochs: int
    seed: int
    degenerate: bool = False
    train_accuracy: float = float("nan")

    def __post_init__(self):
        for name in ("weights", "feature_mean", "feature_std"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (self.weights.shape == self.feature_mean.shape == self.feature_std.shape):
            raise ContractViolation("classifier parameter shapes disagree")

    def margin(self, feature) -> float:
        x = np.asarray(feature, dtype=np.float64)
        if x.shape != self.weights.shape:
            raise ContractViolation(
                f"feature length {x.shape} does not match classifier {self.weights.shape}"
            )
        z = (x - self.feature_mean) / self.feature_std
        return float(z @ self.weights + self.bias)


def select_strategy(classifier: PaddingClassifier, feature) -> PaddingStrategy:
    """Apply the decision rule; the hyperplane itself maps to PadOriginal."""
    if classifier.margin(feature) > 0:
        return PaddingStrategy.PAD_ZERO
    return PaddingStrategy.PAD_ORIGINAL


def train_padding_classifier(
    features,
    categories,
    strategy_map: StrategyMap,
    reg: float = 1e-3,
    epochs: int = 200,
    seed: int = 0,
) -> PaddingClassifier:
    """Fit the strategy predictor on pad-original features of labeled regions.

    Labels come from the strategy map through each region's category
    (PadZero = +1, PadOriginal = -1); training is seeded subgradient descent
    on the regularized hinge loss with learning rate 1/(reg * t). A single-
    class label set yields a constant classifier flagged as degenerate.
    """
    x = np.stack([np.asarray(f, dtype=np.float64) for f in features])
    y = np.array(
        [
            1.0 if strategy_map.strategy_for(c) is PaddingStrategy.PAD_ZERO else -1.0
            for c in categories
        ]
    )
    if len(x) != len(y) or len(x) == 0:
        raise ContractViolation("need one category per feature, at least one region")

    mean = x.mean(axis=0)
    # flooring the scale keeps near-constant histogram bins from being
    # amplified into the decision; real mass cues vary far above 1e-2
    std = np.maximum(x.std(axis=0), 1e-2)

    if np.all(y == y[0]):
        clf = PaddingClassifier(
            weights=np.zeros(x.shape[1]),
            bias=float(y[0]),
            feature_mean=mean,
            feature_std=std,
            reg=reg,
            epochs=0,
            seed=seed,
            degenerate=True,
        )
        acc = _accuracy(clf, x, y)
        return _with_accuracy(clf, acc)

    z = (x - mean) / std
    rng = np.random.default_rng(seed)
    w = np.zeros(x.shape[1])
    b = 0.0
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(len(z)):
            t += 1
            lr = 1.0 / (reg * t)
            w *= 1.0 - lr * reg
            if y[i] * (z[i] @ w + b) < 1.0:
                w += lr * y[i] * z[i]
                b += lr * y[i]

    clf = PaddingClassifier(
        weights=w,
        bias=b,
        feature_mean=mean,
        feature_std=std,
        reg=reg,
        epochs=epochs,
        seed=seed,
        degenerate=False,
    )
    return _with_accuracy(clf, _accuracy(clf, x, y))


def _accuracy(clf: PaddingClassifier, x: np.ndarray, y: np.ndarray) -> float:
    margins = (x - clf.feature_mean) / clf.feature_std @ clf.weights + clf.bias
    predicted = np.where(margins > 0, 1.0, -1.0)
    return float((predicted == y).mean())


def _with_accuracy(clf: PaddingClassifier, acc: float) -> PaddingClassifier:
    return PaddingClassifier(
        weights=clf.weights,
        bias=clf.bias,
        feature_mean=clf.feature_mean,
        feature_std=clf.feature_std,
        reg=clf.reg,
        epochs=clf.epochs,
        seed=clf.seed,
        degenerate=clf.degenerate,
        train_accuracy=acc,
    )


@dataclass(frozen=True, eq=False)
class PretestResult:
    """Everything the four-way pre-test produced."""

    strategy_map: StrategyMap
    rankings: dict[str, tuple[TopicRanking, ...]]  # combo -> per-region rankings
    predictions: dict[str, tuple[int, ...]]  # combo -> predicted categories
    truths: tuple[int, ...]
    region_ids: tuple[int, ...]
    unmappable: frozenset[int]  # held-out categories absent from training


def pretest(
    train_features_o,
    train_features_z,
    train_categories,
    heldout: list[Region],
    k: int | None = None,
    *,
    seed: int = 0,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    restarts: int = DEFAULT_RESTARTS,
    descriptor_config: DescriptorConfig | None = None,
) -> PretestResult:
    """Evaluate all four train/test padding combinations on held-out regions.

    Trains one topic model per training-side padding, folds every held-out
    region's feature (under each test-side padding) into the matching model,
    and scores top-1 category predictions. The strategy map picks each
    category's best pad-original-trained combination.
    """
    train_categories = [int(c) for c in train_categories]
    known = sorted(set(train_categories))
    if k is None:
        k = len(known)
    for region in heldout:
        if region.category is None:
            raise ContractViolation(f"held-out region {region.id} has no category")

    models = {}
    topic_cats = {}
    for side, feats in (("O", train_features_o), ("Z", train_features_z)):
        model = train(
            build_term_matrix(feats),
            k,
            max_iters=max_iters,
            tol=tol,
            seed=seed,
            restarts=restarts,
        )
        models[side] = model
        topic_cats[side] = assign_topic_categories(model, train_categories)

    heldout_feats = {
        "O": [cedd(pad(r, PaddingStrategy.PAD_ORIGINAL), descriptor_config) for r in heldout],
        "Z": [cedd(pad(r, PaddingStrategy.PAD_ZERO), descriptor_config) for r in heldout],
    }

    truths = tuple(int(r.category) for r in heldout)
    rankings: dict[str, tuple] = {}
    predictions: dict[str, tuple] = {}
    for combo in COMBOS:
        train_side, test_side = combo.split("/")
        model = models[train_side]
        mapping = topic_cats[train_side]
        ranked = tuple(
            fold_in(model, feat, max_iters=max_iters, tol=tol)
            for feat in heldout_feats[test_side]
        )
        rankings[combo] = ranked
        predictions[combo] = tuple(mapping[r.top_topic] for r in ranked)

    counts = {cat: {combo: 0 for combo in COMBOS} for cat in known}
    totals = {cat: 0 for cat in known}
    unmappable = set()
    for idx, truth in enumerate(truths):
        if truth not in counts:
            unmappable.add(truth)
            continue
        totals[truth] += 1
        for combo in COMBOS:
            if predictions[combo][idx] == truth:
                counts[truth][combo] += 1

    return PretestResult(
        strategy_map=StrategyMap.from_counts(counts, totals),
        rankings=rankings,
        predictions=predictions,
        truths=truths,
        region_ids=tuple(r.id for r in heldout),
        unmappable=frozenset(unmappable),
    )
