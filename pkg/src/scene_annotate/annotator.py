"""End-to-end scene annotation.

Pipeline: segment the image, drop tiny regions, and for every remaining
region pick a padding strategy from its own appearance, describe it under
that strategy, fold the feature into the trained topic model, and attach
the winning category as a tag when its posterior clears the threshold.
The result covers every region of the segmentation and renders to a tinted,
outlined, captioned overlay image.
"""

from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .descriptor import DescriptorConfig, cedd
from .errors import (
    ContractViolation,
    DegenerateInputError,
    DegeneratePatchError,
    DegenerateRegionError,
)
from .padding import PaddingClassifier, PaddingStrategy, pad, select_strategy
from .plsa import PlsaModel, TopicRanking, fold_in
from .raster import RasterImage, Region, RegionMask, extract_regions, filter_regions
from .segmenter import SegmenterConfig, segment

__all__ = [
    "AnnotatorConfig",
    "RegionAnnotation",
    "SceneAnnotation",
    "annotate",
    "default_palette",
    "render_overlay",
]

TINT_ALPHA = 0.4


@dataclass(frozen=True)
class AnnotatorConfig:
    """Knobs for the annotation pipeline.

    topic_categories maps model topics to category ids (identity when None);
    category_names supplies overlay captions (category id rendered when
    missing); palette overrides the derived per-category tint colors.
    """

    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    tau: float = 0.3
    min_area_fraction: float = 0.01
    topic_categories: Optional[Mapping[int, int]] = None
    category_names: Optional[Mapping[int, str]] = None
    palette: Optional[Mapping[int, tuple]] = None

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau < 0:
            raise ContractViolation(f"tau must be finite and >= 0, got {self.tau}")
        if not 0.0 <= self.min_area_fraction <= 1.0:
            raise ContractViolation("min_area_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class RegionAnnotation:
    """One region's outcome: ranked topics, at most one tag, chosen padding.

    ranking and strategy_used are None when the region was skipped (too
    small) or its descriptor could not be computed; note says why.
    """

    region_id: int
    bbox: tuple
    ranking: Optional[TopicRanking]
    tag: Optional[int]
    strategy_used: Optional[PaddingStrategy]
    note: str = ""

    def __post_init__(self):
        if self.ranking is None and self.tag is not None:
            raise ContractViolation("a tag requires a ranking")


@dataclass(frozen=True)
class SceneAnnotation:
    """Total annotation of one image: every mask region annotated exactly once."""

    image: RasterImage
    mask: RegionMask
    annotations: tuple
    overlay: RasterImage

    def __post_init__(self):
        object.__setattr__(self, "annotations", tuple(self.annotations))
        ids = sorted(a.region_id for a in self.annotations)
        if ids != list(range(self.mask.n_regions)):
            raise ContractViolation("annotations must cover each mask region exactly once")
        if self.overlay.pixels.shape != self.image.pixels.shape:
            raise ContractViolation("overlay shape must match the image")

    def annotation_for(self, region_id: int) -> RegionAnnotation:
        for ann in self.annotations:
            if ann.region_id == region_id:
                return ann
        raise ContractViolation(f"no annotation for region {region_id}")

    @property
    def tags(self) -> dict:
        return {a.region_id: a.tag for a in self.annotations}

    def to_json(self) -> str:
        """Sidecar document: one record per region with bbox, strategy,
        descending (topic, posterior) ranking, tag, and diagnostic note."""
        records = []
        for ann in sorted(self.annotations, key=lambda a: a.region_id):
            ranking = None
            if ann.ranking is not None:
                ranking = [
                    [int(topic), float(ann.ranking.posterior[topic])]
                    for topic in ann.ranking.order
                ]
            records.append(
                {
                    "region": ann.region_id,
                    "bbox": list(ann.bbox),
                    "strategy": None if ann.strategy_used is None else ann.strategy_used.value,
                    "ranking": ranking,
                    "tag": ann.tag,
                    "note": ann.note,
                }
            )
        return json.dumps({"regions": records}, sort_keys=True)


def _annotate_region(
    region: Region,
    model: PlsaModel,
    classifier: PaddingClassifier,
    cfg: AnnotatorConfig,
    topic_to_category: Mapping[int, int],
) -> RegionAnnotation:
    try:
        feature = cedd(pad(region, PaddingStrategy.PAD_ORIGINAL), cfg.descriptor)
    except (DegeneratePatchError, DegenerateRegionError) as exc:
        return RegionAnnotation(region.id, region.bbox, None, None, None, note=str(exc))
    strategy = select_strategy(classifier, feature)
    if strategy is PaddingStrategy.PAD_ZERO:
        try:
            feature = cedd(pad(region, PaddingStrategy.PAD_ZERO), cfg.descriptor)
        except (DegeneratePatchError, DegenerateRegionError) as exc:
            return RegionAnnotation(region.id, region.bbox, None, None, strategy, note=str(exc))
    ranking = fold_in(model, feature)
    tag = None
    if ranking.top_posterior >= cfg.tau:
        tag = topic_to_category[ranking.top_topic]
    return RegionAnnotation(region.id, region.bbox, ranking, tag, strategy)


def annotate(
    image: RasterImage,
    model: PlsaModel,
    strategy_clf: PaddingClassifier,
    cfg: AnnotatorConfig | None = None,
) -> SceneAnnotation:
    """Segment an image and tag each sufficiently large region.

    The model must have been trained on original-content padded features;
    the classifier decides per region which padding its final feature uses.
    """
    cfg = cfg or AnnotatorConfig()
    if min(image.height, image.width) < 2:
        raise DegenerateInputError(
            f"image {image.width}x{image.height} is too small to segment"
        )
    if cfg.topic_categories is None:
        topic_to_category = {k: k for k in range(model.k)}
    else:
        topic_to_category = dict(cfg.topic_categories)
    missing = [k for k in range(model.k) if k not in topic_to_category]
    if missing:
        raise ContractViolation(f"topic_categories missing topics {missing}")

    mask = segment(image, cfg.segmenter)
    regions = extract_regions(mask, image)
    kept = {r.id for r in filter_regions(regions, cfg.min_area_fraction)}

    annotations = []
    for region in regions:
        if region.id not in kept:
            annotations.append(
                RegionAnnotation(
                    region.id, region.bbox, None, None, None,
                    note="below minimum area fraction",
                )
            )
        else:
            annotations.append(
                _annotate_region(region, model, strategy_clf, cfg, topic_to_category)
            )

    overlay = render_overlay(
        image, mask, annotations, palette=cfg.palette, category_names=cfg.category_names
    )
    return SceneAnnotation(image, mask, annotations, overlay)


def default_palette(categories) -> dict:
    """Deterministic, well-spread tint colors: golden-angle hue per category."""
    palette = {}
    for i, cat in enumerate(sorted(categories)):
        hue = (i * 137.508) % 360.0
        r, g, b = colorsys.hsv_to_rgb(hue / 360.0, 0.75, 0.95)
        palette[cat] = (int(round(r * 255)), int(round(g * 255)), int(round(b * 255)))
    return palette


def _adjacent_label_pairs(labels: np.ndarray) -> set:
    pairs = set()
    for a, b in (
        (labels[:, 1:], labels[:, :-1]),
        (labels[1:, :], labels[:-1, :]),
    ):
        diff = a != b
        for u, v in zip(a[diff].tolist(), b[diff].tolist()):
            pairs.add((min(u, v), max(u, v)))
    return pairs


def _merge_same_tag_groups(labels: np.ndarray, tags: dict) -> np.ndarray:
    # union adjacent regions that carry the same (non-empty) tag so they
    # render as a single blob with no internal boundary
    n = int(labels.max()) + 1
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in _adjacent_label_pairs(labels):
        if tags.get(u) is not None and tags[u] == tags.get(v):
            parent[find(u)] = find(v)
    lookup = np.array([find(x) for x in range(n)], dtype=labels.dtype)
    return lookup[labels]


_FONT = {
    "0": (0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E),
    "1": (0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "2": (0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F),
    "3": (0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E),
    "4": (0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02),
    "5": (0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E),
    "6": (0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E),
    "7": (0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08),
    "8": (0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E),
    "9": (0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C),
    "A": (0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11),
    "B": (0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E),
    "C": (0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E),
    "D": (0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C),
    "E": (0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F),
    "F": (0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10),
    "G": (0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F),
    "H": (0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11),
    "I": (0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "J": (0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C),
    "K": (0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11),
    "L": (0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F),
    "M": (0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11),
    "N": (0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11),
    "O": (0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E),
    "P": (0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10),
    "Q": (0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D),
    "R": (0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11),
    "S": (0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E),
    "T": (0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04),
    "U": (0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E),
    "V": (0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04),
    "W": (0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A),
    "X": (0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11),
    "Y": (0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04),
    "Z": (0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F),
    "-": (0x00, 0x00, 0x00, 0x0E, 0x00, 0x00, 0x00),
    " ": (0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00),
}
_GLYPH_W, _GLYPH_H, _GLYPH_ADVANCE = 5, 7, 6


def _draw_glyph(canvas: np.ndarray, rows, x0: int, y0: int, color) -> None:
    h, w = canvas.shape[:2]
    for dy, bits in enumerate(rows):
        y = y0 + dy
        if not 0 <= y < h:
            continue
        for dx in range(_GLYPH_W):
            if bits >> (_GLYPH_W - 1 - dx) & 1:
                x = x0 + dx
                if 0 <= x < w:
                    canvas[y, x] = color


def _draw_text(canvas: np.ndarray, text: str, cx: int, cy: int) -> None:
    # black drop shadow under white text keeps captions legible on any tint
    glyphs = [_FONT.get(ch, _FONT[" "]) for ch in text.upper()]
    width = _GLYPH_ADVANCE * len(glyphs) - 1
    x0 = cx - width // 2
    y0 = cy - _GLYPH_H // 2
    for offset, color in (((1, 1), (0, 0, 0)), ((0, 0), (255, 255, 255))):
        x = x0 + offset[0]
        for rows in glyphs:
            _draw_glyph(canvas, rows, x, y0 + offset[1], color)
            x += _GLYPH_ADVANCE


def render_overlay(
    image: RasterImage,
    mask: RegionMask,
    annotations,
    palette: Optional[Mapping[int, tuple]] = None,
    category_names: Optional[Mapping[int, str]] = None,
) -> RasterImage:
    """Tint tagged regions, outline region boundaries, caption at centroids.

    Tinting blends the tag color over the image at factor 0.4 (rounded to
    nearest); untagged regions keep their original pixels. Boundary pixels
    (4-neighbors in different render groups) are drawn by value inversion.
    Adjacent regions sharing a tag merge into one outline-free blob.
    """
    annotations = list(annotations)
    ids = sorted(a.region_id for a in annotations)
    if ids != list(range(mask.n_regions)):
        raise ContractViolation("annotations must cover each mask region exactly once")
    if mask.labels.shape != image.pixels.shape[:2]:
        raise ContractViolation("mask shape must match the image")
    tags = {a.region_id: a.tag for a in annotations}
    tagged = sorted({t for t in tags.values() if t is not None})
    colors = dict(default_palette(tagged))
    if palette:
        colors.update(palette)
    names = dict(category_names or {})

    labels = mask.labels
    out = image.pixels.astype(np.float64)
    for rid, tag in tags.items():
        if tag is None:
            continue
        member = labels == rid
        tint = np.asarray(colors[tag], dtype=np.float64)
        out[member] = (1.0 - TINT_ALPHA) * out[member] + TINT_ALPHA * tint
    out = np.rint(out).astype(np.uint8)

    groups = _merge_same_tag_groups(labels, tags)
    boundary = np.zeros(labels.shape, dtype=bool)
    boundary[:, 1:] |= groups[:, 1:] != groups[:, :-1]
    boundary[:, :-1] |= groups[:, 1:] != groups[:, :-1]
    boundary[1:, :] |= groups[1:, :] != groups[:-1, :]
    boundary[:-1, :] |= groups[1:, :] != groups[:-1, :]
    out[boundary] = 255 - out[boundary]

    for ann in sorted(annotations, key=lambda a: a.region_id):
        if ann.tag is None:
            continue
        ys, xs = np.nonzero(labels == ann.region_id)
        cx = int(round(float(xs.mean())))
        cy = int(round(float(ys.mean())))
        _draw_text(out, names.get(ann.tag, str(ann.tag)), cx, cy)

    return RasterImage(out)
