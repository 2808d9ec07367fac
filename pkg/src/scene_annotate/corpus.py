"""Engineered synthetic corpora with known annotation behavior.

Two corpus families, both 64x64 scenes built from noisy solid fills and
two-tone stripes:

* "scenes" — five scene types covering eight categories (three striped
  objects on contrasting backgrounds, a horizontally striped block on sky,
  and a pair of gray ellipses on plants).  Striped objects are drawn as
  full-bounding-box rectangles in the train split and as triangles
  elsewhere, so held-out bounding boxes mix object and background content
  while training boxes stay pure.  Under original-content padding the
  trained topics then own each striped object's body but none of its
  context, and the context mass drags held-out triangles onto the
  background topic; zero padding removes the context and recovers them.
  Solid categories are unaffected (background boxes are pure either way),
  so the corpus has categories that zero padding helps and categories it
  leaves alone, with every category still reachable end to end.

* "padding-lab" — three object categories plus one labeled background.
  The two gray ellipses are identical in body and differ only through the
  background visible inside their padded boxes, so with one topic per
  category the model is forced to blend context into the gray topics;
  zero padding erases that only distinction and collapses the pair onto
  one winner (hurting the loser), while it rescues the striped category
  from its context crush exactly as above (helping it).  Backgrounds of
  the gray-pair scenes carry category 0 and are excluded from training.

Stripe tones within a pair sit close enough in Lab space that the
segmenter's color quantizer merges them (objects segment as one region)
while the descriptor still resolves them as distinct color bins.  Stripes
are 3 px wide so that every phase of the 8-px descriptor grid keeps a
half-block luminance contrast: regions recovered by the segmenter keep
their edge texture even when erosion shifts the bounding box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import SceneSpecError
from .manifest import DatasetManifest, ManifestEntry, load_manifest, write_manifest
from .raster import Fill, Placement, SyntheticSceneSpec, generate_scene, write_image, write_mask

__all__ = [
    "CorpusSpec",
    "UNLABELED_CATEGORY",
    "build_corpus",
    "categories_for",
    "default_spec",
    "iter_scene_specs",
    "padding_lab_spec",
    "parse_spec",
    "scene_recipe",
    "scenes_for",
]

CANVAS = 64
NOISE_AMPLITUDE = 6

# category 0 marks background regions that carry no training label
UNLABELED_CATEGORY = 0

# tone pairs: within-pair Lab distance stays under the segmenter's merge
# threshold while the tones land in different descriptor color bins
BUTTERFLY_TONES = ((250, 150, 10), (130, 70, 5))
FLOWER_TONES = ((230, 40, 200), (120, 15, 105))
FLIGHT_TONES = ((245, 245, 245), (130, 130, 130))
MOUNTAIN_TONES = ((125, 125, 125), (95, 95, 95))
LEAVES = (40, 150, 45)
SKY = (70, 120, 240)
PLANTS = (210, 210, 20)
GRAY = (125, 125, 125)
RED = (200, 40, 40)
BLUE = (70, 120, 240)
GREEN = (40, 150, 45)

SCENE_CATEGORIES = {
    1: "butterfly", 2: "leaves", 3: "flower", 4: "flight",
    5: "sky", 6: "mountain", 7: "plants", 8: "cats",
}
LAB_CATEGORIES = {
    UNLABELED_CATEGORY: "unlabeled",
    1: "boulder", 2: "dune", 3: "kite", 4: "meadow",
}

SCENE_ORDER = ("butterfly", "flower", "flight", "mountain", "cats")
LAB_ORDER = ("boulder", "dune", "kite")

FAMILIES = ("scenes", "padding-lab")

_DEFAULT_COUNTS = {"train": 10, "pretest": 4, "test": 12}
_DEFAULT_SEEDS = {"train": 0, "pretest": 50000, "test": 90000}
_LAB_COUNTS = {"train": 10, "pretest": 8, "test": 0}
_LAB_SEEDS = {"train": 200000, "pretest": 250000, "test": 290000}


def _stripes(pair, orientation: str = "v") -> Fill:
    return Fill("stripes", pair[0], color2=pair[1], stripe_width=3, orientation=orientation)


def _noisy(color) -> Fill:
    return Fill("noise", color, amplitude=NOISE_AMPLITUDE)


def categories_for(family: str) -> dict[int, str]:
    if family == "scenes":
        return dict(SCENE_CATEGORIES)
    if family == "padding-lab":
        return dict(LAB_CATEGORIES)
    raise SceneSpecError(f"unknown corpus family {family!r}; expected one of {FAMILIES}")


def scenes_for(family: str) -> tuple[str, ...]:
    if family == "scenes":
        return SCENE_ORDER
    if family == "padding-lab":
        return LAB_ORDER
    raise SceneSpecError(f"unknown corpus family {family!r}; expected one of {FAMILIES}")


def scene_recipe(family: str, scene: str, split: str, seed: int) -> SyntheticSceneSpec:
    """Build the deterministic scene recipe for one image.

    The seed drives both placement jitter and fill noise.  Striped object
    scenes switch shape by split: full-bounding-box rectangles for train,
    triangles (boxes roughly half context) for pretest and test.
    """
    rng = np.random.default_rng(seed)

    def jitter(lo: int, hi: int) -> int:
        return int(rng.integers(lo, hi + 1))

    def spot(side: int) -> tuple[int, int]:
        return jitter(4, CANVAS - side - 4), jitter(4, CANVAS - side - 4)

    bg_category = UNLABELED_CATEGORY
    if family == "scenes":
        striped = {
            "butterfly": (BUTTERFLY_TONES, 1, LEAVES, 2),
            "flower": (FLOWER_TONES, 3, PLANTS, 7),
            "flight": (FLIGHT_TONES, 4, SKY, 5),
        }
        if scene in striped:
            pair, category, bg_color, bg_category = striped[scene]
            bg = _noisy(bg_color)
            shape = "rect" if split == "train" else "triangle"
            side = 24 if split == "train" else 32
            x, y = spot(side)
            objects = [Placement(shape, x, y, side, side, _stripes(pair), category)]
        elif scene == "mountain":
            bg, bg_category = _noisy(SKY), 5
            side = 28
            x, y = spot(side)
            objects = [
                Placement("rect", x, y, side, side, _stripes(MOUNTAIN_TONES, orientation="h"), 6)
            ]
        elif scene == "cats":
            bg, bg_category = _noisy(PLANTS), 7
            side = 20
            objects = [
                Placement("ellipse", jitter(2, 10), jitter(4, CANVAS - side - 4),
                          side, side, _noisy(GRAY), 8),
                Placement("ellipse", jitter(34, 42), jitter(4, CANVAS - side - 4),
                          side, side, _noisy(GRAY), 8),
            ]
        else:
            raise SceneSpecError(f"unknown scene {scene!r} in family 'scenes'")
    elif family == "padding-lab":
        if scene == "boulder":
            bg = _noisy(RED)
            x, y = spot(32)
            objects = [Placement("ellipse", x, y, 32, 32, _noisy(GRAY), 1)]
        elif scene == "dune":
            bg = _noisy(BLUE)
            x, y = spot(32)
            objects = [Placement("ellipse", x, y, 32, 32, _noisy(GRAY), 2)]
        elif scene == "kite":
            bg, bg_category = _noisy(GREEN), 4
            shape = "rect" if split == "train" else "triangle"
            side = 24 if split == "train" else 32
            x, y = spot(side)
            objects = [Placement(shape, x, y, side, side, _stripes(BUTTERFLY_TONES), 3)]
        else:
            raise SceneSpecError(f"unknown scene {scene!r} in family 'padding-lab'")
    else:
        raise SceneSpecError(f"unknown corpus family {family!r}; expected one of {FAMILIES}")

    return SyntheticSceneSpec(CANVAS, CANVAS, bg, bg_category, objects, seed=seed)


@dataclass(frozen=True)
class CorpusSpec:
    """Which scenes to generate, how many per split, and the seed bases.

    Image seeds follow base + 1000 * scene_index + image_index, where the
    scene index comes from the family's canonical order, so adding or
    removing scenes never reshuffles another scene's images.
    """

    family: str = "scenes"
    scenes: tuple[str, ...] = ()
    counts: Mapping[str, int] = field(default_factory=dict)
    seeds: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SceneSpecError(
                f"unknown corpus family {self.family!r}; expected one of {FAMILIES}"
            )
        known = scenes_for(self.family)
        strange = [s for s in self.scenes if s not in known]
        if strange:
            raise SceneSpecError(f"unknown scenes {strange} for family {self.family!r}")
        object.__setattr__(self, "scenes", tuple(self.scenes))
        defaults = _LAB_COUNTS if self.family == "padding-lab" else _DEFAULT_COUNTS
        seed_defaults = _LAB_SEEDS if self.family == "padding-lab" else _DEFAULT_SEEDS
        counts = {**defaults, **{k: int(v) for k, v in dict(self.counts).items()}}
        seeds = {**seed_defaults, **{k: int(v) for k, v in dict(self.seeds).items()}}
        bad = [s for s, n in counts.items() if s not in defaults or n < 0]
        if bad:
            raise SceneSpecError(f"bad split counts for {bad}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "seeds", seeds)

    def to_json(self) -> str:
        return json.dumps(
            {
                "family": self.family,
                "scenes": list(self.scenes),
                "counts": dict(self.counts),
                "seeds": dict(self.seeds),
            },
            sort_keys=True,
        )


def parse_spec(raw: Mapping) -> CorpusSpec:
    """Build a CorpusSpec from a parsed JSON object ({} -> empty corpus)."""
    if not isinstance(raw, Mapping):
        raise SceneSpecError("corpus spec must be a JSON object")
    unknown = set(raw) - {"family", "scenes", "counts", "seeds"}
    if unknown:
        raise SceneSpecError(f"unknown corpus spec fields {sorted(unknown)}")
    return CorpusSpec(
        family=raw.get("family", "scenes"),
        scenes=tuple(raw.get("scenes", ())),
        counts=dict(raw.get("counts", {})),
        seeds=dict(raw.get("seeds", {})),
    )


def default_spec() -> CorpusSpec:
    """The full five-scene, eight-category corpus at its validated sizes."""
    return CorpusSpec(family="scenes", scenes=SCENE_ORDER)


def padding_lab_spec() -> CorpusSpec:
    """The three-scene corpus engineered to split padding help from harm."""
    return CorpusSpec(family="padding-lab", scenes=LAB_ORDER)


def iter_scene_specs(spec: CorpusSpec) -> Iterator[tuple[str, str, int, SyntheticSceneSpec]]:
    """Yield (scene, split, index, recipe) in canonical on-disk order."""
    order = scenes_for(spec.family)
    for split in ("train", "pretest", "test"):
        base = spec.seeds[split]
        for scene in spec.scenes:
            scene_index = order.index(scene)
            for i in range(spec.counts[split]):
                seed = base + 1000 * scene_index + i
                yield scene, split, i, scene_recipe(spec.family, scene, split, seed)


def build_corpus(spec: CorpusSpec, out_dir) -> DatasetManifest:
    """Render a corpus to disk: images/, masks/, and manifest.jsonl.

    Deterministic for a fixed spec: rerunning overwrites every file with
    identical bytes.  Returns the written manifest, loaded back verified.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    entries = []
    for scene, split, i, recipe in iter_scene_specs(spec):
        stem = f"{scene}_{split}_{i:03d}.png"
        image, mask, region_categories = generate_scene(recipe)
        write_image(out_dir / "images" / stem, image)
        write_mask(out_dir / "masks" / stem, mask)
        entries.append(
            ManifestEntry(
                image=f"images/{stem}",
                mask=f"masks/{stem}",
                split=split,
                scene=scene,
                region_categories=tuple(region_categories),
            )
        )

    write_manifest(out_dir / "manifest.jsonl", categories_for(spec.family), entries)
    return load_manifest(out_dir / "manifest.jsonl")
