"""Core image, mask, and region value types plus a synthetic-scene generator.

Everything here is immutable after construction (pixel buffers are marked
read-only) and all randomness flows through explicit seeds, so repeated runs
are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import ContractViolation, SceneSpecError


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit RGB pixel grid, row-major (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ContractViolation("image must be (H, W, 3) uint8")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ContractViolation("image must be at least 1x1")
        object.__setattr__(self, "pixels", _freeze(np.ascontiguousarray(px)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Per-pixel region labels forming a contiguous range 0..R-1."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ContractViolation("mask labels must be 2-D")
        lab = lab.astype(np.int32, copy=True)
        if lab.min() < 0:
            raise ContractViolation("region labels must be non-negative")
        present = np.unique(lab)
        if not np.array_equal(present, np.arange(len(present))):
            raise ContractViolation("region labels must be contiguous 0..R-1")
        object.__setattr__(self, "labels", _freeze(lab))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def n_regions(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True, eq=False)
class Region:
    """One segment: tight bbox, membership bitmask over the bbox, parent image.

    bbox is (x_min, y_min, x_max, y_max) with inclusive pixel coordinates.
    """

    id: int
    bbox: tuple[int, int, int, int]
    mask: np.ndarray
    area: int
    source: RasterImage
    category: int | None = None

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (y1 - y0 + 1, x1 - x0 + 1):
            raise ContractViolation("region mask shape must match bbox")
        if int(m.sum()) != self.area or self.area < 1:
            raise ContractViolation("region area must equal set bits and be >= 1")
        if not (m.any(axis=1)[0] and m.any(axis=1)[-1] and m.any(axis=0)[0] and m.any(axis=0)[-1]):
            raise ContractViolation("bbox is not tight around the region mask")
        object.__setattr__(self, "mask", _freeze(m.copy()))

    @property
    def bbox_width(self) -> int:
        return self.bbox[2] - self.bbox[0] + 1

    @property
    def bbox_height(self) -> int:
        return self.bbox[3] - self.bbox[1] + 1


def extract_regions(mask: RegionMask, image: RasterImage, categories=None) -> list[Region]:
    """Build one Region per mask label, with tight bboxes.

    The mask is trusted to be a valid partition (the segmenter guarantees
    connectivity); this only slices it apart. `categories`, when given, maps
    label -> ground-truth category id.
    """
    if (mask.height, mask.width) != (image.height, image.width):
        raise ContractViolation(
            f"mask {mask.width}x{mask.height} does not match image {image.width}x{image.height}"
        )
    regions = []
    labels = mask.labels
    for rid in range(mask.n_regions):
        member = labels == rid
        ys, xs = np.nonzero(member)
        x0, x1 = int(xs.min()), int(xs.max())
        y0, y1 = int(ys.min()), int(ys.max())
        sub = member[y0 : y1 + 1, x0 : x1 + 1]
        cat = None if categories is None else categories[rid]
        regions.append(
            Region(
                id=rid,
                bbox=(x0, y0, x1, y1),
                mask=sub,
                area=int(sub.sum()),
                source=image,
                category=cat,
            )
        )
    return regions


def filter_regions(regions: list[Region], min_area_fraction: float) -> list[Region]:
    """Keep regions with area >= min_area_fraction * image area, order preserved."""
    if not 0.0 <= min_area_fraction <= 1.0:
        raise ContractViolation("min_area_fraction must lie in [0, 1]")
    kept = []
    for region in regions:
        total = region.source.width * region.source.height
        if region.area >= min_area_fraction * total:
            kept.append(region)
    return kept


# --------------------------------------------------------------------------
# Synthetic scenes


@dataclass(frozen=True)
class Fill:
    """Fill pattern for a shape: solid color, two-tone stripes, or noise.

    kind: "solid" | "stripes" | "noise"
    color: primary RGB; color2: second stripe tone; stripe_width in pixels;
    orientation: "v" or "h"; amplitude: +- per-channel noise range.
    """

    kind: str
    color: tuple[int, int, int]
    color2: tuple[int, int, int] | None = None
    stripe_width: int = 4
    orientation: str = "v"
    amplitude: int = 0

    def paint(self, out: np.ndarray, member: np.ndarray, rng: np.random.Generator):
        """Paint this fill onto `out` wherever `member` is True."""
        h, w = member.shape
        ys, xs = np.nonzero(member)
        if self.kind == "solid":
            out[ys, xs] = self.color
        elif self.kind == "stripes":
            x0 = int(xs.min()) if len(xs) else 0
            y0 = int(ys.min()) if len(ys) else 0
            coord = xs - x0 if self.orientation == "v" else ys - y0
            first = (coord // self.stripe_width) % 2 == 0
            out[ys[first], xs[first]] = self.color
            out[ys[~first], xs[~first]] = self.color2
        elif self.kind == "noise":
            base = np.asarray(self.color, dtype=np.int32)
            jitter = rng.integers(-self.amplitude, self.amplitude + 1, size=(len(ys), 3))
            out[ys, xs] = np.clip(base + jitter, 0, 255).astype(np.uint8)
        else:
            raise SceneSpecError(f"unknown fill kind {self.kind!r}")


@dataclass(frozen=True)
class Placement:
    """One shape placed on the canvas: geometry, fill, category label."""

    shape: str  # "rect" | "ellipse" | "triangle"
    x: int
    y: int
    width: int
    height: int
    fill: Fill
    category: int

    def member_mask(self, canvas_w: int, canvas_h: int) -> np.ndarray:
        if self.width < 1 or self.height < 1:
            raise SceneSpecError("placement must be at least 1x1")
        if self.x < 0 or self.y < 0 or self.x + self.width > canvas_w or self.y + self.height > canvas_h:
            raise SceneSpecError(
                f"placement {self.shape} at ({self.x},{self.y}) size "
                f"{self.width}x{self.height} exceeds {canvas_w}x{canvas_h} canvas"
            )
        member = np.zeros((canvas_h, canvas_w), dtype=bool)
        ys, xs = np.mgrid[self.y : self.y + self.height, self.x : self.x + self.width]
        if self.shape == "rect":
            member[ys, xs] = True
        elif self.shape == "ellipse":
            cy = self.y + (self.height - 1) / 2.0
            cx = self.x + (self.width - 1) / 2.0
            ry = max(self.height / 2.0, 0.5)
            rx = max(self.width / 2.0, 0.5)
            inside = ((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2 <= 1.0
            member[ys[inside], xs[inside]] = True
        elif self.shape == "triangle":
            # isoceles, apex at top-center, base along the bottom edge
            rel_y = (ys - self.y) / max(self.height - 1, 1)
            cx = self.x + (self.width - 1) / 2.0
            half = rel_y * (self.width - 1) / 2.0
            inside = np.abs(xs - cx) <= half + 1e-9
            member[ys[inside], xs[inside]] = True
        else:
            raise SceneSpecError(f"unknown shape {self.shape!r}")
        if not member.any():
            # guard: degenerate geometry (e.g. 1px ellipse) still marks its center
            member[int(self.y + self.height // 2), int(self.x + self.width // 2)] = True
        return member


@dataclass(frozen=True)
class SyntheticSceneSpec:
    """Deterministic recipe for one scene: canvas, background, placements, seed."""

    width: int
    height: int
    background: Fill
    background_category: int
    placements: tuple[Placement, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "placements", tuple(self.placements))


def generate_scene(spec: SyntheticSceneSpec):
    """Render a scene spec into (image, ground-truth mask, category labels).

    Each placement becomes one region (later placements occlude earlier ones)
    and the leftover background is one region. Fully occluded placements are
    dropped and labels re-compressed so the mask stays contiguous.
    """
    rng = np.random.default_rng(spec.seed)
    out = np.zeros((spec.height, spec.width, 3), dtype=np.uint8)
    labels = np.zeros((spec.height, spec.width), dtype=np.int32)

    everything = np.ones((spec.height, spec.width), dtype=bool)
    spec.background.paint(out, everything, rng)

    for idx, placement in enumerate(spec.placements):
        member = placement.member_mask(spec.width, spec.height)
        placement.fill.paint(out, member, rng)
        labels[member] = idx + 1

    raw_categories = [spec.background_category] + [p.category for p in spec.placements]
    present = np.unique(labels)
    remap = {int(old): new for new, old in enumerate(present)}
    compressed = np.vectorize(remap.get, otypes=[np.int32])(labels)
    categories = [raw_categories[int(old)] for old in present]

    return RasterImage(out), RegionMask(compressed), categories


# --------------------------------------------------------------------------
# PNG I/O


def write_image(path, image: RasterImage):
    Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")


def read_image(path) -> RasterImage:
    with Image.open(path) as img:
        rgb = img.convert("RGB")  # strips alpha
        return RasterImage(np.asarray(rgb, dtype=np.uint8))


def write_mask(path, mask: RegionMask):
    if mask.n_regions > 65536:
        raise ContractViolation("mask PNG format supports at most 65536 regions")
    Image.fromarray(mask.labels.astype(np.uint16)).save(path, format="PNG")


def read_mask(path) -> RegionMask:
    with Image.open(path) as img:
        arr = np.asarray(img)
        if arr.ndim != 2:
            raise ContractViolation(f"mask PNG {path} is not single-channel")
        return RegionMask(arr.astype(np.int32))
