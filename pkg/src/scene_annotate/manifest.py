"""Dataset manifests: JSON Lines index tying images, masks, and labels.

A manifest file is one header line followed by one line per image.  The
header carries the format tag and the category name table; every entry
line names an image, its ground-truth region mask, the category of each
region label, a split tag, and the scene the image belongs to.  Paths are
stored relative to the manifest's own directory so a dataset moves as a
unit.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestError
from .raster import Region, extract_regions, read_image, read_mask

__all__ = [
    "FORMAT_TAG",
    "SPLITS",
    "DatasetManifest",
    "ManifestEntry",
    "load_manifest",
    "write_manifest",
]

log = logging.getLogger(__name__)

FORMAT_TAG = "scene-annotate-manifest"
FORMAT_VERSION = 1
SPLITS = ("train", "pretest", "test")


@dataclass(frozen=True)
class ManifestEntry:
    """One image: relative paths, split tag, scene name, per-region labels.

    region_categories[i] is the category id of mask label i, so its length
    must equal the number of regions in the mask.
    """

    image: str
    mask: str
    split: str
    scene: str
    region_categories: tuple[int, ...]

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestError(f"unknown split {self.split!r}; expected one of {SPLITS}")
        if not self.region_categories:
            raise ManifestError(f"entry {self.image!r} labels no regions")
        object.__setattr__(self, "region_categories", tuple(int(c) for c in self.region_categories))

    def to_json(self) -> str:
        return json.dumps(
            {
                "image": self.image,
                "mask": self.mask,
                "split": self.split,
                "scene": self.scene,
                "region_categories": list(self.region_categories),
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class DatasetManifest:
    """Loaded manifest: category table, entries, and the resolving root."""

    root: Path
    categories: dict[int, str]
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))
        object.__setattr__(self, "categories", {int(k): str(v) for k, v in self.categories.items()})
        object.__setattr__(self, "entries", tuple(self.entries))
        for entry in self.entries:
            missing = sorted(set(entry.region_categories) - set(self.categories))
            if missing:
                raise ManifestError(
                    f"entry {entry.image!r} uses categories {missing} "
                    "absent from the category table"
                )

    def split_sizes(self) -> dict[str, int]:
        sizes = {s: 0 for s in SPLITS}
        for entry in self.entries:
            sizes[entry.split] += 1
        return sizes

    def entries_for(self, split: str) -> list[ManifestEntry]:
        if split not in SPLITS:
            raise ManifestError(f"unknown split {split!r}; expected one of {SPLITS}")
        return [e for e in self.entries if e.split == split]

    def image_path(self, entry: ManifestEntry) -> Path:
        return self.root / entry.image

    def mask_path(self, entry: ManifestEntry) -> Path:
        return self.root / entry.mask

    def load_regions(self, entry: ManifestEntry) -> list[Region]:
        """Read one entry's image and mask and return its labeled regions."""
        image = read_image(self.image_path(entry))
        mask = read_mask(self.mask_path(entry))
        if mask.n_regions != len(entry.region_categories):
            raise ManifestError(
                f"entry {entry.image!r} labels {len(entry.region_categories)} regions "
                f"but its mask has {mask.n_regions}"
            )
        return extract_regions(mask, image, categories=entry.region_categories)


def write_manifest(path, categories, entries) -> None:
    """Write header plus entries as JSON Lines (atomically: temp + rename)."""
    path = Path(path)
    header = json.dumps(
        {
            "format": FORMAT_TAG,
            "version": FORMAT_VERSION,
            "categories": {str(int(k)): str(v) for k, v in categories.items()},
        },
        sort_keys=True,
    )
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for entry in entries:
            fh.write(entry.to_json() + "\n")
    os.replace(tmp, path)


def load_manifest(path, verify: bool = True) -> DatasetManifest:
    """Parse a manifest file; with verify, also check files and mask labels.

    Verification confirms every referenced image and mask exists and that
    each mask's region count matches its entry's label list.  Split sizes
    are logged either way.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest {path} does not exist")
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ManifestError(f"manifest {path} is empty (missing header line)")

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_TAG:
        raise ManifestError(f"manifest {path} lacks the {FORMAT_TAG!r} header")
    if header.get("version") != FORMAT_VERSION:
        raise ManifestError(
            f"manifest {path} has version {header.get('version')!r}; "
            f"this reader supports {FORMAT_VERSION}"
        )
    categories = header.get("categories", {})
    if not isinstance(categories, dict):
        raise ManifestError(f"manifest {path} category table must be an object")

    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        try:
            entries.append(
                ManifestEntry(
                    image=raw["image"],
                    mask=raw["mask"],
                    split=raw["split"],
                    scene=raw.get("scene", ""),
                    region_categories=raw["region_categories"],
                )
            )
        except KeyError as exc:
            raise ManifestError(f"{path}:{lineno}: missing field {exc}") from exc

    manifest = DatasetManifest(path.parent, categories, entries)
    if verify:
        for entry in manifest.entries:
            for ref in (manifest.image_path(entry), manifest.mask_path(entry)):
                if not ref.is_file():
                    raise ManifestError(f"manifest references missing file {ref}")
            mask = read_mask(manifest.mask_path(entry))
            if mask.n_regions != len(entry.region_categories):
                raise ManifestError(
                    f"entry {entry.image!r} labels {len(entry.region_categories)} "
                    f"regions but its mask has {mask.n_regions}"
                )
    sizes = manifest.split_sizes()
    log.info(
        "loaded manifest %s: %d train / %d pretest / %d test",
        path, sizes["train"], sizes["pretest"], sizes["test"],
    )
    return manifest
