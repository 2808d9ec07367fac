"""Command-line surface tying the pipeline together.

Subcommands: synth, segment, extract, train, annotate, evaluate.  Every
command is deterministic for fixed inputs and seeds, writes outputs
atomically, and reports errors on stderr with a stable exit code:

  0  success
  2  usage error (bad flags, unknown subcommand)
  3  data or contract error (malformed files, impossible requests)
  4  numerical failure inside the topic model

Settings resolve as: command-line flag > --config JSON file > built-in
default.  SCENE_ANNOTATE_LOG sets the log level (DEBUG, INFO, ...).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .annotator import AnnotatorConfig, annotate
from .bundle import ModelBundle, bundle_digest, load_bundle, save_bundle
from .corpus import UNLABELED_CATEGORY, build_corpus, parse_spec
from .descriptor import DescriptorConfig, cedd
from .errors import NumericalFailure, SceneAnnotateError, SceneSpecError
from .evaluation import (
    AdaptiveComparison,
    combo_totals,
    compare_adaptive,
    confusion,
    ideal_total,
    mask_agreement,
    pretest_counts_csv,
    pretest_counts_json,
    prf,
)
from .manifest import DatasetManifest, ManifestError, load_manifest
from .padding import (
    PaddingStrategy,
    pad,
    pretest,
    select_strategy,
    train_padding_classifier,
)
from .plsa import assign_topic_categories, build_term_matrix, fold_in, train
from .raster import read_image, read_mask, write_image, write_mask
from .segmenter import SegmenterConfig, segment

__all__ = ["DEFAULTS", "main"]

log = logging.getLogger(__name__)

DEFAULTS = {
    "tm": 0.55,
    "k": None,  # None: number of training categories
    "tau": 0.3,
    "min_area_fraction": 0.01,
    "tol": 1e-6,
    "max_iters": 500,
    "restarts": 3,
    "seed": 0,
    "jobs": 1,
    "block_size": 8,
    "edge_threshold": 0.05,
}

_STRATEGIES = {"original": PaddingStrategy.PAD_ORIGINAL, "zero": PaddingStrategy.PAD_ZERO}


# --------------------------------------------------------------------------
# configuration and small helpers


def _resolve_config(args) -> dict:
    """Merge defaults, --config file, and explicit flags, in that order."""
    cfg = dict(DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise SceneSpecError(f"config file {path} does not exist")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SceneSpecError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise SceneSpecError(f"config file {path} must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise SceneSpecError(f"unknown config keys {sorted(unknown)}")
        cfg.update(loaded)
    for key in ("seed", "tau", "tm", "jobs"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _parallel_map(fn, items, jobs: int) -> list:
    """Order-preserving map, threaded when jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _float_cell(value: float) -> str:
    return repr(float(value))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _labeled_regions(manifest: DatasetManifest, split: str) -> list:
    """All regions of a split carrying a training label (category != 0)."""
    regions = []
    for entry in manifest.entries_for(split):
        for region in manifest.load_regions(entry):
            if region.category != UNLABELED_CATEGORY:
                regions.append(region)
    return regions


def _image_paths(target: Path) -> list[Path]:
    if target.is_dir():
        paths = sorted(p for p in target.iterdir() if p.suffix.lower() == ".png")
        if not paths:
            raise SceneSpecError(f"directory {target} holds no PNG images")
        return paths
    if target.is_file():
        return [target]
    raise SceneSpecError(f"input {target} does not exist")


def _manifest_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    if not spec_path.is_file():
        raise SceneSpecError(f"corpus spec {spec_path} does not exist")
    try:
        raw = json.loads(spec_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SceneSpecError(f"corpus spec {spec_path} is not valid JSON: {exc}") from exc
    spec = parse_spec(raw)
    if args.seed is not None:
        # shift every split's seed base; content changes, layout does not
        spec = parse_spec(
            {
                "family": spec.family,
                "scenes": list(spec.scenes),
                "counts": dict(spec.counts),
                "seeds": {s: b + args.seed for s, b in spec.seeds.items()},
            }
        )
    manifest = build_corpus(spec, _out_dir(args))
    sizes = manifest.split_sizes()
    print(
        f"wrote {len(manifest.entries)} images "
        f"({sizes['train']} train / {sizes['pretest']} pretest / {sizes['test']} test) "
        f"to {args.out}"
    )
    return 0


# --------------------------------------------------------------------------
# segment


def cmd_segment(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    seg_cfg = SegmenterConfig(tm=cfg["tm"])
    paths = [p for target in args.images for p in _image_paths(Path(target))]

    def one(path: Path) -> str:
        mask = segment(read_image(path), seg_cfg)
        dest = out / f"{path.stem}_mask.png"
        write_mask(dest, mask)
        return f"{path} -> {mask.n_regions} regions ({dest})"

    for line in _parallel_map(one, paths, int(cfg["jobs"])):
        print(line)
    return 0


# --------------------------------------------------------------------------
# extract


def cmd_extract(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    manifest = load_manifest(args.manifest)
    splits = ("train", "pretest", "test") if args.split == "all" else (args.split,)
    strategies = _STRATEGIES if args.padding == "both" else {args.padding: _STRATEGIES[args.padding]}
    descriptor_config = DescriptorConfig(cfg["block_size"], cfg["edge_threshold"])

    rows = []
    for split in splits:
        for entry in manifest.entries_for(split):
            for region in manifest.load_regions(entry):
                rows.append((entry, split, region))
    if not rows:
        raise ManifestError(f"manifest has no regions in split(s) {','.join(splits)}")

    for name, strategy in strategies.items():
        lines = [
            "image,split,region,category,"
            + ",".join(f"f{i:03d}" for i in range(144))
        ]
        for entry, split, region in rows:
            feature = cedd(pad(region, strategy), descriptor_config)
            values = ",".join(_float_cell(v) for v in np.asarray(feature))
            lines.append(f"{entry.image},{split},{region.id},{region.category},{values}")
        dest = out / f"features_{name}.csv"
        _write_text(dest, "\n".join(lines) + "\n")
        print(f"wrote {len(rows)} feature rows to {dest}")
    return 0


# --------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    manifest = load_manifest(args.manifest)
    sizes = manifest.split_sizes()
    if sizes["train"] == 0 or sizes["pretest"] == 0:
        raise ManifestError(
            f"training needs train and pretest splits; manifest has "
            f"{sizes['train']} train / {sizes['pretest']} pretest images"
        )

    train_regions = _labeled_regions(manifest, "train")
    heldout_regions = _labeled_regions(manifest, "pretest")
    categories = [r.category for r in train_regions]
    if len(set(categories)) < 2:
        raise ManifestError(
            f"training needs at least 2 categories; manifest trains {sorted(set(categories))}"
        )

    descriptor_config = DescriptorConfig(cfg["block_size"], cfg["edge_threshold"])
    features_o = [cedd(pad(r, PaddingStrategy.PAD_ORIGINAL), descriptor_config) for r in train_regions]
    features_z = [cedd(pad(r, PaddingStrategy.PAD_ZERO), descriptor_config) for r in train_regions]

    k = int(cfg["k"]) if cfg["k"] is not None else len(set(categories))
    seed = int(cfg["seed"])
    log.info("training topic model: %d regions, k=%d, seed=%d", len(train_regions), k, seed)
    model = train(
        build_term_matrix(features_o),
        k,
        max_iters=int(cfg["max_iters"]),
        tol=float(cfg["tol"]),
        seed=seed,
        restarts=int(cfg["restarts"]),
    )
    topic_categories = assign_topic_categories(model, categories)

    result = pretest(
        features_o,
        features_z,
        categories,
        heldout_regions,
        k=k,
        seed=seed,
        max_iters=int(cfg["max_iters"]),
        tol=float(cfg["tol"]),
        restarts=int(cfg["restarts"]),
        descriptor_config=descriptor_config,
    )

    # the pre-test hold-outs are labeled training data too; the strategy
    # predictor trains on every labeled region's original-content feature
    heldout_o = [cedd(pad(r, PaddingStrategy.PAD_ORIGINAL), descriptor_config) for r in heldout_regions]
    classifier = train_padding_classifier(
        features_o + heldout_o,
        categories + [r.category for r in heldout_regions],
        result.strategy_map,
        seed=seed,
    )

    decisions = [select_strategy(classifier, f) for f in heldout_o]
    truths = [r.category for r in heldout_regions]
    outcomes = [
        {combo: result.predictions[combo][i] == truths[i] for combo in ("O/O", "Z/Z", "O/Z", "Z/O")}
        for i in range(len(heldout_regions))
    ]
    comparison = compare_adaptive(outcomes, truths, result.strategy_map, decisions)

    manifest_path = Path(args.manifest)
    mtime = datetime.fromtimestamp(manifest_path.stat().st_mtime, tz=timezone.utc)
    bundle = ModelBundle(
        model=model,
        strategy_map=result.strategy_map,
        classifier=classifier,
        descriptor_config=descriptor_config,
        segmenter_config=SegmenterConfig(tm=float(cfg["tm"])),
        topic_categories=topic_categories,
        category_names=manifest.categories,
        provenance={
            "dataset_hash": _manifest_digest(manifest_path),
            "dataset_mtime": mtime.isoformat(),
            "manifest": manifest_path.name,
            "seed": seed,
            "k": k,
            "restarts": int(cfg["restarts"]),
            "tol": float(cfg["tol"]),
            "max_iters": int(cfg["max_iters"]),
            "tm": float(cfg["tm"]),
        },
    )
    bundle_path = out / "model.scnb"
    save_bundle(bundle, bundle_path)

    train_counts = {c: categories.count(c) for c in sorted(set(categories))}
    test_counts = {c: truths.count(c) for c in sorted(set(truths))}
    counts = result.strategy_map.counts
    _write_text(out / "pretest_counts.csv", pretest_counts_csv(counts, train_counts, test_counts))
    _write_text(out / "pretest_counts.json", pretest_counts_json(counts) + "\n")
    _write_text(out / "padding_comparison.csv", comparison.to_csv())
    _write_text(out / "padding_comparison.json", comparison.to_json() + "\n")
    trace_lines = ["iteration,loglik"] + [
        f"{i},{_float_cell(v)}" for i, v in enumerate(model.loglik_trace)
    ]
    _write_text(out / "loglik_trace.csv", "\n".join(trace_lines) + "\n")

    print(
        f"trained k={k} on {len(train_regions)} regions "
        f"({len(set(categories))} categories), pre-tested on {len(heldout_regions)}; "
        f"bundle {bundle_path} sha256 {bundle_digest(bundle_path)[:12]}"
    )
    return 0


# --------------------------------------------------------------------------
# annotate


def cmd_annotate(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    bundle = load_bundle(args.bundle)
    annotator_cfg = AnnotatorConfig(
        segmenter=bundle.segmenter_config,
        descriptor=bundle.descriptor_config,
        tau=float(cfg["tau"]),
        min_area_fraction=float(cfg["min_area_fraction"]),
        topic_categories=bundle.topic_categories,
        category_names=bundle.category_names,
    )
    paths = _image_paths(Path(args.images))

    def one(path: Path) -> str:
        scene = annotate(read_image(path), bundle.model, bundle.classifier, annotator_cfg)
        write_image(out / f"{path.stem}_overlay.png", scene.overlay)
        _write_text(out / f"{path.stem}.json", scene.to_json() + "\n")
        tagged = sum(1 for a in scene.annotations if a.tag is not None)
        return f"{path}: {tagged}/{len(scene.annotations)} regions tagged"

    for line in _parallel_map(one, paths, int(cfg["jobs"])):
        print(line)
    return 0


# --------------------------------------------------------------------------
# evaluate


def _evaluate_pretest(bundle: ModelBundle, manifest: DatasetManifest, manifest_path: Path):
    """Rebuild the padding comparison against this manifest's pretest split.

    The bundle keeps only the original-padding model, so the fixed-strategy
    and oracle columns come from the stored pre-test tables; the adaptive
    column is recomputed live with the bundle's classifier.  Only valid when
    the manifest is the one the bundle was trained on (hash match).
    """
    stored_hash = bundle.provenance.get("dataset_hash")
    if stored_hash != _manifest_digest(manifest_path):
        log.info("manifest differs from the training dataset; skipping padding comparison")
        return None
    heldout = _labeled_regions(manifest, "pretest")
    if not heldout:
        return None
    correct = 0
    for region in heldout:
        feature_o = cedd(pad(region, PaddingStrategy.PAD_ORIGINAL), bundle.descriptor_config)
        decision = select_strategy(bundle.classifier, feature_o)
        feature = (
            feature_o
            if decision is PaddingStrategy.PAD_ORIGINAL
            else cedd(pad(region, PaddingStrategy.PAD_ZERO), bundle.descriptor_config)
        )
        ranking = fold_in(bundle.model, feature)
        predicted = bundle.topic_categories[ranking.top_topic]
        correct += predicted == region.category
    counts = bundle.strategy_map.counts
    total = sum(bundle.strategy_map.totals.values())
    if total != len(heldout):
        raise ManifestError(
            f"stored pre-test tables cover {total} regions but the manifest "
            f"pretest split has {len(heldout)}"
        )
    return AdaptiveComparison(
        total=total,
        ideal=ideal_total(counts),
        adaptive=correct,
        fixed=combo_totals(counts),
    )


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    bundle = load_bundle(args.bundle)
    manifest_path = Path(args.manifest)
    manifest = load_manifest(manifest_path)

    test_entries = manifest.entries_for("test")
    if not test_entries:
        raise ManifestError("manifest has no test split to evaluate")

    counts = bundle.strategy_map.counts
    _write_text(
        out / "pretest_counts.csv",
        pretest_counts_csv(counts, test_counts=bundle.strategy_map.totals),
    )
    _write_text(out / "pretest_counts.json", pretest_counts_json(counts) + "\n")
    strategy_lines = ["category,name,strategy"]
    for cat in sorted(bundle.strategy_map.entries):
        name = bundle.category_names.get(cat, str(cat))
        strategy_lines.append(f"{cat},{name},{bundle.strategy_map.entries[cat].value}")
    _write_text(out / "strategies.csv", "\n".join(strategy_lines) + "\n")

    comparison = _evaluate_pretest(bundle, manifest, manifest_path)
    if comparison is not None:
        _write_text(out / "padding_comparison.csv", comparison.to_csv())
        _write_text(out / "padding_comparison.json", comparison.to_json() + "\n")

    annotator_cfg = AnnotatorConfig(
        segmenter=bundle.segmenter_config,
        descriptor=bundle.descriptor_config,
        tau=float(cfg["tau"]),
        min_area_fraction=float(cfg["min_area_fraction"]),
        topic_categories=bundle.topic_categories,
        category_names=bundle.category_names,
    )

    def one(entry):
        image = read_image(manifest.image_path(entry))
        truth_mask = read_mask(manifest.mask_path(entry))
        scene = annotate(image, bundle.model, bundle.classifier, annotator_cfg)
        agreement = mask_agreement(scene.mask, truth_mask)
        pairs = []
        labels = scene.mask.labels
        for gt_id, category in enumerate(entry.region_categories):
            if category == UNLABELED_CATEGORY:
                continue
            member = truth_mask.labels == gt_id
            overlap = np.bincount(labels[member], minlength=scene.mask.n_regions)
            tag = scene.annotation_for(int(np.argmax(overlap))).tag
            pairs.append((category, tag))
        return pairs, agreement

    results = _parallel_map(one, test_entries, int(cfg["jobs"]))
    pairs = [pair for entry_pairs, _ in results for pair in entry_pairs]
    agreements = [agreement for _, agreement in results]

    report = prf(pairs)
    _write_text(out / "annotation_prf.csv", report.to_csv())
    _write_text(out / "annotation_prf.json", report.to_json() + "\n")

    labels = sorted({t for t, _ in pairs} | {p for _, p in pairs if p is not None})
    if any(p is None for _, p in pairs):
        labels = labels + ["none"]
    table = confusion([(t, "none" if p is None else p) for t, p in pairs], labels)
    _write_text(out / "confusion.csv", table.to_csv())
    _write_text(out / "confusion.json", table.to_json() + "\n")

    seg_lines = ["image,agreement"] + [
        f"{entry.image},{_float_cell(agreement)}"
        for entry, agreement in zip(test_entries, agreements)
    ]
    _write_text(out / "segmentation_agreement.csv", "\n".join(seg_lines) + "\n")

    print(
        f"evaluated {len(test_entries)} test images / {len(pairs)} labeled regions: "
        f"macro F {report.macro_f:.3f}, mean mask agreement {float(np.mean(agreements)):.3f}"
    )
    return 0


# --------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scene-annotate",
        description="Region-based total scene annotation with adaptive padding.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, seed=True, tau=False, tm=False, jobs=False):
        p.add_argument("--config", help="JSON file overriding built-in defaults")
        p.add_argument("--out", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, help="random seed")
        if tau:
            p.add_argument("--tau", type=float, help="tag confidence threshold")
        if tm:
            p.add_argument("--tm", type=float, help="color quantization threshold")
        if jobs:
            p.add_argument("--jobs", type=int, help="parallel workers for batch steps")

    p = sub.add_parser("synth", help="generate a synthetic corpus from a spec file")
    p.add_argument("spec", help="corpus spec JSON")
    common(p)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("segment", help="segment images into region masks")
    p.add_argument("images", nargs="+", help="image files or directories")
    common(p, seed=False, tm=True, jobs=True)
    p.set_defaults(handler=cmd_segment)

    p = sub.add_parser("extract", help="write per-region descriptor tables")
    p.add_argument("manifest", help="dataset manifest")
    p.add_argument("--split", default="all", choices=("train", "pretest", "test", "all"))
    p.add_argument("--padding", default="both", choices=("original", "zero", "both"))
    common(p, seed=False)
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("train", help="train a model bundle from a manifest")
    p.add_argument("manifest", help="dataset manifest with train and pretest splits")
    common(p, tm=True)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("annotate", help="annotate images with a trained bundle")
    p.add_argument("bundle", help="model bundle file")
    p.add_argument("images", help="image file or directory")
    common(p, seed=False, tau=True, jobs=True)
    p.set_defaults(handler=cmd_annotate)

    p = sub.add_parser("evaluate", help="score a bundle against a manifest's test split")
    p.add_argument("bundle", help="model bundle file")
    p.add_argument("manifest", help="dataset manifest with a test split")
    common(p, seed=False, tau=True, jobs=True)
    p.set_defaults(handler=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("SCENE_ANNOTATE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        return args.handler(args)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (SceneAnnotateError, FileNotFoundError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
