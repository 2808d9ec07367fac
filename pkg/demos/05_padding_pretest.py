"""Decide per category whether zero padding helps, on the engineered rig.

Whether a region should be described with its background (original-content
padding) or without it (zero padding) depends on what the topic model learned
for its category, so the toolkit measures it: train topic models on both
padded variants of the training regions, classify held-out regions under all
four train/test padding combinations, and count correct predictions per
category. Each category keeps the test-side padding of its best combination.

The padding-lab corpus is built so both outcomes occur. Two categories share
one gray body and differ only by background color, which forces the model to
mix topics and makes zero padding destructive for them. A third category
changes shape between splits while sitting on a labeled background whose
topic soaks up context mass, so zero padding rescues it.

A linear classifier then learns to predict the chosen strategy from the
region descriptor alone, which is what the annotator has at inference time
when a region's true category is unknown.
"""

import argparse
from pathlib import Path

from scene_annotate import (
    PaddingStrategy,
    build_corpus,
    cedd,
    compare_adaptive,
    pad,
    padding_lab_spec,
    pretest,
    select_strategy,
    train_padding_classifier,
)

COMBOS = ("O/O", "Z/Z", "O/Z", "Z/O")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("demo_out/05_padding_pretest"))
    args = parser.parse_args()

    manifest = build_corpus(padding_lab_spec(), args.out / "data")

    def labeled(split):
        out = []
        for entry in manifest.entries_for(split):
            out += [r for r in manifest.load_regions(entry) if r.category != 0]
        return out

    train_regions = labeled("train")
    heldout = labeled("pretest")
    categories = [r.category for r in train_regions]
    features_o = [cedd(pad(r, PaddingStrategy.PAD_ORIGINAL)) for r in train_regions]
    features_z = [cedd(pad(r, PaddingStrategy.PAD_ZERO)) for r in train_regions]

    result = pretest(features_o, features_z, categories, heldout, seed=0, restarts=8)

    print("correct held-out predictions per category (train/test padding):")
    print(f"  {'category':12s} " + " ".join(f"{c:>4s}" for c in COMBOS) + "  chosen")
    counts = result.strategy_map.counts
    for category in sorted(counts):
        name = manifest.categories[category]
        row = " ".join(f"{counts[category][c]:4d}" for c in COMBOS)
        chosen = result.strategy_map.entries[category].value
        print(f"  {name:12s} {row}  pad-{chosen}")

    heldout_o = [cedd(pad(r, PaddingStrategy.PAD_ORIGINAL)) for r in heldout]
    classifier = train_padding_classifier(
        features_o + heldout_o,
        categories + [r.category for r in heldout],
        result.strategy_map,
        seed=0,
    )
    print(f"\nstrategy classifier training accuracy: {classifier.train_accuracy:.2f}")

    decisions = [select_strategy(classifier, f) for f in heldout_o]
    truths = [r.category for r in heldout]
    outcomes = [
        {combo: result.predictions[combo][i] == truths[i] for combo in COMBOS}
        for i in range(len(heldout))
    ]
    comparison = compare_adaptive(outcomes, truths, result.strategy_map, decisions)

    print(f"\ncorrect out of {comparison.total} held-out regions:")
    for combo in COMBOS:
        print(f"  fixed {combo}: {comparison.fixed[combo]}")
    print(f"  adaptive (classifier-driven): {comparison.adaptive}")
    print(f"  ideal (true-category lookup): {comparison.ideal}")


if __name__ == "__main__":
    main()
