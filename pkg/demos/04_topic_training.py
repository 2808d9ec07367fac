"""Fit the topic model on labeled regions and read the topics back.

Region descriptors become rows of a term matrix: region x feature mass. EM
alternates between explaining each observed (region, feature) cell by a
latent topic and re-estimating the per-topic feature distributions P(f|z)
and per-region topic mixtures P(z|r). The log-likelihood trace must never
decrease; training restarts from several seeds and keeps the best optimum.

Topics are anonymous. They get category names afterwards by majority vote of
the training regions they win. New regions never re-enter training: folding
in freezes P(f|z) and fits only the new region's topic mixture.
"""

import argparse
from pathlib import Path

import numpy as np

from scene_annotate import (
    CorpusSpec,
    PaddingStrategy,
    assign_topic_categories,
    build_corpus,
    build_term_matrix,
    cedd,
    fold_in,
    pad,
    train,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("demo_out/04_topic_training"))
    parser.add_argument("--k", type=int, default=None, help="topic count (default: one per category)")
    args = parser.parse_args()

    spec = CorpusSpec(scenes=("butterfly", "flower", "flight", "mountain", "cats"))
    manifest = build_corpus(spec, args.out / "data")

    regions = []
    for entry in manifest.entries_for("train"):
        regions += [r for r in manifest.load_regions(entry) if r.category != 0]
    categories = [r.category for r in regions]
    features = [cedd(pad(r, PaddingStrategy.PAD_ORIGINAL)) for r in regions]

    k = args.k or len(set(categories))
    matrix = build_term_matrix(features)
    print(f"term matrix: {matrix.n_regions} regions x {matrix.n_features} features, k={k}")

    model = train(matrix, k, seed=0, restarts=8)
    trace = model.loglik_trace
    print(f"EM converged after {model.iterations} iterations")
    print(f"log-likelihood: {trace[0]:.2f} (start) -> {trace[-1]:.2f} (final)")
    print(f"monotone trace: {bool(np.all(np.diff(trace) >= -1e-9))}")

    mapping = assign_topic_categories(model, categories)
    print("\ntopic -> category:")
    for topic in range(k):
        category = mapping[topic]
        top_features = np.argsort(model.p_f_given_z[topic])[::-1][:3]
        print(
            f"  topic {topic} -> {category} ({manifest.categories[category]:9s}) "
            f"heaviest feature bins {list(map(int, top_features))}"
        )

    # fold in one unseen pre-test region and rank topics for it
    parts = manifest.load_regions(manifest.entries_for("pretest")[0])
    probe = next(r for r in parts if r.category != 0)
    ranking = fold_in(model, cedd(pad(probe, PaddingStrategy.PAD_ORIGINAL)))
    predicted = mapping[ranking.top_topic]
    print(
        f"\nfolded-in pre-test region (true category {probe.category}): "
        f"top topic {ranking.top_topic} -> category {predicted} "
        f"with posterior {ranking.top_posterior:.3f}"
    )


if __name__ == "__main__":
    main()
