"""End-to-end annotation tests on small synthetic scenes."""

import json

import numpy as np
import pytest

from scene_annotate.annotator import (
    AnnotatorConfig,
    RegionAnnotation,
    SceneAnnotation,
    annotate,
    default_palette,
    render_overlay,
)
from scene_annotate.descriptor import cedd
from scene_annotate.errors import ContractViolation, DegenerateInputError
from scene_annotate.padding import PaddingClassifier, PaddingStrategy, pad
from scene_annotate.plsa import assign_topic_categories, build_term_matrix, train
from scene_annotate.raster import (
    Fill,
    Placement,
    RasterImage,
    RegionMask,
    SyntheticSceneSpec,
    extract_regions,
    generate_scene,
)
from scene_annotate.segmenter import SegmenterConfig

PAD_O = PaddingStrategy.PAD_ORIGINAL
PAD_Z = PaddingStrategy.PAD_ZERO
BLUE = (30, 60, 200)
RED = (200, 30, 30)
CAT_BG, CAT_SQUARE = 0, 1


def make_scene(x=10, y=10, size=12):
    spec = SyntheticSceneSpec(
        width=32,
        height=32,
        background=Fill("solid", BLUE),
        background_category=CAT_BG,
        placements=[Placement("rect", x, y, size, size, Fill("solid", RED), CAT_SQUARE)],
    )
    return generate_scene(spec)


def constant_classifier(strategy, dim=144):
    bias = 1.0 if strategy is PAD_Z else -1.0
    return PaddingClassifier(
        weights=np.zeros(dim),
        bias=bias,
        feature_mean=np.zeros(dim),
        feature_std=np.ones(dim),
        reg=1e-3,
        epochs=0,
        seed=0,
        degenerate=True,
    )


def trained_setup(seed=0):
    """Model + topic map trained on ground-truth regions of shifted scenes."""
    features, categories = [], []
    for x, y in [(4, 4), (10, 8), (16, 14), (6, 16)]:
        image, mask, cats = make_scene(x, y)
        for region in extract_regions(mask, image, categories=cats):
            features.append(cedd(pad(region, PAD_O)))
            categories.append(region.category)
    model = train(build_term_matrix(features), 2, seed=seed)
    topic_map = assign_topic_categories(model, categories)
    return model, topic_map


class TestAnnotate:
    def test_two_region_scene_tagged_correctly(self):
        model, topic_map = trained_setup()
        image, mask, cats = make_scene(12, 12)
        cfg = AnnotatorConfig(topic_categories=topic_map)
        scene = annotate(image, model, constant_classifier(PAD_O), cfg)

        assert scene.mask.n_regions == 2
        assert len(scene.annotations) == 2
        # segmentation scans top-left first, so region 0 is the background
        truth = {0: CAT_BG, 1: CAT_SQUARE}
        for ann in scene.annotations:
            assert ann.tag == truth[ann.region_id]
            assert ann.strategy_used is PAD_O
            assert ann.ranking.top_posterior >= cfg.tau

    def test_tau_above_one_strips_all_tags(self):
        model, topic_map = trained_setup()
        image, _, _ = make_scene()
        cfg = AnnotatorConfig(tau=1.1, topic_categories=topic_map)
        scene = annotate(image, model, constant_classifier(PAD_O), cfg)
        assert all(ann.tag is None for ann in scene.annotations)
        assert all(ann.ranking is not None for ann in scene.annotations)

    def test_tau_zero_tags_every_region(self):
        model, topic_map = trained_setup()
        image, _, _ = make_scene()
        cfg = AnnotatorConfig(tau=0.0, topic_categories=topic_map)
        scene = annotate(image, model, constant_classifier(PAD_O), cfg)
        for ann in scene.annotations:
            assert ann.tag == topic_map[ann.ranking.top_topic]

    def test_tau_only_toggles_tags(self):
        model, topic_map = trained_setup()
        image, _, _ = make_scene()
        low = annotate(
            image, model, constant_classifier(PAD_O),
            AnnotatorConfig(tau=0.0, topic_categories=topic_map),
        )
        high = annotate(
            image, model, constant_classifier(PAD_O),
            AnnotatorConfig(tau=1.1, topic_categories=topic_map),
        )
        for a, b in zip(low.annotations, high.annotations):
            assert a.region_id == b.region_id
            assert a.strategy_used == b.strategy_used
            assert np.array_equal(a.ranking.posterior, b.ranking.posterior)
            assert np.array_equal(a.ranking.order, b.ranking.order)

    def test_deterministic_rerun(self):
        model, topic_map = trained_setup()
        image, _, _ = make_scene()
        cfg = AnnotatorConfig(topic_categories=topic_map)
        first = annotate(image, model, constant_classifier(PAD_O), cfg)
        second = annotate(image, model, constant_classifier(PAD_O), cfg)
        assert first.overlay.pixels.tobytes() == second.overlay.pixels.tobytes()
        assert first.to_json() == second.to_json()

    def test_full_bbox_region_ranking_is_classifier_invariant(self):
        # two abutting rectangles: every region's mask fills its bbox, so
        # zero padding changes nothing and neither may the classifier
        model, topic_map = trained_setup()
        spec = SyntheticSceneSpec(
            width=32,
            height=32,
            background=Fill("solid", BLUE),
            background_category=CAT_BG,
            placements=[Placement("rect", 0, 0, 16, 32, Fill("solid", RED), CAT_SQUARE)],
        )
        image, _, _ = generate_scene(spec)
        cfg = AnnotatorConfig(topic_categories=topic_map)
        with_o = annotate(image, model, constant_classifier(PAD_O), cfg)
        with_z = annotate(image, model, constant_classifier(PAD_Z), cfg)
        assert [a.strategy_used for a in with_o.annotations] == [PAD_O, PAD_O]
        assert [a.strategy_used for a in with_z.annotations] == [PAD_Z, PAD_Z]
        for a, b in zip(with_o.annotations, with_z.annotations):
            assert np.array_equal(a.ranking.posterior, b.ranking.posterior)
            assert a.tag == b.tag

    def test_small_region_annotated_tagless(self):
        model, topic_map = trained_setup()
        image, _, _ = make_scene(14, 14, size=3)  # 9 px on a 32x32 canvas
        cfg = AnnotatorConfig(
            segmenter=SegmenterConfig(min_region_px=1),
            min_area_fraction=0.05,  # the grown speck stays well under 51 px
            topic_categories=topic_map,
        )
        scene = annotate(image, model, constant_classifier(PAD_O), cfg)
        small = min(scene.annotations, key=lambda a: (a.bbox[2] - a.bbox[0]))
        assert small.tag is None and small.ranking is None
        assert small.strategy_used is None
        assert small.note == "below minimum area fraction"
        big = max(scene.annotations, key=lambda a: (a.bbox[2] - a.bbox[0]))
        assert big.tag == CAT_BG

    def test_undescribable_region_annotated_tagless_with_note(self):
        model, topic_map = trained_setup()
        image, _, _ = make_scene(14, 14, size=3)
        cfg = AnnotatorConfig(
            segmenter=SegmenterConfig(min_region_px=1),
            min_area_fraction=0.0,  # keep the speck; its 3x3 bbox has no block
            topic_categories=topic_map,
        )
        scene = annotate(image, model, constant_classifier(PAD_O), cfg)
        small = min(scene.annotations, key=lambda a: (a.bbox[2] - a.bbox[0]))
        assert small.tag is None and small.ranking is None
        assert small.note != ""

    def test_tiny_image_rejected(self):
        model, topic_map = trained_setup()
        clf = constant_classifier(PAD_O)
        for shape in ((1, 1, 3), (1, 5, 3), (7, 1, 3)):
            with pytest.raises(DegenerateInputError):
                annotate(RasterImage(np.zeros(shape, dtype=np.uint8)), model, clf)

    def test_incomplete_topic_map_rejected(self):
        model, _ = trained_setup()
        image, _, _ = make_scene()
        cfg = AnnotatorConfig(topic_categories={0: 5})
        with pytest.raises(ContractViolation):
            annotate(image, model, constant_classifier(PAD_O), cfg)

    def test_sidecar_json_structure(self):
        model, topic_map = trained_setup()
        image, _, _ = make_scene()
        scene = annotate(
            image, model, constant_classifier(PAD_O),
            AnnotatorConfig(topic_categories=topic_map),
        )
        blob = json.loads(scene.to_json())
        assert [rec["region"] for rec in blob["regions"]] == [0, 1]
        for rec in blob["regions"]:
            assert len(rec["bbox"]) == 4
            assert rec["strategy"] == "original"
            probs = [p for _, p in rec["ranking"]]
            assert probs == sorted(probs, reverse=True)
            assert rec["tag"] in (CAT_BG, CAT_SQUARE)

    def test_config_validation(self):
        with pytest.raises(ContractViolation):
            AnnotatorConfig(tau=-0.1)
        with pytest.raises(ContractViolation):
            AnnotatorConfig(tau=float("nan"))
        with pytest.raises(ContractViolation):
            AnnotatorConfig(min_area_fraction=1.5)

    def test_tag_requires_ranking(self):
        with pytest.raises(ContractViolation):
            RegionAnnotation(0, (0, 0, 1, 1), None, 3, PAD_O)


def plain_annotation(region_id, tag):
    if tag is None:
        return RegionAnnotation(region_id, (0, 0, 0, 0), None, None, None)
    from scene_annotate.plsa import TopicRanking

    ranking = TopicRanking(np.array([1.0]), np.array([0]))
    return RegionAnnotation(region_id, (0, 0, 0, 0), ranking, tag, PAD_O)


def blend_oracle(pixels, labels, tags, palette, alpha=0.4):
    out = pixels.astype(float).copy()
    h, w = labels.shape
    for yy in range(h):
        for xx in range(w):
            tag = tags.get(int(labels[yy, xx]))
            if tag is not None:
                for ch in range(3):
                    out[yy, xx, ch] = (1 - alpha) * out[yy, xx, ch] + alpha * palette[tag][ch]
    return np.rint(out).astype(np.uint8)


class TestRenderOverlay:
    def test_blend_matches_per_pixel_oracle(self):
        rng = np.random.default_rng(4)
        pixels = rng.integers(0, 256, size=(6, 9, 3), dtype=np.uint8)
        labels = np.repeat(np.array([[0, 1, 2]]), 6, axis=0).repeat(3, axis=1)
        palette = {7: (10, 220, 30), 8: (250, 10, 120)}
        tags = {0: 7, 1: None, 2: 8}
        annotations = [plain_annotation(i, tags[i]) for i in range(3)]
        overlay = render_overlay(
            RasterImage(pixels), RegionMask(labels.astype(np.int32)), annotations,
            palette=palette, category_names={7: " ", 8: " "},
        )
        want = blend_oracle(pixels, labels, tags, palette)
        # boundary columns get inverted after blending
        boundary = np.zeros(labels.shape, dtype=bool)
        boundary[:, [2, 3, 5, 6]] = True
        want[boundary] = 255 - want[boundary]
        assert np.array_equal(overlay.pixels, want)

    def test_untagged_scene_keeps_original_pixels_plus_outline(self):
        rng = np.random.default_rng(9)
        pixels = rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8)
        labels = np.zeros((4, 4), dtype=np.int32)
        labels[:, 2:] = 1
        annotations = [plain_annotation(0, None), plain_annotation(1, None)]
        overlay = render_overlay(RasterImage(pixels), RegionMask(labels), annotations)
        boundary = np.zeros((4, 4), dtype=bool)
        boundary[:, 1:3] = True
        assert np.array_equal(overlay.pixels[~boundary], pixels[~boundary])
        assert np.array_equal(overlay.pixels[boundary], 255 - pixels[boundary])

    def test_single_region_untagged_is_identity(self):
        pixels = np.full((5, 5, 3), 77, dtype=np.uint8)
        overlay = render_overlay(
            RasterImage(pixels),
            RegionMask(np.zeros((5, 5), dtype=np.int32)),
            [plain_annotation(0, None)],
        )
        assert np.array_equal(overlay.pixels, pixels)

    def test_adjacent_same_tag_regions_merge_into_one_blob(self):
        pixels = np.full((6, 9, 3), 100, dtype=np.uint8)
        labels = np.repeat(np.array([[0, 1, 2]]), 6, axis=0).repeat(3, axis=1)
        annotations = [
            plain_annotation(0, 5),
            plain_annotation(1, 5),
            plain_annotation(2, None),
        ]
        overlay = render_overlay(
            RasterImage(pixels), RegionMask(labels.astype(np.int32)), annotations,
            palette={5: (200, 200, 0)}, category_names={5: " "},
        )
        tinted = np.rint(0.6 * 100 + 0.4 * np.array([200.0, 200.0, 0.0])).astype(np.uint8)
        # columns 2/3 span the 0|1 border: same tag, no outline, same tint
        assert np.array_equal(overlay.pixels[:, 2:4], np.broadcast_to(tinted, (6, 2, 3)))
        # columns 5/6 span the 1|2 border: different groups, inverted outline
        assert (overlay.pixels[:, 5] == 255 - tinted).all()
        assert (overlay.pixels[:, 6] == 255 - 100).all()

    def test_same_tag_split_by_other_region_keeps_outlines(self):
        pixels = np.full((6, 9, 3), 100, dtype=np.uint8)
        labels = np.repeat(np.array([[0, 1, 2]]), 6, axis=0).repeat(3, axis=1)
        annotations = [
            plain_annotation(0, 5),
            plain_annotation(1, None),
            plain_annotation(2, 5),
        ]
        overlay = render_overlay(
            RasterImage(pixels), RegionMask(labels.astype(np.int32)), annotations,
            palette={5: (200, 200, 0)}, category_names={5: " "},
        )
        # all four border columns outlined: the untagged strip separates them
        for col in (2, 3, 5, 6):
            assert not np.array_equal(overlay.pixels[:, col], pixels[:, col])
        assert np.array_equal(overlay.pixels[:, 0], overlay.pixels[:, 8])

    def test_caption_draws_shadowed_bitmap_text(self):
        pixels = np.full((32, 32, 3), 100, dtype=np.uint8)
        overlay = render_overlay(
            RasterImage(pixels),
            RegionMask(np.zeros((32, 32), dtype=np.int32)),
            [plain_annotation(0, 3)],
            palette={3: (10, 220, 30)},
            category_names={3: "A"},
        )
        white = (overlay.pixels == 255).all(axis=2)
        black = (overlay.pixels == 0).all(axis=2)
        assert white.sum() == 18  # set bits of the 5x7 'A'
        assert black.sum() == 15  # shadow bits not covered by the glyph
        ys, xs = np.nonzero(white)
        assert abs(xs.mean() - 16) <= 1.5 and abs(ys.mean() - 16) <= 1.5

    def test_caption_clipped_at_canvas(self):
        pixels = np.full((3, 20, 3), 100, dtype=np.uint8)
        overlay = render_overlay(
            RasterImage(pixels),
            RegionMask(np.zeros((3, 20), dtype=np.int32)),
            [plain_annotation(0, 1)],
        )
        assert overlay.pixels.shape == (3, 20, 3)

    def test_default_palette_is_deterministic_and_distinct(self):
        first = default_palette([3, 1, 2])
        second = default_palette([1, 2, 3])
        assert first == second
        assert len({first[c] for c in first}) == 3

    def test_annotations_must_cover_mask(self):
        pixels = np.zeros((4, 4, 3), dtype=np.uint8)
        labels = np.zeros((4, 4), dtype=np.int32)
        labels[:, 2:] = 1
        with pytest.raises(ContractViolation):
            render_overlay(
                RasterImage(pixels), RegionMask(labels), [plain_annotation(0, None)]
            )
        with pytest.raises(ContractViolation):
            render_overlay(
                RasterImage(pixels),
                RegionMask(np.zeros((3, 3), dtype=np.int32)),
                [plain_annotation(0, None)],
            )
