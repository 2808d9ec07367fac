"""Color conversion checks against stdlib colorsys and published reference
values for the sRGB primaries."""

from __future__ import annotations

import colorsys

import numpy as np
import pytest

from scene_annotate.color import lab_distance, luminance, rgb_to_hsv, rgb_to_lab

# Reference Lab (D65, 2 degree observer) for 8-bit sRGB corners, from the
# usual CIE conversion chain.
LAB_REFERENCE = {
    (255, 255, 255): (100.0, 0.0, 0.0),
    (0, 0, 0): (0.0, 0.0, 0.0),
    (255, 0, 0): (53.2408, 80.0925, 67.2032),
    (0, 255, 0): (87.7347, -86.1827, 83.1793),
    (0, 0, 255): (32.2970, 79.1875, -107.8602),
    (128, 128, 128): (53.5850, 0.0, 0.0),
}


@pytest.mark.parametrize("rgb,expected", sorted(LAB_REFERENCE.items()))
def test_lab_reference_values(rgb, expected):
    got = rgb_to_lab(np.array(rgb, dtype=np.uint8))
    assert np.allclose(got, expected, atol=2e-3)


def test_lab_vectorized_matches_scalar():
    rng = np.random.default_rng(7)
    img = rng.integers(0, 256, size=(5, 4, 3), dtype=np.uint8)
    full = rgb_to_lab(img)
    assert full.shape == (5, 4, 3)
    for y in range(5):
        for x in range(4):
            single = rgb_to_lab(img[y, x])
            assert np.allclose(full[y, x], single, atol=1e-12)


def test_hsv_matches_colorsys():
    rng = np.random.default_rng(11)
    colors = rng.integers(0, 256, size=(200, 3), dtype=np.uint8)
    got = rgb_to_hsv(colors)
    for (r, g, b), (h, s, v) in zip(colors.tolist(), got.tolist()):
        eh, es, ev = colorsys.rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0)
        dh = abs(h - eh * 360.0)
        dh = min(dh, 360.0 - dh)  # circular
        assert dh < 1e-9
        assert abs(s - es) < 1e-12
        assert abs(v - ev) < 1e-12


def test_hsv_grays_have_zero_saturation():
    grays = np.array([[0, 0, 0], [77, 77, 77], [255, 255, 255]], dtype=np.uint8)
    hsv = rgb_to_hsv(grays)
    assert np.all(hsv[:, 1] == 0.0)
    assert np.all(hsv[:, 0] == 0.0)


def test_hsv_hue_range():
    rng = np.random.default_rng(3)
    colors = rng.integers(0, 256, size=(500, 3), dtype=np.uint8)
    hsv = rgb_to_hsv(colors)
    assert np.all(hsv[:, 0] >= 0.0) and np.all(hsv[:, 0] < 360.0)
    assert np.all(hsv[:, 1:] >= 0.0) and np.all(hsv[:, 1:] <= 1.0)


def test_luminance_weights():
    assert luminance(np.array([255, 255, 255], dtype=np.uint8)) == pytest.approx(1.0)
    assert luminance(np.array([0, 0, 0], dtype=np.uint8)) == pytest.approx(0.0)
    assert luminance(np.array([255, 0, 0], dtype=np.uint8)) == pytest.approx(0.299)
    assert luminance(np.array([0, 255, 0], dtype=np.uint8)) == pytest.approx(0.587)
    assert luminance(np.array([0, 0, 255], dtype=np.uint8)) == pytest.approx(0.114)


def test_lab_distance_black_white_sets_the_scale():
    black = rgb_to_lab(np.array([0, 0, 0], dtype=np.uint8))
    white = rgb_to_lab(np.array([255, 255, 255], dtype=np.uint8))
    assert lab_distance(black, white) == pytest.approx(100.0, abs=1e-4)


def test_lab_distance_symmetry_and_identity():
    rng = np.random.default_rng(5)
    a = rgb_to_lab(rng.integers(0, 256, size=(30, 3), dtype=np.uint8))
    b = rgb_to_lab(rng.integers(0, 256, size=(30, 3), dtype=np.uint8))
    assert np.allclose(lab_distance(a, b), lab_distance(b, a))
    assert np.allclose(lab_distance(a, a), 0.0)
