"""Color space conversions used by the segmenter and the descriptor.

All converters are pure numpy, vectorized over arbitrary leading axes, and
deterministic. Inputs are 8-bit sRGB unless noted.
"""

from __future__ import annotations

import numpy as np

# sRGB -> XYZ (D65) matrix
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])


def srgb_to_linear(rgb: np.ndarray) -> np.ndarray:
    """Undo the sRGB transfer curve. Input floats in [0, 1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert 8-bit sRGB (..., 3) to CIE-Lab (D65).

    L is in [0, 100]; a and b roughly in [-110, 110] for in-gamut colors.
    """
    rgb = np.asarray(rgb)
    if rgb.dtype == np.uint8:
        rgb = rgb.astype(np.float64) / 255.0
    linear = srgb_to_linear(rgb)
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    lab = np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)
    return lab


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Convert 8-bit sRGB (..., 3) to HSV with H in [0, 360) and S, V in [0, 1]."""
    rgb = np.asarray(rgb)
    if rgb.dtype == np.uint8:
        rgb = rgb.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = np.max(rgb, axis=-1)
    c = v - np.min(rgb, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
        h = np.select(
            [c == 0, v == r, v == g],
            [
                np.zeros_like(v),
                (g - b) / np.where(c > 0, c, 1.0) % 6.0,
                (b - r) / np.where(c > 0, c, 1.0) + 2.0,
            ],
            default=(r - g) / np.where(c > 0, c, 1.0) + 4.0,
        )
    h = (h * 60.0) % 360.0
    return np.stack([h, s, v], axis=-1)


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Rec.601 luma of 8-bit sRGB (..., 3), scaled to [0, 1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return (0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]) / 255.0


def lab_distance(lab_a: np.ndarray, lab_b: np.ndarray) -> np.ndarray:
    """Euclidean distance in Lab space (broadcasting)."""
    diff = np.asarray(lab_a, dtype=np.float64) - np.asarray(lab_b, dtype=np.float64)
    return np.sqrt(np.sum(diff * diff, axis=-1))
