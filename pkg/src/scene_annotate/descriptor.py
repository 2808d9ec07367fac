"""Joint color/texture histogram descriptor: 6 edge-direction rows x 24 fuzzy
color columns = 144 values, L1-normalized.

The patch is tiled into square blocks (trailing partial blocks dropped). Each
block is classified into one of six texture categories from the responses of
five 2x2 edge masks applied to its 2x2 grid of sub-block mean luminances, and
every pixel of the block spreads one unit of mass over the 24 fuzzy color
bins of that texture row. No quantization is applied afterwards; the raw
normalized histogram is the feature.

Color palette: white, gray, black, then 7 hue families (red, orange, yellow,
green, cyan, blue, magenta) x 3 tones (plain, light, dark). Hue membership is
triangular between adjacent family centers, so a pixel's weights always sum
to one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .color import luminance, rgb_to_hsv
from .errors import ContractViolation, DegeneratePatchError

N_TEXTURE = 6
N_COLOR = 24
N_BINS = N_TEXTURE * N_COLOR

_SQRT2 = np.sqrt(2.0)

# hue family centers in degrees; the gap 300..360 wraps back to red
_HUE_CENTERS = np.array([0.0, 30.0, 60.0, 120.0, 180.0, 240.0, 300.0])
_HUE_NAMES = ("red", "orange", "yellow", "green", "cyan", "blue", "magenta")

WHITE, GRAY, BLACK = 0, 1, 2
_V_BLACK = 0.15
_S_ACHROMATIC = 0.10
_V_WHITE = 0.90
_V_LIGHT = 0.65
_V_DARK = 0.35


class TextureCategory(IntEnum):
    NONEDGE = 0
    NONDIRECTIONAL = 1
    VERTICAL = 2
    HORIZONTAL = 3
    DIAG45 = 4
    DIAG135 = 5


# argmax over mask responses is taken in this order (first maximum wins)
_MASK_ORDER = (
    TextureCategory.VERTICAL,
    TextureCategory.HORIZONTAL,
    TextureCategory.DIAG45,
    TextureCategory.DIAG135,
    TextureCategory.NONDIRECTIONAL,
)


@dataclass(frozen=True)
class DescriptorConfig:
    block_size: int = 8
    edge_threshold: float = 0.05

    def __post_init__(self):
        if self.block_size < 2 or self.block_size % 2:
            raise ContractViolation("block_size must be even and >= 2")
        if self.edge_threshold < 0:
            raise ContractViolation("edge_threshold must be >= 0")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """144 non-negative reals, texture-major (index = 24 * texture + color)."""

    values: np.ndarray
    norm: str = "l1"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (N_BINS,):
            raise ContractViolation(f"feature must have exactly {N_BINS} values")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ContractViolation("feature values must be finite and >= 0")
        if self.norm == "l1" and abs(vals.sum() - 1.0) > 1e-9:
            raise ContractViolation("l1-tagged feature must sum to 1")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return N_BINS

    def texture_mass(self, category: TextureCategory) -> float:
        t = int(category)
        return float(self.values[N_COLOR * t : N_COLOR * (t + 1)].sum())

    def color_mass(self, color_bin: int) -> float:
        return float(self.values[color_bin::N_COLOR].sum())


def color_bin_index(family: int, tone: str = "plain") -> int:
    """Index of a chromatic bin: family 0..6, tone plain/light/dark."""
    return 3 + 3 * family + ("plain", "light", "dark").index(tone)


def color_bin_name(index: int) -> str:
    if index == WHITE:
        return "white"
    if index == GRAY:
        return "gray"
    if index == BLACK:
        return "black"
    family, tone = divmod(index - 3, 3)
    prefix = ("", "light ", "dark ")[tone]
    return prefix + _HUE_NAMES[family]


def _hue_memberships(h: np.ndarray) -> np.ndarray:
    """Triangular membership of hue angles over the 7 family centers, (..., 7)."""
    h = np.asarray(h, dtype=np.float64)
    idx = np.searchsorted(_HUE_CENTERS, h, side="right") - 1  # 0..6
    lo = _HUE_CENTERS[idx]
    hi = np.where(idx == len(_HUE_CENTERS) - 1, 360.0, _HUE_CENTERS[(idx + 1) % 7])
    t = (h - lo) / (hi - lo)
    out = np.zeros(h.shape + (7,))
    np.put_along_axis(out, idx[..., None], (1.0 - t)[..., None], axis=-1)
    nxt = (idx + 1) % 7
    # accumulate (a wrap target may coincide only when t == 0, adding zero)
    np.put_along_axis(
        out, nxt[..., None], np.take_along_axis(out, nxt[..., None], -1) + t[..., None], -1
    )
    return out


def fuzzy_color_bin(hsv: np.ndarray) -> np.ndarray:
    """Membership weights of HSV pixels over the 24-color palette, (..., 24).

    Achromatic rules take precedence: V below the black cut is black no
    matter the hue; desaturated pixels are white or gray by value. Chromatic
    pixels split between the two adjacent hue families and land in the
    plain/light/dark tone of their value.
    """
    hsv = np.asarray(hsv, dtype=np.float64)
    if hsv.shape[-1] != 3:
        raise ContractViolation("hsv must have a trailing axis of size 3")
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    if np.any((h < 0) | (h >= 360)) or np.any((s < 0) | (s > 1)) or np.any((v < 0) | (v > 1)):
        raise ContractViolation("HSV out of range: need H in [0,360), S,V in [0,1]")

    out = np.zeros(hsv.shape[:-1] + (N_COLOR,))
    is_black = v < _V_BLACK
    is_white = ~is_black & (s < _S_ACHROMATIC) & (v > _V_WHITE)
    is_gray = ~is_black & (s < _S_ACHROMATIC) & ~(v > _V_WHITE)
    chromatic = ~(is_black | is_white | is_gray)

    out[..., BLACK] = is_black
    out[..., WHITE] = is_white
    out[..., GRAY] = is_gray

    hue_w = _hue_memberships(h) * chromatic[..., None]  # (..., 7)
    tone = np.where(v > _V_LIGHT, 1, np.where(v < _V_DARK, 2, 0))  # plain/light/dark
    cols = 3 + 3 * np.arange(7) + tone[..., None]  # (..., 7) target bins
    np.put_along_axis(out, cols, np.take_along_axis(out, cols, -1) + hue_w, -1)
    return out


def _mask_responses(a, b, c, d):
    """The five 2x2 edge-mask responses, stacked along a new first axis.

    Sub-block layout: [a b; c d] (a top-left, d bottom-right).
    """
    return np.stack(
        [
            a - b + c - d,  # vertical
            a + b - c - d,  # horizontal
            _SQRT2 * (a - d),  # diagonal 45
            _SQRT2 * (b - c),  # diagonal 135
            2.0 * (a - b - c + d),  # non-directional
        ]
    )


def classify_texture(block, edge_threshold: float = 0.05) -> TextureCategory:
    """Texture category of one 2x2 grid of mean luminances in [0, 1]."""
    grid = np.asarray(block, dtype=np.float64)
    if grid.shape != (2, 2):
        raise ContractViolation("texture block must be 2x2")
    if np.any((grid < 0) | (grid > 1)):
        raise ContractViolation("luminances must lie in [0, 1]")
    resp = np.abs(_mask_responses(grid[0, 0], grid[0, 1], grid[1, 0], grid[1, 1]))
    if resp.max() < edge_threshold:
        return TextureCategory.NONEDGE
    return _MASK_ORDER[int(np.argmax(resp))]


def cedd(patch, config: DescriptorConfig | None = None) -> FeatureVector:
    """144-bin descriptor of a patch (anything with .pixels, or an RGB array).

    Blocks are block_size x block_size pixels; a trailing partial block is
    dropped. A patch smaller than one block cannot be described.
    """
    cfg = config or DescriptorConfig()
    px = np.asarray(getattr(patch, "pixels", patch))
    if px.ndim != 3 or px.shape[2] != 3:
        raise ContractViolation("patch must be (H, W, 3)")
    h, w = px.shape[:2]
    b = cfg.block_size
    nby, nbx = h // b, w // b
    if nby == 0 or nbx == 0:
        raise DegeneratePatchError(
            f"patch {w}x{h} smaller than one {b}x{b} block"
        )
    trimmed = px[: nby * b, : nbx * b]

    lum = luminance(trimmed)
    half = b // 2
    sub = lum.reshape(nby, 2, half, nbx, 2, half).mean(axis=(2, 5))  # (nby,2,nbx,2)
    a, bb = sub[:, 0, :, 0], sub[:, 0, :, 1]
    c, d = sub[:, 1, :, 0], sub[:, 1, :, 1]
    resp = np.abs(_mask_responses(a, bb, c, d))  # (5, nby, nbx)
    winner = np.argmax(resp, axis=0)
    lut = np.array([int(cat) for cat in _MASK_ORDER])
    rows = np.where(resp.max(axis=0) < cfg.edge_threshold, 0, lut[winner])

    memberships = fuzzy_color_bin(rgb_to_hsv(trimmed))  # (H', W', 24)
    per_block = memberships.reshape(nby, b, nbx, b, N_COLOR).sum(axis=(1, 3))

    hist = np.zeros((N_TEXTURE, N_COLOR))
    np.add.at(hist, rows.ravel(), per_block.reshape(-1, N_COLOR))
    return FeatureVector(hist.ravel() / hist.sum(), norm="l1")
