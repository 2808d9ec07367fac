"""Unsupervised JSEG-style segmentation.

Three stages: quantize colors into a class map, compute a per-pixel spatial
heterogeneity statistic J over a sliding window, then grow regions from
low-J seeds and merge undersized regions into their most color-similar
neighbor.

J for a window is (S_T - S_W) / S_W, where S_T is the total variance of the
member-pixel positions and S_W the sum of within-class position variances.
A single-class window has S_W = S_T, giving J = 0 (zero complexity); J grows
as classes separate spatially, peaking on class boundaries.

Distances between color classes are Euclidean in CIE-Lab, expressed as a
fraction of the black-white Lab span (100), so the merge threshold tm is a
dimensionless knob: classes closer than tm * 100 Lab units merge.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .color import rgb_to_lab
from .errors import ContractViolation
from .raster import RasterImage, RegionMask

# Lab distance between black and white; the reference scale for tm.
DIST_NORM = 100.0

_LLOYD_ITERATIONS = 10
_GRID_LEVELS = 16
_LAB_LO = np.array([0.0, -110.0, -110.0])
_LAB_HI = np.array([100.0, 110.0, 110.0])


@dataclass(frozen=True, eq=False)
class ColorClassMap:
    """Per-pixel color-class indices plus the Lab representative per class."""

    classes: np.ndarray  # (H, W) int32, contiguous 0..C-1
    palette: np.ndarray  # (C, 3) float64 Lab

    def __post_init__(self):
        classes = np.asarray(self.classes, dtype=np.int32)
        palette = np.asarray(self.palette, dtype=np.float64)
        present = np.unique(classes)
        if not np.array_equal(present, np.arange(len(palette))):
            raise ContractViolation("class indices must be contiguous 0..C-1")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "palette", palette)

    @property
    def n_classes(self) -> int:
        return len(self.palette)


@dataclass(frozen=True)
class SegmenterConfig:
    tm: float = 0.55
    window_sizes: tuple[int, ...] = (9,)
    j_threshold: float | None = None  # None: mean(J) + 0.2 * std(J)
    min_region_px: int = 16

    def __post_init__(self):
        if self.tm <= 0:
            raise ContractViolation("tm must be positive")
        if not self.window_sizes or any(w < 3 or w % 2 == 0 for w in self.window_sizes):
            raise ContractViolation("window sides must be odd and >= 3")
        object.__setattr__(self, "window_sizes", tuple(self.window_sizes))


def quantize_colors(image: RasterImage, tm: float = 0.55) -> ColorClassMap:
    """Quantize an image into color classes by grid init, Lloyd refinement,
    and agglomerative merging until the closest pair of classes is more than
    tm apart (normalized Lab distance)."""
    lab = rgb_to_lab(image.pixels).reshape(-1, 3)
    n_px = lab.shape[0]

    # initial clusters: occupied cells of a uniform 16-level grid per Lab axis
    scaled = (lab - _LAB_LO) / (_LAB_HI - _LAB_LO) * (_GRID_LEVELS - 1)
    cells = np.clip(np.rint(scaled), 0, _GRID_LEVELS - 1).astype(np.int64)
    cell_ids = (cells[:, 0] * _GRID_LEVELS + cells[:, 1]) * _GRID_LEVELS + cells[:, 2]
    _, assign = np.unique(cell_ids, return_inverse=True)
    centers = _class_means(lab, assign)

    for _ in range(_LLOYD_ITERATIONS):
        dists = _sq_distances(lab, centers)
        new_assign = np.argmin(dists, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = _compress_labels(new_assign)
        centers = _class_means(lab, assign)

    # agglomerative merge on normalized Lab distance
    n0 = len(centers)
    counts = np.bincount(assign, minlength=n0).astype(np.float64)
    alive = np.ones(n0, dtype=bool)
    parent = np.arange(n0)
    diff = centers[:, None, :] - centers[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2)) / DIST_NORM
    np.fill_diagonal(dist, np.inf)
    while alive.sum() > 1:
        masked = np.where(alive[:, None] & alive[None, :], dist, np.inf)
        flat = int(np.argmin(masked))
        i, j = divmod(flat, n0)
        if not np.isfinite(masked[i, j]) or masked[i, j] > tm:
            break
        if i > j:
            i, j = j, i
        centers[i] = (centers[i] * counts[i] + centers[j] * counts[j]) / (
            counts[i] + counts[j]
        )
        counts[i] += counts[j]
        alive[j] = False
        parent[parent == j] = i
        row = np.sqrt(((centers - centers[i]) ** 2).sum(axis=1)) / DIST_NORM
        row[i] = np.inf
        dist[i, :] = row
        dist[:, i] = row

    merged = parent[assign]

    # relabel by scan order of first member pixel, for stable output
    order = _compress_labels(merged)
    palette = _class_means(lab, order)
    h, w = image.height, image.width
    return ColorClassMap(order.reshape(h, w).astype(np.int32), palette)


def _sq_distances(points: np.ndarray, centers) -> np.ndarray:
    centers = np.asarray(centers)
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _class_means(points: np.ndarray, assign: np.ndarray) -> np.ndarray:
    n = int(assign.max()) + 1
    sums = np.zeros((n, 3))
    np.add.at(sums, assign, points)
    counts = np.bincount(assign, minlength=n).astype(np.float64)
    return sums / counts[:, None]


def _compress_labels(assign: np.ndarray) -> np.ndarray:
    """Relabel to 0..K-1 in order of first appearance."""
    _, first_pos, inverse = np.unique(assign, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first_pos))
    return rank[inverse]


def compute_j(class_map: ColorClassMap, center: tuple[int, int], side: int) -> float:
    """J statistic of the window of the given odd side centered at (x, y).

    The window is clipped to the map; it must cover at least 2 pixels.
    """
    if side < 1:
        raise ContractViolation("window side must be >= 1")
    cx, cy = center
    h, w = class_map.classes.shape
    r = side // 2
    x0, x1 = max(cx - r, 0), min(cx + r, w - 1)
    y0, y1 = max(cy - r, 0), min(cy + r, h - 1)
    if x0 > x1 or y0 > y1:
        raise ContractViolation("window does not intersect the class map")
    window = class_map.classes[y0 : y1 + 1, x0 : x1 + 1]
    if window.size < 2:
        raise ContractViolation("window must contain at least 2 pixels")
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    pos = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
    cls = window.ravel()
    s_t = float(((pos - pos.mean(axis=0)) ** 2).sum())
    s_w = 0.0
    for c in np.unique(cls):
        member = pos[cls == c]
        s_w += float(((member - member.mean(axis=0)) ** 2).sum())
    if s_w <= 0.0:
        return 0.0 if s_t <= 0.0 else float("inf")
    return (s_t - s_w) / s_w


def compute_j_map(class_map: ColorClassMap, side: int) -> np.ndarray:
    """Per-pixel J values for windows of the given side, clipped at borders.

    Uses per-class summed-area tables, so it matches compute_j exactly while
    staying O(C * H * W).
    """
    classes = class_map.classes
    h, w = classes.shape
    r = side // 2
    ys, xs = np.mgrid[0:h, 0:w]
    y0, y1 = np.maximum(ys - r, 0), np.minimum(ys + r, h - 1)
    x0, x1 = np.maximum(xs - r, 0), np.minimum(xs + r, w - 1)

    x_grid = xs.astype(np.float64)
    y_grid = ys.astype(np.float64)

    def window_sums(field):
        sat = np.zeros((h + 1, w + 1))
        sat[1:, 1:] = np.cumsum(np.cumsum(field, axis=0), axis=1)
        return sat[y1 + 1, x1 + 1] - sat[y0, x1 + 1] - sat[y1 + 1, x0] + sat[y0, x0]

    def scatter(indicator):
        n = window_sums(indicator)
        sx = window_sums(indicator * x_grid)
        sy = window_sums(indicator * y_grid)
        sxx = window_sums(indicator * x_grid * x_grid)
        syy = window_sums(indicator * y_grid * y_grid)
        with np.errstate(invalid="ignore", divide="ignore"):
            ssd = sxx - sx * sx / n + syy - sy * sy / n
        return np.where(n > 0, ssd, 0.0)

    s_t = scatter(np.ones((h, w)))
    s_w = np.zeros((h, w))
    for c in range(class_map.n_classes):
        s_w += scatter((classes == c).astype(np.float64))

    s_w = np.maximum(s_w, 0.0)  # clamp tiny negative rounding residue
    s_t = np.maximum(s_t, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        j = (s_t - s_w) / s_w
    j = np.where(s_w > 0, j, np.where(s_t > 0, np.inf, 0.0))
    return np.maximum(j, 0.0)


def segment(image: RasterImage, cfg: SegmenterConfig | None = None) -> RegionMask:
    """Segment an image: quantize, J map, seed + grow, merge small regions."""
    cfg = cfg or SegmenterConfig()
    h, w = image.height, image.width
    if h * w == 1:
        return RegionMask(np.zeros((1, 1), dtype=np.int32))

    class_map = quantize_colors(image, cfg.tm)
    side = max(cfg.window_sizes)
    j_map = compute_j_map(class_map, side)

    finite = j_map[np.isfinite(j_map)]
    if cfg.j_threshold is not None:
        j_thr = cfg.j_threshold
    else:
        j_thr = float(finite.mean() + 0.2 * finite.std()) if finite.size else 0.0

    seeds = j_map < j_thr
    labels = _connected_components(seeds)
    if labels.max() == 0 and not seeds.any():
        # no low-J pixels anywhere (e.g. uniform image): seed at the first
        # pixel attaining the minimum J, scan order
        flat = np.where(np.isfinite(j_map), j_map, np.inf).ravel()
        idx = int(np.argmin(flat))
        labels = np.zeros((h, w), dtype=np.int32)
        labels[idx // w, idx % w] = 1

    labels = _grow_by_ascending_j(labels, j_map)
    labels = _merge_small_regions(labels - 1, image, cfg.min_region_px)
    return RegionMask(labels)


def _connected_components(mask: np.ndarray) -> np.ndarray:
    """4-connected component labels: 0 = not in mask, 1..K = components."""
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    next_label = 1
    for sy in range(h):
        for sx in range(w):
            if mask[sy, sx] and labels[sy, sx] == 0:
                stack = [(sy, sx)]
                labels[sy, sx] = next_label
                while stack:
                    y, x = stack.pop()
                    for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and labels[ny, nx] == 0:
                            labels[ny, nx] = next_label
                            stack.append((ny, nx))
                next_label += 1
    return labels


def _grow_by_ascending_j(labels: np.ndarray, j_map: np.ndarray) -> np.ndarray:
    """Attach unlabeled pixels to adjacent regions in order of ascending J.

    Ties break on scan order; a popped pixel takes the smallest label among
    its 4-adjacent labeled neighbors, which keeps the result independent of
    heap internals.
    """
    h, w = labels.shape
    labels = labels.copy()
    heap = []
    ys, xs = np.nonzero(labels == 0)
    frontier_added = np.zeros((h, w), dtype=bool)

    def push_if_frontier(y, x):
        if labels[y, x] != 0 or frontier_added[y, x]:
            return
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] != 0:
                heapq.heappush(heap, (float(j_map[y, x]), y, x))
                frontier_added[y, x] = True
                return

    for y, x in zip(ys.tolist(), xs.tolist()):
        push_if_frontier(y, x)

    while heap:
        _, y, x = heapq.heappop(heap)
        if labels[y, x] != 0:
            continue
        neighbor_labels = [
            labels[ny, nx]
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1))
            if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] != 0
        ]
        labels[y, x] = min(neighbor_labels)
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w:
                push_if_frontier(ny, nx)
    return labels


def _merge_small_regions(labels: np.ndarray, image: RasterImage, min_px: int) -> np.ndarray:
    """Repeatedly merge the smallest region under min_px into its most
    color-similar 4-adjacent neighbor (mean Lab distance, tie: lower label)."""
    labels = labels.copy()
    lab = rgb_to_lab(image.pixels)

    while True:
        ids = np.unique(labels)
        if len(ids) <= 1:
            break
        areas = {int(i): int((labels == i).sum()) for i in ids}
        small = [(a, i) for i, a in areas.items() if a < min_px]
        if not small:
            break
        _, victim = min(small)
        neighbors = _adjacent_labels(labels, victim)
        if not neighbors:
            break
        means = {}
        for cand in neighbors | {victim}:
            means[cand] = lab[labels == cand].mean(axis=0)
        best = min(
            neighbors,
            key=lambda c: (float(np.linalg.norm(means[c] - means[victim])), c),
        )
        labels[labels == victim] = best

    return _compress_labels(labels.ravel()).reshape(labels.shape).astype(np.int32)


def _adjacent_labels(labels: np.ndarray, target: int) -> set[int]:
    member = labels == target
    out = set()
    for shift_axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        rolled = np.roll(member, shift, axis=shift_axis)
        if shift == 1:
            if shift_axis == 0:
                rolled[0, :] = False
            else:
                rolled[:, 0] = False
        else:
            if shift_axis == 0:
                rolled[-1, :] = False
            else:
                rolled[:, -1] = False
        out.update(np.unique(labels[rolled & ~member]).tolist())
    out.discard(target)
    return {int(v) for v in out}
