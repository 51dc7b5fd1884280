"""Deterministic point-set kernels: sampling, canonicalization, voxelization,
and spherical binning.

All operations are pure functions on immutable inputs and are safe to call
concurrently. Point clouds are float64 internally; file formats quantize to
float32 at the I/O boundary.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidArgument, InvalidData

CANONICAL_FRAME = "canonical-object-frame"
RAW_FRAME = "raw"

_GOLDEN = np.pi * (1.0 + np.sqrt(5.0))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PointCloud:
    """Ordered list of 3D points (meters) with optional per-point labels.

    Labels are free-form integers (body segment ids, original indices, ...)
    aligned index-for-index with the points.
    """

    points: np.ndarray
    frame_tag: str = RAW_FRAME
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidArgument(f"points must be (N, 3), got {pts.shape}")
        if pts.shape[0] < 1:
            raise InvalidArgument("point cloud must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise InvalidData("point cloud contains non-finite coordinates")
        if self.frame_tag not in (CANONICAL_FRAME, RAW_FRAME):
            raise InvalidArgument(f"unknown frame_tag {self.frame_tag!r}")
        object.__setattr__(self, "points", _readonly(pts))
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (pts.shape[0],):
                raise InvalidArgument("labels must align one-per-point")
            object.__setattr__(self, "labels", _readonly(lab))

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def with_points(self, points: np.ndarray, frame_tag: Optional[str] = None,
                    labels: Optional[np.ndarray] = "inherit") -> "PointCloud":
        if isinstance(labels, str) and labels == "inherit":
            labels = self.labels
        return PointCloud(points, frame_tag or self.frame_tag, labels)


@dataclass(frozen=True)
class VoxelGridSpec:
    """Axis-aligned voxel grid: origin corner, cubic cell size, dims (H, W, L)."""

    origin: np.ndarray
    cell_size: float
    dims: tuple

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        dims = tuple(int(d) for d in self.dims)
        if self.cell_size <= 0:
            raise InvalidArgument("cell_size must be positive")
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise InvalidArgument(f"dims must be three positive integers, got {dims}")
        object.__setattr__(self, "origin", _readonly(origin))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "cell_size", float(self.cell_size))

    @property
    def n_cells(self) -> int:
        h, w, l = self.dims
        return h * w * l


@dataclass(frozen=True)
class SphereBins:
    """Unit-sphere discretization: n_b representative directions."""

    directions: np.ndarray

    def __post_init__(self):
        dirs = np.asarray(self.directions, dtype=np.float64)
        if dirs.ndim != 2 or dirs.shape[1] != 3 or dirs.shape[0] < 2:
            raise InvalidArgument("directions must be (n_b >= 2, 3)")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise InvalidArgument("bin directions must be unit vectors")
        object.__setattr__(self, "directions", _readonly(dirs))

    @property
    def n_b(self) -> int:
        return self.directions.shape[0]


class VoxelizeResult(NamedTuple):
    grid: np.ndarray       # int64 counts, shape dims
    dropped: int           # points outside the grid extent


def fps_sample(pc: PointCloud, k: int, start_index: int = 0) -> np.ndarray:
    """Furthest-point-sampling indices, greedy from ``start_index``.

    Each subsequent index maximizes the minimum distance to all previously
    selected points; exact ties resolve to the lowest index, so the result
    is deterministic for a fixed input.
    """
    n = pc.count
    if not 1 <= k <= n:
        raise InvalidArgument(f"k={k} out of range [1, {n}]")
    if not 0 <= start_index < n:
        raise InvalidArgument(f"start_index={start_index} out of range [0, {n})")
    pts = pc.points
    selected = np.empty(k, dtype=np.int64)
    selected[0] = start_index
    min_sq = np.sum((pts - pts[start_index]) ** 2, axis=1)
    for i in range(1, k):
        idx = int(np.argmax(min_sq))  # argmax returns the lowest index on ties
        selected[i] = idx
        np.minimum(min_sq, np.sum((pts - pts[idx]) ** 2, axis=1), out=min_sq)
    return selected


def center_on_centroid(obj: PointCloud, human: PointCloud):
    """Translate both clouds by minus the object centroid.

    Returns (object_centered, human_centered, centroid). Both outputs are
    tagged with the canonical object frame.
    """
    centroid = obj.points.mean(axis=0)
    obj_c = obj.with_points(obj.points - centroid, CANONICAL_FRAME)
    hum_c = human.with_points(human.points - centroid, CANONICAL_FRAME)
    return obj_c, hum_c, centroid


def voxelize(pc: PointCloud, spec: VoxelGridSpec) -> VoxelizeResult:
    """Count points per voxel; cells are half-open [lo, hi).

    A point maps to cell floor((p - origin) / cell_size); points whose index
    falls outside dims on any axis are dropped and tallied, so
    in-extent counts + dropped == pc.count always.
    """
    rel = (pc.points - spec.origin) / spec.cell_size
    idx = np.floor(rel).astype(np.int64)
    dims = np.asarray(spec.dims, dtype=np.int64)
    inside = np.all((idx >= 0) & (idx < dims), axis=1)
    grid = np.zeros(spec.dims, dtype=np.int64)
    kept = idx[inside]
    if kept.size:
        np.add.at(grid, (kept[:, 0], kept[:, 1], kept[:, 2]), 1)
    return VoxelizeResult(grid, int(pc.count - inside.sum()))


def voxel_index(points: np.ndarray, spec: VoxelGridSpec):
    """Per-point cell indices plus an in-extent mask (same rule as voxelize)."""
    idx = np.floor((points - spec.origin) / spec.cell_size).astype(np.int64)
    dims = np.asarray(spec.dims, dtype=np.int64)
    inside = np.all((idx >= 0) & (idx < dims), axis=1)
    return idx, inside


def make_sphere_bins(n_b: int) -> SphereBins:
    """Fibonacci spherical lattice with n_b near-uniform directions."""
    if n_b < 2:
        raise InvalidArgument(f"n_b must be >= 2, got {n_b}")
    i = np.arange(n_b, dtype=np.float64) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / n_b)
    theta = _GOLDEN * i
    dirs = np.stack(
        [np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)],
        axis=1,
    )
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return SphereBins(dirs)


def bin_probabilities(x: np.ndarray, bins: SphereBins, sigma2: float) -> np.ndarray:
    """Gaussian-kernel probabilities of a unit vector over the sphere bins.

    p(n) is proportional to exp(-||x - n_n||^2 / (2 sigma^2)), normalized to
    sum to one. The largest exponent is subtracted before exponentiation so
    small variances stay finite.
    """
    x = np.asarray(x, dtype=np.float64).reshape(3)
    if sigma2 <= 0:
        raise InvalidArgument("sigma2 must be positive")
    nrm = np.linalg.norm(x)
    if abs(nrm - 1.0) > 1e-6:
        raise InvalidArgument(f"x must be unit length (got norm {nrm:.3e})")
    sq = np.sum((bins.directions - x) ** 2, axis=1)
    logits = -(sq - sq.min()) / (2.0 * sigma2)
    p = np.exp(logits)
    return p / p.sum()


def kernel_matrix(x: np.ndarray, bins: SphereBins, sigma2: float) -> np.ndarray:
    """Unnormalized Gaussian kernel rows for a batch of unit vectors (..., 3).

    Uses ||x - n||^2 = 2 - 2 x.n for unit inputs; rows are safe to accumulate
    across samples and normalize once.
    """
    dots = x @ bins.directions.T
    return np.exp((dots - 1.0) / sigma2)


def rotation_about_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def quantize32(a: np.ndarray) -> np.ndarray:
    """Round to the nearest float32-representable values, kept as float64.

    Clouds that pass through this are stored in files bit-exactly, and
    differences of two quantized clouds are exact in float64.
    """
    return np.asarray(a, dtype=np.float32).astype(np.float64)
