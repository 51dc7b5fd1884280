"""Binary containers (H2OD samples, H2OC checkpoints, H2OA bundles) plus the
text exports (manifests, reports, colorized point clouds).

All integers are little-endian; float payloads are float32. Readers reject
bad magic bytes and report the byte offset of any truncation.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgument, VersionError
from .geometry import CANONICAL_FRAME, PointCloud

SAMPLE_MAGIC = b"H2OD"
CHECKPOINT_MAGIC = b"H2OC"
BUNDLE_MAGIC = b"H2OA"
FORMAT_VERSION = 1

_BLOCK_TAGS = (1, 2, 3)  # object, human, flow


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise FormatError(
                f"{self.path}: truncated at byte {self.off} "
                f"(needed {n} more, file has {len(self.data) - self.off})")
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def u8(self):
        return self.take(1)[0]

    def u16(self):
        return struct.unpack("<H", self.take(2))[0]

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def u64(self):
        return struct.unpack("<Q", self.take(8))[0]

    def f32_array(self, count) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4").copy()

    def expect_magic(self, magic: bytes):
        got = self.take(4)
        if got != magic:
            raise FormatError(
                f"{self.path}: bad magic {got!r}, expected {magic!r}")

    def expect_version(self):
        v = self.u32()
        if v != FORMAT_VERSION:
            raise VersionError(f"{self.path}: unsupported version {v}")

    def done(self):
        if self.off != len(self.data):
            raise FormatError(
                f"{self.path}: {len(self.data) - self.off} trailing bytes "
                f"at offset {self.off}")


def _f32_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


# ---------------------------------------------------------------------------
# H2OD: one interaction sample
# ---------------------------------------------------------------------------

def write_sample(path, sample) -> None:
    from .synthdata import MODE_CODES, SIDE_CODES

    parts = [SAMPLE_MAGIC, struct.pack("<I", FORMAT_VERSION)]
    blocks = [(1, sample.object.points), (2, sample.human_goal.points),
              (3, sample.flow_gt)]
    for tag, arr in blocks:
        parts.append(struct.pack("<BI", tag, len(arr)))
        parts.append(_f32_bytes(arr))
    parts.append(struct.pack("<BBQ",
                             MODE_CODES[sample.mode.mode_id],
                             SIDE_CODES[sample.mode.approach_side],
                             sample.seed))
    Path(path).write_bytes(b"".join(parts))


def read_sample(path):
    from .synthdata import (MODE_FROM_CODE, SIDE_FROM_CODE, HoiSample,
                            InteractionMode)

    r = _Reader(Path(path).read_bytes(), path)
    r.expect_magic(SAMPLE_MAGIC)
    r.expect_version()
    arrays = {}
    for expected_tag in _BLOCK_TAGS:
        tag = r.u8()
        if tag != expected_tag:
            raise FormatError(f"{path}: block tag {tag} where {expected_tag} "
                              f"expected (offset {r.off - 1})")
        count = r.u32()
        arrays[tag] = r.f32_array(count * 3).reshape(count, 3).astype(np.float64)
    mode_code = r.u8()
    side_code = r.u8()
    seed = r.u64()
    r.done()
    if mode_code not in MODE_FROM_CODE or side_code not in SIDE_FROM_CODE:
        raise FormatError(f"{path}: unknown mode/side codes "
                          f"({mode_code}, {side_code})")
    if len(arrays[3]) != len(arrays[2]):
        raise FormatError(f"{path}: flow count {len(arrays[3])} != human "
                          f"count {len(arrays[2])}")
    return HoiSample(
        object=PointCloud(arrays[1], CANONICAL_FRAME),
        human_goal=PointCloud(arrays[2], CANONICAL_FRAME),
        flow_gt=arrays[3],
        mode=InteractionMode(MODE_FROM_CODE[mode_code], SIDE_FROM_CODE[side_code]),
        seed=seed,
    )


def read_manifest(path):
    """Manifest rows as (filename, mode_code, seed)."""
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        name, mode_code, seed = line.split()
        rows.append((name, int(mode_code), int(seed)))
    return rows


def load_dataset(directory):
    """All samples listed by a dataset directory's manifest, in order."""
    directory = Path(directory)
    manifest = directory / "manifest.txt"
    if not manifest.exists():
        raise InvalidArgument(f"no manifest.txt in {directory}")
    return [read_sample(directory / name) for name, _, _ in read_manifest(manifest)]


# ---------------------------------------------------------------------------
# H2OC: checkpoint (named float32 tensors + optimizer state + RNG state)
# ---------------------------------------------------------------------------

def _write_tensor_section(parts, tensors: dict):
    parts.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype=np.float32)
        name_b = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_b)))
        parts.append(name_b)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b"")
        parts.append(_f32_bytes(arr))


def _read_tensor_section(r: _Reader) -> dict:
    count = r.u32()
    out = {}
    for _ in range(count):
        name_len = r.u16()
        name = r.take(name_len).decode("utf-8")
        rank = r.u8()
        dims = tuple(r.u32() for _ in range(rank))
        n = 1
        for d in dims:
            n *= d
        out[name] = r.f32_array(n).reshape(dims)
    return out


def write_checkpoint(path, tensors: dict, optimizer: dict, seed: int,
                     counter: int) -> None:
    """Model tensors and optimizer state are name->array dicts; insertion
    order is preserved on disk so rewrites are byte-identical."""
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", FORMAT_VERSION)]
    _write_tensor_section(parts, tensors)
    _write_tensor_section(parts, optimizer)
    parts.append(struct.pack("<QQ", seed, counter))
    Path(path).write_bytes(b"".join(parts))


def read_checkpoint(path):
    r = _Reader(Path(path).read_bytes(), path)
    r.expect_magic(CHECKPOINT_MAGIC)
    r.expect_version()
    tensors = _read_tensor_section(r)
    optimizer = _read_tensor_section(r)
    seed = r.u64()
    counter = r.u64()
    r.done()
    return tensors, optimizer, seed, counter


# ---------------------------------------------------------------------------
# H2OA: affordance bundle
# ---------------------------------------------------------------------------

def write_bundle(path, contact: np.ndarray, orientational: np.ndarray,
                 grid_dims, marginal_grid: np.ndarray,
                 per_point_grids: np.ndarray) -> None:
    n_h, n_o = contact.shape
    if orientational.shape != (n_h, n_o):
        raise InvalidArgument("contact/orientational shape mismatch")
    parts = [BUNDLE_MAGIC, struct.pack("<I", FORMAT_VERSION),
             struct.pack("<II", n_h, n_o),
             _f32_bytes(contact), _f32_bytes(orientational),
             struct.pack("<III", *grid_dims),
             _f32_bytes(marginal_grid), _f32_bytes(per_point_grids)]
    Path(path).write_bytes(b"".join(parts))


def read_bundle(path):
    r = _Reader(Path(path).read_bytes(), path)
    r.expect_magic(BUNDLE_MAGIC)
    r.expect_version()
    n_h = r.u32()
    n_o = r.u32()
    contact = r.f32_array(n_h * n_o).reshape(n_h, n_o).astype(np.float64)
    orient = r.f32_array(n_h * n_o).reshape(n_h, n_o).astype(np.float64)
    dims = (r.u32(), r.u32(), r.u32())
    n_cells = dims[0] * dims[1] * dims[2]
    marginal = r.f32_array(n_cells).reshape(dims).astype(np.float64)
    per_point = r.f32_array(n_h * n_cells).reshape((n_h,) + dims).astype(np.float64)
    r.done()
    return contact, orient, dims, marginal, per_point


# ---------------------------------------------------------------------------
# Text exports
# ---------------------------------------------------------------------------

def write_report(path, pairs) -> None:
    """UTF-8 `key = value` lines, one metric per line."""
    lines = [f"{k} = {v}" for k, v in pairs]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_colorized_cloud(path, points: np.ndarray, colors: np.ndarray) -> None:
    """`x y z r g b` per line for external point cloud viewers."""
    points = np.asarray(points, dtype=np.float64)
    colors = np.clip(np.asarray(colors, dtype=np.float64), 0.0, 1.0)
    if colors.shape != points.shape:
        raise InvalidArgument("colors must be (N, 3) like points")
    lines = [
        f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {c[0]:.4f} {c[1]:.4f} {c[2]:.4f}"
        for p, c in zip(points, colors)
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
