"""Procedural human-object interaction samples.

A capsule-segment humanoid is posed against analytic object primitives
(box, cylinder, table-composite, pole) so each sample satisfies an
auditable contact condition for its interaction mode. The per-point flow
field is the displacement of the posed surface points from the zero-pose
canonical cloud, index for index.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import GenerationFailure, InvalidArgument, InvalidConfig
from .geometry import (
    CANONICAL_FRAME,
    PointCloud,
    fps_sample,
    quantize32,
    rotation_about_z,
)
from .seeding import derive_rng, derive_seed

MODE_IDS = ("grasp-left", "grasp-right", "two-hand-lift", "sit", "push")
APPROACH_SIDES = ("front", "back", "left", "right")
OBJECT_KINDS = ("box", "cylinder", "table-composite", "pole")

MODE_CODES = {m: i + 1 for i, m in enumerate(MODE_IDS)}
MODE_FROM_CODE = {v: k for k, v in MODE_CODES.items()}
SIDE_CODES = {s: i + 1 for i, s in enumerate(APPROACH_SIDES)}
SIDE_FROM_CODE = {v: k for k, v in SIDE_CODES.items()}

CONTACT_THRESHOLD = 0.015   # meters; on the order of finger thickness
PENETRATION_LIMIT = 0.002   # max allowed penetration into the object
MAX_POSE_ITERS = 200

# (torso pitch, knee bend) rungs tried in order until the arm can reach
_STANCE_LADDER = ((0.0, 0.0), (0.45, 0.0), (0.85, 0.25), (1.15, 0.45),
                  (1.4, 0.65), (1.4, 0.95))


@dataclass(frozen=True)
class InteractionMode:
    mode_id: str
    approach_side: str = "front"

    def __post_init__(self):
        if self.mode_id not in MODE_IDS:
            raise InvalidArgument(f"unknown mode_id {self.mode_id!r}")
        if self.approach_side not in APPROACH_SIDES:
            raise InvalidArgument(f"unknown approach_side {self.approach_side!r}")


# ---------------------------------------------------------------------------
# Articulated capsule body
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArticulatedBody:
    """Joint tree plus capsule segments sampled into a fixed point set.

    joint_tree rows are (parent index, offset 3-vector in the parent frame,
    nominal bend axis). Joint 0 is the root (parent -1). Every non-root
    joint j owns the capsule segment spanning its parent's position to its
    own; surface points bind rigidly to the parent joint's frame.
    canonical_indices picks the fixed n_points subset used for every cloud.
    """

    parents: np.ndarray            # (J,) int, parents[0] == -1
    offsets: np.ndarray            # (J, 3) in parent frame
    axes: np.ndarray               # (J, 3) nominal bend axes
    segment_radii: np.ndarray      # (J,) radius of the segment owned by joint j
    joint_names: tuple
    length_groups: tuple           # per-joint group for shape multipliers
    surface_samples_per_segment: int
    canonical_indices: np.ndarray  # (n_points,) into the raw sample set

    def __post_init__(self):
        parents = np.asarray(self.parents, dtype=np.int64)
        if parents[0] != -1:
            raise InvalidConfig("joint 0 must be the root (parent -1)")
        if np.any(parents[1:] >= np.arange(1, len(parents))):
            raise InvalidConfig("joint tree must be topologically ordered (acyclic)")
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=np.float64))
        object.__setattr__(self, "axes", np.asarray(self.axes, dtype=np.float64))
        object.__setattr__(self, "segment_radii",
                           np.asarray(self.segment_radii, dtype=np.float64))
        object.__setattr__(self, "canonical_indices",
                           np.asarray(self.canonical_indices, dtype=np.int64))

    @property
    def n_joints(self) -> int:
        return len(self.parents)

    @property
    def n_points(self) -> int:
        return len(self.canonical_indices)

    @property
    def n_raw_points(self) -> int:
        return self.surface_samples_per_segment * (self.n_joints - 1)

    def joint_index(self, name: str) -> int:
        return self.joint_names.index(name)

    def segment_ids(self, names) -> list:
        return [self.joint_index(n) for n in names]


_DEFAULT_JOINTS = [
    # name         parent  offset                 axis        group    radius
    ("pelvis",     -1, (0.00,  0.00,  0.96), (0, 0, 1), "root",  0.00),
    ("spine",       0, (0.00,  0.00,  0.22), (1, 0, 0), "torso", 0.105),
    ("chest",       1, (0.00,  0.00,  0.22), (1, 0, 0), "torso", 0.110),
    ("neck",        2, (0.00,  0.00,  0.12), (1, 0, 0), "torso", 0.050),
    ("head",        3, (0.00,  0.00,  0.16), (1, 0, 0), "torso", 0.095),
    ("l_shoulder",  2, (0.00,  0.21,  0.06), (1, 0, 0), "torso", 0.050),
    ("l_elbow",     5, (0.00,  0.29,  0.00), (0, 0, 1), "arm",   0.045),
    ("l_wrist",     6, (0.00,  0.27,  0.00), (0, 0, 1), "arm",   0.038),
    ("l_hand",      7, (0.00,  0.16,  0.00), (0, 0, 1), "arm",   0.040),
    ("r_shoulder",  2, (0.00, -0.21,  0.06), (1, 0, 0), "torso", 0.050),
    ("r_elbow",     9, (0.00, -0.29,  0.00), (0, 0, 1), "arm",   0.045),
    ("r_wrist",    10, (0.00, -0.27,  0.00), (0, 0, 1), "arm",   0.038),
    ("r_hand",     11, (0.00, -0.16,  0.00), (0, 0, 1), "arm",   0.040),
    ("l_hip",       0, (0.00,  0.10, -0.06), (0, 1, 0), "root",  0.090),
    ("l_knee",     13, (0.00,  0.00, -0.44), (0, 1, 0), "leg",   0.072),
    ("l_ankle",    14, (0.00,  0.00, -0.42), (0, 1, 0), "leg",   0.052),
    ("l_foot",     15, (0.14,  0.00, -0.04), (0, 1, 0), "leg",   0.042),
    ("r_hip",       0, (0.00, -0.10, -0.06), (0, 1, 0), "root",  0.090),
    ("r_knee",     17, (0.00,  0.00, -0.44), (0, 1, 0), "leg",   0.072),
    ("r_ankle",    18, (0.00,  0.00, -0.42), (0, 1, 0), "leg",   0.052),
    ("r_foot",     19, (0.14,  0.00, -0.04), (0, 1, 0), "leg",   0.042),
]

LEFT_ARM_SEGMENTS = ("l_elbow", "l_wrist", "l_hand")
RIGHT_ARM_SEGMENTS = ("r_elbow", "r_wrist", "r_hand")
PELVIS_SEGMENTS = ("l_hip", "r_hip")


def default_body(n_points: int = 512, samples_per_segment: int = 44) -> ArticulatedBody:
    """The stock humanoid (~1.78 m tall, 21 joints, 20 capsule segments)."""
    names = tuple(j[0] for j in _DEFAULT_JOINTS)
    parents = np.array([j[1] for j in _DEFAULT_JOINTS])
    offsets = np.array([j[2] for j in _DEFAULT_JOINTS], dtype=np.float64)
    axes = np.array([j[3] for j in _DEFAULT_JOINTS], dtype=np.float64)
    groups = tuple(j[4] for j in _DEFAULT_JOINTS)
    radii = np.array([j[5] for j in _DEFAULT_JOINTS], dtype=np.float64)
    n_raw = samples_per_segment * (len(names) - 1)
    if n_points > n_raw:
        raise InvalidConfig(f"n_points={n_points} exceeds raw samples ({n_raw})")
    body = ArticulatedBody(parents, offsets, axes, radii, names, groups,
                           samples_per_segment, np.arange(n_points))
    raw, _ = body_surface_points(body)
    idx = fps_sample(PointCloud(raw), n_points, start_index=0)
    return replace(body, canonical_indices=np.sort(idx))


# ---------------------------------------------------------------------------
# Rotation helpers (numpy; the fitting module has torch twins)
# ---------------------------------------------------------------------------

def _perp_frame(d: np.ndarray):
    """Deterministic orthonormal pair perpendicular to unit vector d."""
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(d)))] = 1.0
    e1 = np.cross(d, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    return e1, e2


def axis_angle_matrix(v: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        return np.eye(3)
    a = v / angle
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)


def matrix_to_axis_angle(R: np.ndarray) -> np.ndarray:
    cos_a = (np.trace(R) - 1.0) / 2.0
    cos_a = min(1.0, max(-1.0, cos_a))
    angle = math.acos(cos_a)
    if angle < 1e-9:
        return np.zeros(3)
    if angle > math.pi - 1e-6:
        # near pi: extract axis from the symmetric part
        B = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(B), 0.0))
        axis *= np.sign([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) + \
            (np.sign([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) == 0)
        axis /= np.linalg.norm(axis)
        return axis * angle
    axis = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    axis /= (2.0 * math.sin(angle))
    return axis * angle


def rotation_between(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Minimal axis-angle vector rotating unit u onto unit v."""
    c = np.cross(u, v)
    s = np.linalg.norm(c)
    d = float(np.dot(u, v))
    if s < 1e-12:
        if d > 0:
            return np.zeros(3)
        e1, _ = _perp_frame(u)
        return e1 * math.pi
    return (c / s) * math.atan2(s, d)


def _axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    return axis_angle_matrix(np.asarray(axis, dtype=np.float64) * angle)


# ---------------------------------------------------------------------------
# Forward kinematics and capsule surface sampling
# ---------------------------------------------------------------------------

def fk_frames(body: ArticulatedBody, theta: Optional[np.ndarray] = None,
              beta: Optional[dict] = None, root_shift=(0.0, 0.0, 0.0)):
    """World positions and orientations of every joint.

    theta is (J, 3) axis-angle per joint; beta maps a length group name to a
    multiplier ("radius" scales capsule radii in the surface sampler).
    """
    J = body.n_joints
    if theta is None:
        theta = np.zeros((J, 3))
    scale = np.ones(J)
    if beta:
        for j in range(J):
            scale[j] = beta.get(body.length_groups[j], 1.0)
    pos = np.zeros((J, 3))
    rot = np.zeros((J, 3, 3))
    for j in range(J):
        R_local = axis_angle_matrix(theta[j])
        p = body.parents[j]
        if p < 0:
            pos[j] = body.offsets[j] * scale[j] + np.asarray(root_shift)
            rot[j] = R_local
        else:
            pos[j] = pos[p] + rot[p] @ (body.offsets[j] * scale[j])
            rot[j] = rot[p] @ R_local
    return pos, rot


def _segment_params(body: ArticulatedBody):
    """Per-raw-point (segment child joint, unrolled axial fraction, angle)."""
    n = body.surface_samples_per_segment
    golden = math.pi * (1.0 + math.sqrt(5.0))
    a_frac = (np.arange(n) + 0.5) / n
    phi = golden * np.arange(n)
    segs = np.arange(1, body.n_joints)
    return np.repeat(segs, n), np.tile(a_frac, len(segs)), np.tile(phi, len(segs))


def body_surface_points(body: ArticulatedBody, theta=None, beta=None,
                        root_shift=(0.0, 0.0, 0.0)):
    """All raw capsule surface points for a pose; returns (points, segment ids).

    Point k of a segment lies at a fixed (axial fraction, angle) of its
    capsule, so indices correspond across poses and shape multipliers.
    """
    pos, rot = fk_frames(body, theta, beta, root_shift)
    seg, a_frac, phi = _segment_params(body)
    rad_scale = beta.get("radius", 1.0) if beta else 1.0
    pts = np.empty((len(seg), 3))
    for j in range(1, body.n_joints):
        rows = seg == j
        p = body.parents[j]
        scale = beta.get(body.length_groups[j], 1.0) if beta else 1.0
        off = body.offsets[j] * scale
        L = np.linalg.norm(off)
        r = body.segment_radii[j] * rad_scale
        d_local = off / L
        e1_local, e2_local = _perp_frame(
            body.offsets[j] / np.linalg.norm(body.offsets[j]))
        D = rot[p] @ d_local
        E1 = rot[p] @ e1_local
        E2 = rot[p] @ e2_local
        a = a_frac[rows] * (L + 2 * r) - r
        h = a - np.clip(a, 0.0, L)
        rho = np.sqrt(np.maximum(r * r - h * h, 0.0))
        circ = np.cos(phi[rows])[:, None] * E1 + np.sin(phi[rows])[:, None] * E2
        pts[rows] = pos[p] + a[:, None] * D + rho[:, None] * circ
    return pts, seg


def build_canonical_body(body: ArticulatedBody) -> PointCloud:
    """Zero-pose canonical cloud, co-centered with the object frame origin."""
    if body.n_points > body.n_raw_points:
        raise InvalidConfig("canonical_indices exceed raw surface samples")
    raw, seg = body_surface_points(body)
    sel = raw[body.canonical_indices]
    sel = sel - sel.mean(axis=0)
    return PointCloud(quantize32(sel), CANONICAL_FRAME,
                      labels=seg[body.canonical_indices])


# ---------------------------------------------------------------------------
# Object primitives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Box:
    center: np.ndarray
    half: np.ndarray

    def sdf(self, p):
        q = np.abs(p - self.center) - self.half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def area(self):
        hx, hy, hz = self.half
        return 8.0 * (hx * hy + hy * hz + hx * hz)

    def sample_surface(self, n, rng):
        hx, hy, hz = self.half
        areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy])
        areas = areas / areas.sum()
        face = rng.choice(6, size=n, p=areas)
        uv = rng.uniform(-1.0, 1.0, size=(n, 2))
        pts = np.empty((n, 3))
        for f in range(6):
            m = face == f
            axis, sign = divmod(f, 2)
            others = [a for a in range(3) if a != axis]
            pts[m, axis] = self.half[axis] * (1.0 if sign == 0 else -1.0)
            pts[m, others[0]] = uv[m, 0] * self.half[others[0]]
            pts[m, others[1]] = uv[m, 1] * self.half[others[1]]
        return pts + self.center

    def bounds(self):
        return self.center - self.half, self.center + self.half


@dataclass(frozen=True)
class _VCylinder:
    center: np.ndarray
    radius: float
    half_height: float

    def sdf(self, p):
        rel = p - self.center
        dr = np.linalg.norm(rel[..., :2], axis=-1) - self.radius
        dz = np.abs(rel[..., 2]) - self.half_height
        q = np.stack([dr, dz], axis=-1)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def area(self):
        return 2 * math.pi * self.radius * (2 * self.half_height + self.radius)

    def sample_surface(self, n, rng):
        side = 2 * math.pi * self.radius * 2 * self.half_height
        cap = math.pi * self.radius ** 2
        p_side = side / (side + 2 * cap)
        which = rng.uniform(size=n)
        ang = rng.uniform(0, 2 * math.pi, size=n)
        pts = np.empty((n, 3))
        on_side = which < p_side
        pts[on_side, 0] = self.radius * np.cos(ang[on_side])
        pts[on_side, 1] = self.radius * np.sin(ang[on_side])
        pts[on_side, 2] = rng.uniform(-self.half_height, self.half_height,
                                      size=int(on_side.sum()))
        on_cap = ~on_side
        rr = self.radius * np.sqrt(rng.uniform(size=int(on_cap.sum())))
        top = rng.uniform(size=int(on_cap.sum())) < 0.5
        pts[on_cap, 0] = rr * np.cos(ang[on_cap])
        pts[on_cap, 1] = rr * np.sin(ang[on_cap])
        pts[on_cap, 2] = np.where(top, self.half_height, -self.half_height)
        return pts + self.center

    def bounds(self):
        r = np.array([self.radius, self.radius, self.half_height])
        return self.center - r, self.center + r


@dataclass(frozen=True)
class ObjectInstance:
    """A concrete object: analytic primitives plus its canonical point cloud."""

    kind: str
    primitives: tuple
    cloud: PointCloud
    floor_z: float

    def sdf(self, p):
        p = np.asarray(p, dtype=np.float64)
        return np.min(np.stack([prim.sdf(p) for prim in self.primitives]), axis=0)

    def sdf_normal(self, p):
        p = np.asarray(p, dtype=np.float64).reshape(3)
        h = 1e-5
        g = np.array([
            float(self.sdf(p + np.eye(3)[a] * h) - self.sdf(p - np.eye(3)[a] * h))
            for a in range(3)
        ]) / (2 * h)
        n = np.linalg.norm(g)
        return g / n if n > 1e-12 else np.array([0.0, 0.0, 1.0])

    @property
    def top_z(self):
        return float(self.cloud.points[:, 2].max())


def _build_primitives(kind: str, rng) -> tuple:
    """Primitives in rest coordinates (object resting on the z=0 floor)."""
    if kind == "box":
        half = np.array([rng.uniform(0.15, 0.40), rng.uniform(0.15, 0.40),
                         rng.uniform(0.20, 0.40)])
        return (_Box(np.array([0, 0, half[2]]), half),)
    if kind == "cylinder":
        r = rng.uniform(0.12, 0.30)
        hh = rng.uniform(0.20, 0.45)
        return (_VCylinder(np.array([0, 0, hh]), r, hh),)
    if kind == "pole":
        r = rng.uniform(0.03, 0.06)
        hh = rng.uniform(0.50, 0.90)
        return (_VCylinder(np.array([0, 0, hh]), r, hh),)
    if kind == "table-composite":
        hx = rng.uniform(0.40, 0.70)
        hy = rng.uniform(0.30, 0.50)
        height = rng.uniform(0.65, 0.78)
        top = _Box(np.array([0, 0, height - 0.03]), np.array([hx, hy, 0.03]))
        legs = []
        leg_h = (height - 0.06) / 2
        for sx in (-1, 1):
            for sy in (-1, 1):
                c = np.array([sx * (hx - 0.05), sy * (hy - 0.05), leg_h])
                legs.append(_Box(c, np.array([0.03, 0.03, leg_h])))
        return (top, *legs)
    raise InvalidArgument(f"unknown object kind {kind!r}")


def _shift_primitive(prim, delta):
    if isinstance(prim, _Box):
        return _Box(prim.center + delta, prim.half)
    return _VCylinder(prim.center + delta, prim.radius, prim.half_height)


def make_object(kind: str, n_points: int, seed: int) -> ObjectInstance:
    """Sample a concrete object and its centered surface cloud."""
    rng = derive_rng(seed, "object", kind)
    prims = _build_primitives(kind, rng)
    areas = np.array([p.area() for p in prims])
    weights = areas / areas.sum()
    pts = np.empty((0, 3))
    # rejection-sample the union surface so buried points (e.g. leg tops
    # inside the table top) never appear
    while len(pts) < n_points:
        count = max(n_points, 64)
        choice = rng.choice(len(prims), size=count, p=weights)
        batch = np.concatenate(
            [prims[i].sample_surface(int((choice == i).sum()), rng)
             for i in range(len(prims))])
        sdf = np.min(np.stack([p.sdf(batch) for p in prims]), axis=0)
        pts = np.concatenate([pts, batch[sdf > -1e-9]])
    pts = pts[:n_points]
    centroid = pts.mean(axis=0)
    pts = quantize32(pts - centroid)
    prims = tuple(_shift_primitive(p, -centroid) for p in prims)
    return ObjectInstance(kind, prims, PointCloud(pts, CANONICAL_FRAME),
                          floor_z=float(-centroid[2]))


# ---------------------------------------------------------------------------
# Scenario pose solver
# ---------------------------------------------------------------------------

_SIDE_AZIMUTH = {"front": math.pi, "back": 0.0, "left": 0.5 * math.pi,
                 "right": -0.5 * math.pi}


class _Pose:
    """Scratch state for one scenario solve."""

    def __init__(self, body: ArticulatedBody):
        self.theta = np.zeros((body.n_joints, 3))
        self.root_shift = np.zeros(3)


def _arm_joints(body, side: str):
    p = "l_" if side == "left" else "r_"
    return tuple(body.joint_index(p + n) for n in ("shoulder", "elbow", "wrist", "hand"))


def _hang_arm(body, pose, side: str, jitter: float):
    sign = -1.0 if side == "left" else 1.0
    sh = _arm_joints(body, side)[0]
    pose.theta[sh] = np.array([sign * (0.5 * math.pi + jitter), 0.0, 0.0])


def _stance(body, obj, pose, azimuth, distance, pitch, squat):
    """Feet on the floor at a polar offset, facing the object, optional
    forward torso pitch and knee bend (legs stay vertical under the hips)."""
    u = np.array([math.cos(azimuth), math.sin(azimuth), 0.0])
    facing = -u
    yaw = math.atan2(facing[1], facing[0])
    lat = np.cross([0.0, 0.0, 1.0], facing)
    R_yaw = rotation_about_z(yaw)
    R_root = _axis_rotation(lat, pitch) @ R_yaw
    pose.theta[0] = matrix_to_axis_angle(R_root)
    for side_pref in ("l_", "r_"):
        hip = body.joint_index(side_pref + "hip")
        knee = body.joint_index(side_pref + "knee")
        ankle = body.joint_index(side_pref + "ankle")
        R_hip = _axis_rotation(lat, -squat) @ R_yaw
        R_knee = _axis_rotation(lat, +squat) @ R_yaw
        pose.theta[hip] = matrix_to_axis_angle(R_root.T @ R_hip)
        pose.theta[knee] = matrix_to_axis_angle(R_hip.T @ R_knee)
        pose.theta[ankle] = matrix_to_axis_angle(R_knee.T @ R_yaw)
    pose.root_shift = np.zeros(3)
    raw, seg = body_surface_points(body, pose.theta)
    feet = np.isin(seg, body.segment_ids(("l_foot", "r_foot", "l_ankle", "r_ankle")))
    z_off = obj.floor_z - raw[feet][:, 2].min()
    pose.root_shift = np.array([u[0] * distance, u[1] * distance, z_off])
    return u, facing


def _solve_arm(body, pose, side: str, wrist_target, hand_dir):
    """Exact two-link IK; returns False when the target is unreachable."""
    sh, el, wr, hd = _arm_joints(body, side)
    a1 = np.linalg.norm(body.offsets[el])
    a2 = np.linalg.norm(body.offsets[wr])
    pos, rot = fk_frames(body, pose.theta, root_shift=pose.root_shift)
    S = pos[sh]
    r_vec = wrist_target - S
    r = np.linalg.norm(r_vec)
    if not (abs(a1 - a2) + 0.01 < r < a1 + a2 - 0.005):
        return False
    u1 = r_vec / r
    hint = np.array([0.0, 0.0, -1.0])
    hint = hint - u1 * np.dot(hint, u1)
    hn = np.linalg.norm(hint)
    if hn < 1e-6:
        hint = np.array([1.0, 0.0, 0.0]) - u1 * u1[0]
        hn = np.linalg.norm(hint)
    v = hint / hn
    cos_g = (a1 * a1 + r * r - a2 * a2) / (2 * a1 * r)
    cos_g = min(1.0, max(-1.0, cos_g))
    sin_g = math.sqrt(max(0.0, 1.0 - cos_g * cos_g))
    elbow_pos = S + a1 * (cos_g * u1 + sin_g * v)

    pose.theta[sh] = rotation_between(
        body.offsets[el] / a1, rot[body.parents[sh]].T @ ((elbow_pos - S) / a1))
    pos, rot = fk_frames(body, pose.theta, root_shift=pose.root_shift)
    d2 = wrist_target - pos[el]
    d2 /= np.linalg.norm(d2)
    pose.theta[el] = rotation_between(body.offsets[wr] / a2, rot[sh].T @ d2)
    pos, rot = fk_frames(body, pose.theta, root_shift=pose.root_shift)
    hlen = np.linalg.norm(body.offsets[hd])
    pose.theta[wr] = rotation_between(body.offsets[hd] / hlen, rot[el].T @ hand_dir)
    return True


# how each mode picks its hand targets on the object surface:
#   reach - single-hand grasp near the top, mild same-side preference
#   face  - both palms spread on the near face (push)
#   flank - hands on the lateral extremes (two-hand lift)
_TARGET_STYLES = {
    "reach": (0.55, 0.30, 0.75, 4),
    "face":  (0.70, 0.80, 0.50, 3),
    "flank": (0.25, 2.00, 0.60, 6),
}


def _grasp_target(obj, rng, u, facing, style, side_sign):
    """Seeded object cloud point for one hand, with outward normal and a
    tangential hand direction (capsule lies flat on the surface)."""
    near_q, lat_w, depth, keep_div = _TARGET_STYLES[style]
    pts = obj.cloud.points
    z_top = obj.top_z
    z_lo = max(obj.floor_z + 0.20, z_top - depth)
    near = pts[:, :2] @ u[:2]
    lat = np.cross([0.0, 0.0, 1.0], facing)
    band = (pts[:, 2] >= z_lo) & (pts[:, 2] <= z_top + 0.01)
    if not band.any():
        band = np.ones(len(pts), dtype=bool)
    cand = np.where(band & (near >= np.quantile(near[band], near_q)))[0]
    if len(cand) == 0:
        cand = np.where(band)[0]
    score = side_sign * lat_w * (pts[cand] @ lat)
    order = np.argsort(-score, kind="stable")
    cand = cand[order[: max(1, len(order) // keep_div)]]
    g = pts[int(cand[rng.integers(len(cand))])]
    n_hat = obj.sdf_normal(g)
    return g, n_hat, _tangent_dirs(n_hat, facing)


def _tangent_dirs(n_hat, facing):
    """Candidate hand-capsule axes: flat on the surface along the reach
    direction, or along the vertical tangent (better on thin objects)."""
    dirs = []
    for ref in (facing, np.array([0.0, 0.0, 1.0])):
        t = ref - n_hat * np.dot(ref, n_hat)
        tn = np.linalg.norm(t)
        if tn > 1e-6:
            dirs.append(t / tn)
    if not dirs:
        t = np.cross(n_hat, [0.0, 0.0, 1.0])
        dirs.append(t / np.linalg.norm(t))
    return dirs


def _grasp_pose(body, obj, pose, rng, azim, sides, dist_extra, style):
    """Stand and place the requested hand(s) on the object surface."""
    pts = obj.cloud.points
    support = float(np.max(pts[:, 0] * math.cos(azim) + pts[:, 1] * math.sin(azim)))
    hand_r = body.segment_radii[body.joint_index("l_hand")]
    hand_len = np.linalg.norm(body.offsets[body.joint_index("l_hand")])
    press = hand_r - (PENETRATION_LIMIT - 0.0005)
    base_dist = support + 0.40 + dist_extra

    def hand_contacts(side):
        raw, seg = body_surface_points(body, pose.theta,
                                       root_shift=pose.root_shift)
        hand_id = body.joint_index(("l_" if side == "left" else "r_") + "hand")
        return int(np.sum(obj.sdf(raw[seg == hand_id]) <= CONTACT_THRESHOLD))

    for pitch, squat in _STANCE_LADDER:
        for pose_dist in (base_dist, base_dist - 0.06, base_dist - 0.12):
            if pose_dist < support + 0.02:
                continue
            pose.theta = np.zeros_like(pose.theta)
            u, facing = _stance(body, obj, pose, azim, pose_dist, pitch, squat)
            for side in ("left", "right"):
                if side not in sides:
                    _hang_arm(body, pose, side, rng.uniform(-0.08, 0.08))
            ok = True
            for side in sides:
                side_sign = 1.0 if side == "left" else -1.0
                g, n_hat, dirs = _grasp_target(obj, rng, u, facing,
                                               style, side_sign)
                target = g + n_hat * press
                placed = False
                for hand_dir in dirs:
                    wrist_target = target - hand_dir * (hand_len / 2.0)
                    if not _solve_arm(body, pose, side, wrist_target, hand_dir):
                        continue
                    if hand_contacts(side) >= 5:
                        placed = True
                        break
                if not placed:
                    ok = False
                    break
            if ok:
                return True
    return False


def _sit_pose(body, obj, pose, rng, azim, dist_extra):
    """Perch on the object top near the approach-side edge, facing outward."""
    pts = obj.cloud.points
    z_top = obj.top_z
    top_pts = pts[pts[:, 2] > z_top - 0.05]
    u = np.array([math.cos(azim), math.sin(azim), 0.0])
    center_xy = top_pts[:, :2].mean(axis=0)
    edge = float(np.max((top_pts[:, :2] - center_xy) @ u[:2]))
    yaw = math.atan2(u[1], u[0])   # faces outward, legs hang off the edge
    R_yaw = rotation_about_z(yaw)
    if edge < 0.12:
        # narrow top (pole): perch one hip capsule directly over the center
        hip_lat = (R_yaw @ np.array([0.0, 0.10, 0.0]))[:2]
        anchor = center_xy - hip_lat + u[:2] * dist_extra
    else:
        anchor = center_xy + u[:2] * max(0.0, edge - 0.10 + dist_extra)
    lat = np.cross([0.0, 0.0, 1.0], u)
    pose.theta = np.zeros_like(pose.theta)
    pose.theta[0] = matrix_to_axis_angle(R_yaw)
    for side_pref in ("l_", "r_"):
        hip = body.joint_index(side_pref + "hip")
        knee = body.joint_index(side_pref + "knee")
        bend = rng.uniform(1.15, 1.40)
        R_hip = _axis_rotation(lat, -bend) @ R_yaw
        R_knee = R_yaw  # shins vertical, hanging off the edge
        pose.theta[hip] = matrix_to_axis_angle(R_yaw.T @ R_hip)
        pose.theta[knee] = matrix_to_axis_angle(R_hip.T @ R_knee)
    facing = u
    for side in ("left", "right"):
        _hang_arm(body, pose, side, rng.uniform(-0.08, 0.08))
        # forearms rest forward over the thighs so the hands clear the seat
        sh, el, wr, hd = _arm_joints(body, side)
        pos, rot = fk_frames(body, pose.theta)
        a2 = np.linalg.norm(body.offsets[wr])
        fore_dir = facing - np.array([0.0, 0.0, 0.45])
        fore_dir /= np.linalg.norm(fore_dir)
        pose.theta[el] = rotation_between(body.offsets[wr] / a2,
                                          rot[sh].T @ fore_dir)
    pose.root_shift = np.zeros(3)
    raw, seg = body_surface_points(body, pose.theta)
    pel = np.isin(seg, body.segment_ids(PELVIS_SEGMENTS))
    z_off = (z_top - 0.0015) - raw[pel][:, 2].min()
    pose.root_shift = np.array([anchor[0], anchor[1], z_off])
    return True


@dataclass(frozen=True)
class HoiSample:
    """One paired (object, goal human, ground-truth flow) sample."""

    object: PointCloud
    human_goal: PointCloud
    flow_gt: np.ndarray
    mode: InteractionMode
    seed: int
    object_instance: Optional[ObjectInstance] = None
    contact_pairs: Optional[np.ndarray] = None   # audited (i, j), ||h_i - o_j|| < 1.5 cm

    def __post_init__(self):
        flow = np.asarray(self.flow_gt, dtype=np.float64)
        if flow.shape != self.human_goal.points.shape:
            raise InvalidArgument("flow must align with the human cloud")
        object.__setattr__(self, "flow_gt", flow)


def compute_flow_gt(human_goal: PointCloud, h0: PointCloud) -> np.ndarray:
    """Per-point displacement of the goal human from the canonical pose."""
    if human_goal.count != h0.count:
        raise InvalidArgument(f"count mismatch: {human_goal.count} vs {h0.count}")
    return human_goal.points - h0.points


def audit_contact_pairs(human: PointCloud, obj: PointCloud,
                        threshold: float = CONTACT_THRESHOLD) -> np.ndarray:
    """All (i, j) index pairs closer than the contact threshold."""
    d2 = np.sum((human.points[:, None, :] - obj.points[None, :, :]) ** 2, axis=2)
    i, j = np.where(d2 < threshold * threshold)
    return np.stack([i, j], axis=1) if len(i) else np.empty((0, 2), dtype=np.int64)


_MODE_HANDS = {"grasp-left": ("left",), "grasp-right": ("right",),
               "two-hand-lift": ("left", "right"), "push": ("left", "right")}


def generate_scenario(object_kind: str, mode: InteractionMode, seed: int, *,
                      body: Optional[ArticulatedBody] = None,
                      n_object_points: Optional[int] = None,
                      object_seed: Optional[int] = None) -> HoiSample:
    """Pose the body against a seeded object so the mode's contact holds.

    Object geometry is drawn from object_seed (defaults to seed), so
    evaluation scenarios can fix one object instance while varying poses.
    Raises GenerationFailure when no collision-free contact pose is found
    within the iteration budget.
    """
    if object_kind not in OBJECT_KINDS:
        raise InvalidArgument(f"unknown object kind {object_kind!r}")
    body = body or default_body()
    n_obj = n_object_points or body.n_points
    obj = make_object(object_kind, n_obj,
                      seed if object_seed is None else object_seed)
    h0 = build_canonical_body(body)
    rng = derive_rng(seed, "pose", object_kind, mode.mode_id)
    pose = _Pose(body)
    azim = _SIDE_AZIMUTH[mode.approach_side] + rng.uniform(-0.26, 0.26)

    if mode.mode_id == "sit":
        audit_groups = [(body.segment_ids(PELVIS_SEGMENTS), 2)]
    else:
        hands = _MODE_HANDS[mode.mode_id]
        audit_groups = [
            (body.segment_ids((("l_" if h == "left" else "r_") + "hand",)), 5)
            for h in hands]

    dist_extra = 0.0
    solved = False
    for _ in range(MAX_POSE_ITERS):
        if mode.mode_id == "sit":
            ok = _sit_pose(body, obj, pose, rng, azim, dist_extra)
        else:
            style = {"two-hand-lift": "flank", "push": "face"}.get(
                mode.mode_id, "reach")
            ok = _grasp_pose(body, obj, pose, rng, azim,
                             _MODE_HANDS[mode.mode_id], dist_extra, style)
        if not ok:
            azim = _SIDE_AZIMUTH[mode.approach_side] + rng.uniform(-0.26, 0.26)
            dist_extra = max(0.0, dist_extra - 0.05)
            continue
        raw, seg = body_surface_points(body, pose.theta, root_shift=pose.root_shift)
        sdf = obj.sdf(raw)
        worst = float(sdf.min())
        if worst < -PENETRATION_LIMIT:
            dist_extra += max(0.03, -worst - PENETRATION_LIMIT + 1e-3)
            continue
        if all(int(np.sum(sdf[np.isin(seg, grp)] <= CONTACT_THRESHOLD)) >= need
               for grp, need in audit_groups):
            solved = True
            break
        azim = _SIDE_AZIMUTH[mode.approach_side] + rng.uniform(-0.26, 0.26)
    if not solved:
        raise GenerationFailure(
            f"no valid {mode.mode_id} pose on {object_kind} for seed {seed} "
            f"after {MAX_POSE_ITERS} iterations")

    raw, seg = body_surface_points(body, pose.theta, root_shift=pose.root_shift)
    human = PointCloud(quantize32(raw[body.canonical_indices]), CANONICAL_FRAME,
                       labels=seg[body.canonical_indices])
    flow = compute_flow_gt(human, h0)
    return HoiSample(obj.cloud, human, flow, mode, seed, obj,
                     audit_contact_pairs(human, obj.cloud))


def augment(obj: PointCloud, rotation_seed: Optional[int],
            occlusion_fraction: float, seed: int, return_info: bool = False):
    """Training/eval augmentation: yaw rotation, then slab occlusion.

    A seeded direction d is drawn and the occlusion_fraction of points with
    the largest dot(p, d) are dropped (a half-space slab, mimicking partial
    scans); survivors keep their input order and are re-centered on their
    centroid. rotation_seed None applies the identity rotation.
    """
    if not 0.0 <= occlusion_fraction < 1.0:
        raise InvalidArgument("occlusion_fraction must lie in [0, 1)")
    pts = obj.points
    angle = 0.0
    if rotation_seed is not None:
        angle = float(derive_rng(rotation_seed, "aug-rot").uniform(0.0, 2 * math.pi))
        pts = pts @ rotation_about_z(angle).T
    n = len(pts)
    kept_idx = np.arange(n)
    direction = None
    n_drop = int(np.rint(occlusion_fraction * n))
    if n_drop > 0:
        if n_drop >= n:
            raise InvalidArgument("occlusion would drop every point")
        v = derive_rng(seed, "aug-occ").normal(size=3)
        direction = v / np.linalg.norm(v)
        dots = pts @ direction
        order = np.argsort(dots, kind="stable")
        kept_idx = np.sort(order[: n - n_drop])
        pts = pts[kept_idx]
    pts = pts - pts.mean(axis=0)
    labels = obj.labels[kept_idx] if obj.labels is not None else None
    out = PointCloud(pts, CANONICAL_FRAME, labels=labels)
    if return_info:
        return out, {"kept_indices": kept_idx, "angle": angle,
                     "direction": direction}
    return out


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------

@dataclass
class DatasetConfig:
    out_dir: str
    kinds: tuple = OBJECT_KINDS
    modes: tuple = ("grasp-left", "grasp-right")
    reps: int = 50                       # seeds per (kind, mode slot)
    n_points: int = 512
    n_object_points: Optional[int] = None
    master_seed: int = 0
    fixed_object_seed: Optional[int] = None
    augment_rotation: bool = True        # recorded policy, used by training
    max_occlusion: float = 0.3

    @property
    def total(self) -> int:
        return len(self.kinds) * len(self.modes) * self.reps


def generate_dataset(config: DatasetConfig, body: Optional[ArticulatedBody] = None):
    """Write config.total samples plus a manifest; reproducible bit-for-bit.

    The object kind cycles deterministically; each sample's mode is drawn
    uniformly from config.modes with its own seed, so multi-mode scenarios
    stay multimodal. Failed poses advance to a retry seed, and the manifest
    records the seed that actually produced each file.
    """
    from pathlib import Path

    from . import fileio  # deferred: fileio imports this module's types

    if not config.modes:
        raise InvalidConfig("dataset config needs at least one mode")
    body = body or default_body(config.n_points)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    per_kind = len(config.modes) * config.reps
    manifest_lines = []
    written = []
    for s in range(config.total):
        kind = config.kinds[s // per_kind]
        rng = derive_rng(config.master_seed, "mode", s)
        mode = InteractionMode(
            config.modes[int(rng.integers(len(config.modes)))],
            APPROACH_SIDES[int(rng.integers(len(APPROACH_SIDES)))])
        sample = None
        for attempt in range(24):
            seed = derive_seed(config.master_seed, "sample", s, attempt)
            try:
                sample = generate_scenario(
                    kind, mode, seed, body=body,
                    n_object_points=config.n_object_points,
                    object_seed=config.fixed_object_seed)
                break
            except GenerationFailure:
                continue
        if sample is None:
            raise GenerationFailure(
                f"sample {s} ({kind}, {mode.mode_id}) failed for every retry seed")
        name = f"sample_{s:05d}.h2od"
        fileio.write_sample(out / name, sample)
        manifest_lines.append(
            f"{name} {MODE_CODES[sample.mode.mode_id]} {sample.seed}")
        written.append(out / name)
    manifest = out / "manifest.txt"
    manifest.write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
    return manifest, written
