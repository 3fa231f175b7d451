"""Motion data model: AMASS-style joint sequences, frame-difference
derivatives, 263-dim per-frame features, and fixed-window chunking.

All operations are pure functions over immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import npyio
from .errors import ConfigError, DataError

NUM_JOINTS = 22
FEATURE_DIM = 263
DEFAULT_RATE_HZ = 20.0

# 22-joint SMPL kinematic tree (parent index per joint, root = -1)
PARENTS = (
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19
)
JOINT_NAMES = (
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
)
# the four lowest-index ankle/foot joints of the tree
FOOT_JOINTS = (7, 8, 10, 11)
DEFAULT_FOOT_THRESHOLD = 0.002  # m/frame

DEFAULT_CHUNK_LEN = 14
DEFAULT_CHUNK_OVERLAP = 4

# feature layout offsets: [root angular vel (1) | root xz vel (2) | root
# height (1) | root-relative joint positions 21*3 | joint rotations 6D 21*6 |
# joint velocities 22*3 | foot contacts (4)]
_OFF_ANG = 0
_OFF_XZ = 1
_OFF_HEIGHT = 3
_OFF_RELPOS = 4
_OFF_ROT6D = 67
_OFF_JVEL = 193
_OFF_FOOT = 259
assert _OFF_FOOT + 4 == FEATURE_DIM


@dataclass(frozen=True)
class MotionSequence:
    """T x 22 x 3 global joint coordinates (meters) at a fixed rate."""

    positions: np.ndarray
    rate_hz: float = DEFAULT_RATE_HZ

    def __post_init__(self):
        p = self.positions
        if p.ndim != 3 or p.shape[1] != NUM_JOINTS or p.shape[2] != 3:
            raise DataError(f"positions must be (T, {NUM_JOINTS}, 3), got {p.shape}")
        if p.shape[0] < 2:
            raise DataError(f"need at least 2 frames, got {p.shape[0]}")
        if not np.isfinite(p).all():
            raise DataError("positions contain non-finite values")

    @property
    def frames(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class MotionDerivatives:
    """Exact frame-wise differences of a motion.

    velocity[t] = positions[t+1] - positions[t]
    acceleration[t] = velocity[t+1] - velocity[t]
    """

    velocity: np.ndarray      # (T-1, 22, 3)
    acceleration: np.ndarray  # (T-2, 22, 3)


@dataclass(frozen=True)
class MotionFeatures:
    """T x 263 per-frame feature matrix (HumanML3D-style layout)."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[1] != FEATURE_DIM:
            raise DataError(f"features must be (T, {FEATURE_DIM}), got {v.shape}")

    @property
    def frames(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ChunkedMotion:
    """Fixed-length overlapping windows over a feature sequence.

    chunks[c] covers source frames [starts[c], starts[c] + chunk_len); the
    final chunk repeats the last source frame where the source is exhausted.
    """

    chunk_len: int
    overlap: int
    chunks: np.ndarray  # (C, chunk_len, 263)
    starts: np.ndarray = field(repr=False)  # (C,) source frame offsets

    @property
    def count(self) -> int:
        return self.chunks.shape[0]


def load_npy(path: str | Path) -> MotionSequence:
    """Load an AMASS-format npy motion, keeping the first 22 joints.

    The published files store (T, K, 3) with K >= 22 where joints beyond
    the SMPL body are zeroed out; those columns are dropped.
    """
    arr = npyio.read_array(path)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[1] < NUM_JOINTS:
        raise DataError(f"{path}: expected shape (T, K>=22, 3), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise DataError(f"{path}: non-finite values in motion data")
    if arr.shape[0] < 2:
        raise DataError(f"{path}: motion has {arr.shape[0]} frames, need >= 2")
    return MotionSequence(positions=arr[:, :NUM_JOINTS, :])


def save_npy(path: str | Path, motion: MotionSequence) -> None:
    """Write a motion back out as npy v1.0, preserving dtype."""
    npyio.write_array(path, motion.positions)


def derivatives(m: MotionSequence) -> MotionDerivatives:
    """Exact first and second frame-wise differences."""
    pos = m.positions
    vel = np.diff(pos, axis=0)
    acc = np.diff(vel, axis=0)
    return MotionDerivatives(velocity=vel, acceleration=acc)


def _padded_velocity(pos: np.ndarray) -> np.ndarray:
    """Per-frame velocity, with the final frame repeating the last diff."""
    vel = np.diff(pos, axis=0)
    return np.concatenate([vel, vel[-1:]], axis=0)


def _facing_angles(pos: np.ndarray) -> np.ndarray:
    """Heading angle per frame from the hip axis, radians about +y.

    Frames with a degenerate hip axis reuse the previous frame's angle.
    """
    across = pos[:, 1, :] - pos[:, 2, :]  # left hip - right hip
    forward_x = across[:, 2]
    forward_z = -across[:, 0]
    norms = np.hypot(forward_x, forward_z)
    angles = np.arctan2(forward_x, forward_z)
    out = np.empty(len(angles))
    prev = 0.0
    for t in range(len(angles)):
        if norms[t] > 1e-12:
            prev = angles[t]
        out[t] = prev
    return out


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    return np.mod(a + math.pi, 2.0 * math.pi) - math.pi


def _bone_rotations_6d(pos: np.ndarray) -> np.ndarray:
    """Per-joint 6D rotations (first two rows of a local frame matrix).

    The frame's first axis is the bone direction from the parent joint;
    the remaining axes complete an orthonormal basis against the global
    up vector. Zero-length bones emit the identity rotation.
    """
    T = pos.shape[0]
    out = np.zeros((T, NUM_JOINTS - 1, 6))
    up = np.array([0.0, 1.0, 0.0])
    x_axis = np.array([1.0, 0.0, 0.0])
    identity_6d = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    for j in range(1, NUM_JOINTS):
        bone = pos[:, j, :] - pos[:, PARENTS[j], :]
        norms = np.linalg.norm(bone, axis=1)
        ok = norms > 1e-8
        u = np.zeros_like(bone)
        u[ok] = bone[ok] / norms[ok, None]
        ref = np.where(np.abs(u @ up)[:, None] <= 0.999, up, x_axis)
        v = np.cross(ref, u)
        v_norm = np.linalg.norm(v, axis=1)
        ok &= v_norm > 1e-8
        v[ok] = v[ok] / v_norm[ok, None]
        w = np.cross(u, v)
        # rotation matrix columns are (u, v, w); 6D keeps the first two rows
        rows = np.stack(
            [u[:, 0], v[:, 0], w[:, 0], u[:, 1], v[:, 1], w[:, 1]], axis=1
        )
        rows[~ok] = identity_6d
        out[:, j - 1, :] = rows
    return out


def extract_features(
    m: MotionSequence, foot_threshold: float = DEFAULT_FOOT_THRESHOLD
) -> MotionFeatures:
    """Derive the 263-dim per-frame representation from raw coordinates.

    Velocity-derived entries at the final frame repeat the last available
    difference so the feature count matches the frame count.
    """
    pos = np.asarray(m.positions, dtype=np.float64)
    T = pos.shape[0]
    spread = np.linalg.norm(pos - pos[:, :1, :], axis=2)
    if float(spread.max(initial=0.0)) < 1e-12:
        raise DataError("degenerate skeleton: all joints coincident in every frame")

    feats = np.zeros((T, FEATURE_DIM))

    angles = _facing_angles(pos)
    ang_vel = _wrap_angle(np.diff(angles))
    feats[:, _OFF_ANG] = np.concatenate([ang_vel, ang_vel[-1:]]) if T > 1 else 0.0

    root = pos[:, 0, :]
    root_vel = _padded_velocity(root[:, None, :])[:, 0, :]
    feats[:, _OFF_XZ] = root_vel[:, 0]
    feats[:, _OFF_XZ + 1] = root_vel[:, 2]
    feats[:, _OFF_HEIGHT] = root[:, 1]

    rel = pos[:, 1:, :] - root[:, None, :]
    feats[:, _OFF_RELPOS:_OFF_ROT6D] = rel.reshape(T, 63)

    feats[:, _OFF_ROT6D:_OFF_JVEL] = _bone_rotations_6d(pos).reshape(T, 126)

    jvel = _padded_velocity(pos)
    feats[:, _OFF_JVEL:_OFF_FOOT] = jvel.reshape(T, 66)

    foot_speed = np.linalg.norm(jvel[:, FOOT_JOINTS, :], axis=2)
    feats[:, _OFF_FOOT:] = (foot_speed < foot_threshold).astype(np.float64)

    return MotionFeatures(values=feats)


def chunk_count(frames: int, chunk_len: int, overlap: int) -> int:
    stride = chunk_len - overlap
    return math.ceil(max(frames - chunk_len, 0) / stride) + 1


def chunk(
    f: MotionFeatures,
    chunk_len: int = DEFAULT_CHUNK_LEN,
    overlap: int = DEFAULT_CHUNK_OVERLAP,
) -> ChunkedMotion:
    """Slice features into overlapping fixed-length windows.

    The final window is padded by repeating the last frame once the
    source is exhausted.
    """
    if overlap < 0 or chunk_len <= overlap:
        raise ConfigError(f"need chunk_len > overlap >= 0, got {chunk_len}, {overlap}")
    values = f.values
    T = values.shape[0]
    stride = chunk_len - overlap
    count = chunk_count(T, chunk_len, overlap)
    idx = np.arange(count)[:, None] * stride + np.arange(chunk_len)[None, :]
    starts = np.arange(count) * stride
    windows = values[np.minimum(idx, T - 1)]
    return ChunkedMotion(chunk_len=chunk_len, overlap=overlap, chunks=windows, starts=starts)
