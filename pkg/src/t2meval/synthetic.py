"""Bundled synthetic data: a separable 8-class motion-text task used by
the end-to-end training gate, plus helpers to materialize it as a corpus
on disk and to build rated datasets for search/correlation tests.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .motion import NUM_JOINTS, MotionSequence, save_npy

# rough standing skeleton for the 22-joint SMPL tree, y up, meters
REST_POSE = np.array([
    [0.00, 0.94, 0.00],   # pelvis
    [0.09, 0.87, 0.00],   # left hip
    [-0.09, 0.87, 0.00],  # right hip
    [0.00, 1.04, 0.00],   # spine1
    [0.10, 0.49, 0.00],   # left knee
    [-0.10, 0.49, 0.00],  # right knee
    [0.00, 1.14, 0.00],   # spine2
    [0.09, 0.08, 0.00],   # left ankle
    [-0.09, 0.08, 0.00],  # right ankle
    [0.00, 1.25, 0.00],   # spine3
    [0.10, 0.02, 0.12],   # left foot
    [-0.10, 0.02, 0.12],  # right foot
    [0.00, 1.43, 0.00],   # neck
    [0.06, 1.40, 0.00],   # left collar
    [-0.06, 1.40, 0.00],  # right collar
    [0.00, 1.55, 0.00],   # head
    [0.17, 1.42, 0.00],   # left shoulder
    [-0.17, 1.42, 0.00],  # right shoulder
    [0.42, 1.42, 0.00],   # left elbow
    [-0.42, 1.42, 0.00],  # right elbow
    [0.67, 1.42, 0.00],   # left wrist
    [-0.67, 1.42, 0.00],  # right wrist
])
assert REST_POSE.shape == (NUM_JOINTS, 3)

DIRECTION_NAMES = (
    "north", "north east", "east", "south east",
    "south", "south west", "west", "north west",
)


def direction_vector(class_index: int) -> np.ndarray:
    angle = class_index * (2.0 * np.pi / len(DIRECTION_NAMES))
    return np.array([np.sin(angle), 0.0, np.cos(angle)])


def make_motion(
    class_index: int,
    frames: int = 40,
    speed: float = 0.06,
    noise: float = 0.01,
    rng: np.random.Generator | None = None,
) -> MotionSequence:
    """A body translating at constant speed in one of 8 compass
    directions, with small pose jitter."""
    rng = rng or np.random.default_rng(0)
    t = np.arange(frames)[:, None, None]
    pos = REST_POSE[None, :, :] + t * speed * direction_vector(class_index)[None, None, :]
    pos = pos + rng.normal(scale=noise, size=pos.shape)
    return MotionSequence(positions=pos)


def description(class_index: int) -> str:
    return f"a person walks {DIRECTION_NAMES[class_index]}"


def make_direction_task(
    n: int, seed: int = 0, frames: int = 40
) -> list[tuple[MotionSequence, str, int]]:
    """n (motion, description, class) triples cycling over the 8 classes."""
    rng = np.random.default_rng(seed)
    task = []
    for i in range(n):
        cls = i % len(DIRECTION_NAMES)
        task.append((make_motion(cls, frames=frames, rng=rng), description(cls), cls))
    return task


def write_corpus(out_dir: str | Path, n: int = 128, seed: int = 0, frames: int = 40) -> Path:
    """Materialize the synthetic task as a training corpus on disk:
    npy motions plus a (filename, description) tab-separated file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, (motion, text, _) in enumerate(make_direction_task(n, seed=seed, frames=frames)):
        name = f"motion_{i:04d}.npy"
        arr = motion.positions.astype(np.float32)
        save_npy(out_dir / name, MotionSequence(positions=arr))
        lines.append(f"{name}\t{text}")
    pairs = out_dir / "descriptions.tsv"
    pairs.write_text("\n".join(lines) + "\n")
    return pairs
