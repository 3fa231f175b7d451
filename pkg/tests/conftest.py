import numpy as np
import pytest

from t2meval.mobert.model import MoBertConfig
from t2meval.motion import NUM_JOINTS, MotionSequence


def reduced_config(**overrides) -> MoBertConfig:
    """Desk-scale model used across the tests: same topology as the
    default, every width shrunk, group sizes kept at 4+ channels."""
    base = dict(
        d_model=32, vocab_size=64, max_context=32, n_layers=2, ff_dim=64,
        n_heads=4, frame_hidden=48, chunk_mlp_dims=(672, 128, 64, 32),
        head_dims=(32, 16, 16, 1), groupnorm_groups=4, wide_groupnorm_groups=4,
    )
    base.update(overrides)
    return MoBertConfig(**base)


def random_motion(rng: np.random.Generator, frames: int = 12, scale: float = 1.0) -> MotionSequence:
    return MotionSequence(positions=rng.normal(scale=scale, size=(frames, NUM_JOINTS, 3)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
