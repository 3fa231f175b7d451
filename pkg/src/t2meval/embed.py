"""Embedding-space metrics over a pluggable motion/text co-embedding:
Frechet distance between Gaussian fits, retrieval precision at a rank
allowance, and the direct motion-to-prompt distance.

Includes a small trainable linear co-embedding so the metrics are
exercisable end to end without an external encoder, plus ingestion of
precomputed embedding files.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, FormatError, NumericalError, TrainingError
from .motion import MotionFeatures

DEFAULT_BATCH_SIZE = 32
_EIG_FAIL_REL = 1e-6   # more negative than this (relative) means not PSD
_EIG_CLAMP_REL = 1e-10  # eigenvalues below this (relative) are zeroed


class EmbeddingProvider(ABC):
    """Deterministic co-embedding of motions and texts into one space."""

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @abstractmethod
    def embed_motion(self, features: MotionFeatures) -> np.ndarray: ...

    @abstractmethod
    def embed_text(self, text: str) -> np.ndarray: ...


@dataclass(frozen=True)
class GaussianStats:
    """Sample mean and covariance (n-1 denominator) of an embedding set."""

    mean: np.ndarray
    cov: np.ndarray
    n: int


def gaussian_stats(samples: np.ndarray) -> GaussianStats:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"samples must be (n, d), got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise DataError(f"need >= 2 samples for covariance, got {n}")
    mu = x.mean(axis=0)
    centered = x - mu
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mu, cov=cov, n=n)


def _psd_eigvals(mat: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose a symmetric matrix, policing negative eigenvalues."""
    vals, vecs = np.linalg.eigh(mat)
    scale = float(np.abs(vals).max(initial=0.0))
    if scale > 0.0 and vals.min() < -_EIG_FAIL_REL * scale:
        raise NumericalError(
            f"{what} is not PSD beyond tolerance (min eigenvalue {vals.min():.3e}, scale {scale:.3e})"
        )
    vals = np.where(vals > _EIG_CLAMP_REL * scale, vals, 0.0)
    return vals, vecs


def fid(a: GaussianStats, b: GaussianStats, mu_norm: str = "squared") -> float:
    """Frechet distance between two Gaussian fits.

    The cross term tr((S1 S2)^1/2) is evaluated through the symmetric
    form S1^1/2 S2 S1^1/2. `mu_norm` selects the squared-norm reading of
    the mean term (the standard definition) or the unsquared one.
    """
    if a.mean.shape != b.mean.shape:
        raise DataError(f"dimension mismatch: {a.mean.shape} vs {b.mean.shape}")
    if mu_norm not in ("squared", "linear"):
        raise ConfigError(f"mu_norm must be 'squared' or 'linear', got {mu_norm!r}")
    vals1, vecs1 = _psd_eigvals(a.cov, "first covariance")
    sqrt1 = (vecs1 * np.sqrt(vals1)) @ vecs1.T
    inner = sqrt1 @ b.cov @ sqrt1
    inner = (inner + inner.T) / 2.0
    cross_vals, _ = _psd_eigvals(inner, "covariance product")
    tr_cross = float(np.sqrt(cross_vals).sum())
    mean_dist = float(np.linalg.norm(a.mean - b.mean))
    mean_term = mean_dist * mean_dist if mu_norm == "squared" else mean_dist
    return mean_term + float(np.trace(a.cov) + np.trace(b.cov)) - 2.0 * tr_cross


def r_precision(
    motion_embs: np.ndarray,
    text_embs: np.ndarray,
    allowance: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> tuple[np.ndarray, float]:
    """Rank every text against each motion by Euclidean distance.

    hits[i] is 1 when motion i's true text (index i) lands within the
    top `allowance` ranks. Equal distances are broken stably by batch
    index. Returns per-sample hits and their mean.
    """
    m = np.asarray(motion_embs, dtype=np.float64)
    t = np.asarray(text_embs, dtype=np.float64)
    if m.shape != t.shape or m.ndim != 2:
        raise DataError(f"need matching (B, d) embeddings, got {m.shape} and {t.shape}")
    if m.shape[0] != batch_size:
        raise DataError(f"batch size is {batch_size}, got {m.shape[0]} pairs")
    if not (1 <= allowance <= batch_size - 1):
        raise ConfigError(f"allowance must be in [1, {batch_size - 1}], got {allowance}")
    d2 = ((m[:, None, :] - t[None, :, :]) ** 2).sum(axis=2)
    order = np.argsort(d2, axis=1, kind="stable")
    ranks = np.argmax(order == np.arange(batch_size)[:, None], axis=1)
    hits = (ranks < allowance).astype(np.int64)
    return hits, float(hits.mean())


def compose_batches(
    n_samples: int, seed: int, batch_size: int = DEFAULT_BATCH_SIZE
) -> list[np.ndarray]:
    """Per-sample retrieval batches: the true pair plus batch_size - 1
    distractors drawn without replacement from the other samples."""
    if n_samples < batch_size:
        raise DataError(f"need >= {batch_size} samples to compose batches, got {n_samples}")
    rng = np.random.default_rng(seed)
    batches = []
    for i in range(n_samples):
        others = np.delete(np.arange(n_samples), i)
        distractors = rng.choice(others, size=batch_size - 1, replace=False)
        batches.append(np.concatenate([[i], distractors]))
    return batches


def r_precision_per_sample(
    motion_embs: np.ndarray,
    text_embs: np.ndarray,
    allowance: int,
    seed: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> np.ndarray:
    """Binary retrieval hit per sample over seeded distractor batches."""
    m = np.asarray(motion_embs, dtype=np.float64)
    t = np.asarray(text_embs, dtype=np.float64)
    hits = np.zeros(m.shape[0], dtype=np.int64)
    for i, batch in enumerate(compose_batches(m.shape[0], seed, batch_size)):
        d2 = ((t[batch] - m[i][None, :]) ** 2).sum(axis=1)
        order = np.argsort(d2, kind="stable")
        rank = int(np.argmax(order == 0))  # true text sits at batch position 0
        hits[i] = 1 if rank < allowance else 0
    return hits


def multimodal_distance(
    features: MotionFeatures, text: str, provider: EmbeddingProvider
) -> float:
    """Euclidean distance between a motion embedding and its prompt's."""
    em = provider.embed_motion(features)
    et = provider.embed_text(text)
    return float(np.linalg.norm(np.asarray(em, dtype=np.float64) - np.asarray(et, dtype=np.float64)))


def load_embeddings(data_path: str | Path, manifest_path: str | Path | None = None) -> np.ndarray:
    """Read precomputed embeddings: CSV rows or raw little-endian float32,
    validated against the sidecar JSON manifest {dim, count, modality}."""
    data_path = Path(data_path)
    if manifest_path is None:
        manifest_path = data_path.with_suffix(".json")
    try:
        manifest = json.loads(Path(manifest_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{manifest_path}: cannot read embedding manifest: {exc}") from exc
    for key in ("dim", "count", "modality"):
        if key not in manifest:
            raise FormatError(f"{manifest_path}: manifest missing {key!r}")
    dim, count = int(manifest["dim"]), int(manifest["count"])
    if data_path.suffix == ".csv":
        arr = np.loadtxt(data_path, delimiter=",", dtype=np.float64, ndmin=2)
    else:
        raw = np.fromfile(data_path, dtype="<f4")
        if raw.size != dim * count:
            raise FormatError(
                f"{data_path}: {raw.size} float32 values, manifest says {count} x {dim}"
            )
        arr = raw.reshape(count, dim).astype(np.float64)
    if arr.shape != (count, dim):
        raise FormatError(f"{data_path}: shape {arr.shape} does not match manifest ({count}, {dim})")
    return arr


def save_embeddings(data_path: str | Path, arr: np.ndarray, modality: str) -> None:
    arr = np.asarray(arr)
    data_path = Path(data_path)
    manifest = {"dim": int(arr.shape[1]), "count": int(arr.shape[0]), "modality": modality}
    data_path.with_suffix(".json").write_text(json.dumps(manifest, sort_keys=True) + "\n")
    if data_path.suffix == ".csv":
        np.savetxt(data_path, arr, delimiter=",")
    else:
        arr.astype("<f4").tofile(data_path)


class LinearCoEmbedding(EmbeddingProvider):
    """Linear projections of pooled motion features and bag-of-words text
    counts into a shared space. Deterministic once fitted."""

    def __init__(self, w_motion: np.ndarray, w_text: np.ndarray,
                 vocab: dict[str, int], motion_mean: np.ndarray, motion_scale: np.ndarray):
        self.w_motion = w_motion
        self.w_text = w_text
        self.vocab = vocab
        self.motion_mean = motion_mean
        self.motion_scale = motion_scale

    @property
    def dim(self) -> int:
        return self.w_motion.shape[0]

    def _motion_vec(self, features: MotionFeatures) -> np.ndarray:
        pooled = np.asarray(features.values, dtype=np.float64).mean(axis=0)
        standardized = (pooled - self.motion_mean) / self.motion_scale
        # keep the input at unit-ish norm so gradient steps stay conditioned
        return standardized / np.sqrt(standardized.size)

    def _text_vec(self, text: str) -> np.ndarray:
        vec = np.zeros(len(self.vocab))
        for tok in text.lower().split():
            idx = self.vocab.get(tok)
            if idx is not None:
                vec[idx] += 1.0
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def embed_motion(self, features: MotionFeatures) -> np.ndarray:
        return self.w_motion @ self._motion_vec(features)

    def embed_text(self, text: str) -> np.ndarray:
        return self.w_text @ self._text_vec(text)


def train_coembedding(
    pairs: list[tuple[MotionFeatures, str]],
    dim: int = 16,
    seed: int = 0,
    iters: int = 4000,
    lr: float = 0.05,
    margin: float = 4.0,
    holdout_fraction: float = 0.25,
    target_fraction: float = 0.9,
) -> LinearCoEmbedding:
    """Fit the linear co-embedding by pulling matched pairs together and
    pushing mismatched pairs beyond a margin.

    Raises TrainingError when fewer than `target_fraction` of held-out
    items end up closer to their own text than to a random other text.
    """
    if len(pairs) < 64:
        raise DataError(f"co-embedding training needs >= 64 pairs, got {len(pairs)}")
    rng = np.random.default_rng(seed)

    vocab: dict[str, int] = {}
    for _, text in pairs:
        for tok in text.lower().split():
            vocab.setdefault(tok, len(vocab))

    pooled = np.stack([np.asarray(f.values, dtype=np.float64).mean(axis=0) for f, _ in pairs])
    mean = pooled.mean(axis=0)
    scale = pooled.std(axis=0)
    scale[scale < 1e-8] = 1.0

    provider = LinearCoEmbedding(
        w_motion=rng.normal(scale=0.1, size=(dim, pooled.shape[1])),
        w_text=rng.normal(scale=0.1, size=(dim, len(vocab))),
        vocab=vocab,
        motion_mean=mean,
        motion_scale=scale,
    )
    motions = np.stack([provider._motion_vec(f) for f, _ in pairs])
    texts = np.stack([provider._text_vec(t) for _, t in pairs])

    n = len(pairs)
    n_hold = max(1, int(round(n * holdout_fraction)))
    perm = rng.permutation(n)
    hold, train = perm[:n_hold], perm[n_hold:]

    raw_texts = [t for _, t in pairs]

    def holdout_fraction_correct() -> float:
        em = motions[hold] @ provider.w_motion.T
        et_all = texts @ provider.w_text.T
        check_rng = np.random.default_rng(seed + 1)
        good = 0
        for row, i in enumerate(hold):
            # mismatch must carry a different description, otherwise the
            # comparison is undecidable by construction
            others = [j for j in range(n) if raw_texts[j] != raw_texts[i]]
            if not others:
                raise DataError("co-embedding corpus has only one distinct description")
            j = int(check_rng.choice(others))
            d_pos = np.linalg.norm(em[row] - et_all[i])
            d_neg = np.linalg.norm(em[row] - et_all[j])
            good += int(d_pos < d_neg)
        return good / len(hold)

    # per-sample pools of negatives with a different description
    neg_pool = [np.array([j for j in range(n) if raw_texts[j] != raw_texts[i]]) for i in range(n)]
    if any(pool.size == 0 for pool in neg_pool):
        raise DataError("co-embedding corpus has only one distinct description")

    batch = min(64, len(train))
    for step in range(iters):
        idx = rng.choice(train, size=batch, replace=False)
        neg = np.array([rng.choice(neg_pool[i]) for i in idx])
        em = motions[idx] @ provider.w_motion.T
        et_pos = texts[idx] @ provider.w_text.T
        et_neg = texts[neg] @ provider.w_text.T
        diff_pos = em - et_pos
        diff_neg = em - et_neg
        d2_pos = (diff_pos ** 2).sum(axis=1)
        d2_neg = (diff_neg ** 2).sum(axis=1)
        # triplet hinge on squared distances plus a small anchoring pull
        active = (margin + d2_pos - d2_neg > 0).astype(np.float64)[:, None]
        pull = 0.1
        g_m = 2.0 * active * (diff_pos - diff_neg) + 2.0 * pull * diff_pos
        g_tpos = -(2.0 * active + 2.0 * pull) * diff_pos
        g_tneg = 2.0 * active * diff_neg
        provider.w_motion -= lr / batch * g_m.T @ motions[idx]
        provider.w_text -= lr / batch * g_tpos.T @ texts[idx]
        provider.w_text -= lr / batch * g_tneg.T @ texts[neg]
        if step % 200 == 199 and holdout_fraction_correct() >= max(target_fraction, 0.98):
            break

    achieved = holdout_fraction_correct()
    if achieved < target_fraction:
        raise TrainingError(
            f"co-embedding failed: {achieved:.2%} of held-out pairs separated "
            f"after {iters} iterations (target {target_fraction:.0%})"
        )
    return provider
