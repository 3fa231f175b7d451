"""Alignment-prediction training: contrastive pair sampling, similarity
weighting, and the Adam loop with divergence detection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import DataError, TrainingError
from ..motion import MotionFeatures, chunk, extract_features, load_npy
from .bpe import BpeVocab
from .losses import balanced_loss, bce_group, bce_per_sample, weighted_loss
from .model import MoBertModel, assemble_sequence, batch_forward, clip_text_ids

logger = logging.getLogger(__name__)

LOSS_MODES = ("l1", "l2", "weighted")


class ConstantSimilarity:
    """Similarity provider returning a fixed score for every text pair."""

    def __init__(self, value: float = 0.0):
        if not 0.0 <= value <= 1.0:
            raise DataError(f"similarity must lie in [0, 1], got {value}")
        self.value = value

    def similarity(self, text_a: str, text_b: str) -> float:
        return self.value


class BagOfWordsSimilarity:
    """Deterministic cosine similarity over lowercase token counts."""

    def similarity(self, text_a: str, text_b: str) -> float:
        ca: dict[str, int] = {}
        cb: dict[str, int] = {}
        for tok in text_a.lower().split():
            ca[tok] = ca.get(tok, 0) + 1
        for tok in text_b.lower().split():
            cb[tok] = cb.get(tok, 0) + 1
        if not ca or not cb:
            return 0.0
        dot = sum(ca[t] * cb.get(t, 0) for t in ca)
        na = math.sqrt(sum(v * v for v in ca.values()))
        nb = math.sqrt(sum(v * v for v in cb.values()))
        sim = dot / (na * nb)
        return min(1.0, max(0.0, sim))


@dataclass
class TrainingBatch:
    """One optimizer step's worth of pairings: every motion is scored
    against its own description and one contrastive description, with a
    similarity score per contrastive pairing."""

    windows: list          # per motion: (C_i, chunk_len, frame_dim) arrays
    valid_texts: list[list[int]]
    contrastive_texts: list[list[int]]
    alpha: list[float]

    def __post_init__(self):
        n = len(self.windows)
        if not (len(self.valid_texts) == len(self.contrastive_texts) == len(self.alpha) == n):
            raise DataError("batch fields must align one contrastive text per motion")
        if any(a < 0.0 or a > 1.0 for a in self.alpha):
            raise DataError("similarity scores must lie in [0, 1]")


@dataclass
class TrainerConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-4
    grad_clip: float = 1.0
    seed: int = 0
    loss: str = "weighted"

    def __post_init__(self):
        if self.loss not in LOSS_MODES:
            raise DataError(f"loss must be one of {LOSS_MODES}, got {self.loss!r}")


@dataclass
class TrainingHistory:
    """Per-epoch means of the loss terms."""

    h_valid: list[float] = field(default_factory=list)
    h_contrastive: list[float] = field(default_factory=list)
    l2: list[float] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)


def load_corpus(motions_dir: str | Path, pairs_file: str | Path) -> list[tuple[MotionFeatures, str]]:
    """Read a training corpus: a motions directory plus tab-separated
    (motion filename, lowercase description) lines."""
    motions_dir = Path(motions_dir)
    corpus = []
    for lineno, line in enumerate(Path(pairs_file).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{pairs_file}:{lineno}: expected 'filename<TAB>description'")
        name, text = parts
        features = extract_features(load_npy(motions_dir / name))
        corpus.append((features, text.strip().lower()))
    if not corpus:
        raise DataError(f"{pairs_file}: empty training corpus")
    return corpus


def _prepare_items(model: MoBertModel, vocab: BpeVocab, corpus):
    """Tokenize texts (clipped to budget) and pre-chunk motion windows."""
    cfg = model.config
    items = []
    for features, text in corpus:
        windows = chunk(features, cfg.chunk_len, cfg.chunk_overlap).chunks
        ids = clip_text_ids(vocab.encode(text), windows.shape[0], cfg.max_context)
        items.append({"windows": windows, "text_ids": ids, "text": text})
    return items


def train(
    model: MoBertModel,
    vocab: BpeVocab,
    corpus: list[tuple[MotionFeatures, str]],
    similarity_provider,
    cfg: TrainerConfig,
) -> TrainingHistory:
    """Minimize the selected loss over valid and contrastive pairings.

    Every step evaluates each motion against its own description and one
    randomly drawn contrastive description, weighted by the similarity
    provider. Raises TrainingError after three consecutive epochs above
    ten times the initial loss.
    """
    if len(corpus) < 2:
        raise DataError("training needs at least two motion-text pairs")
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    items = _prepare_items(model, vocab, corpus)
    n = len(items)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    history = TrainingHistory()
    initial_loss = None
    bad_epochs = 0

    model.train()
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        contrastive = rng.integers(0, n - 1, size=n)
        contrastive = np.where(contrastive >= np.arange(n), contrastive + 1, contrastive)
        epoch_stats = {"h_valid": [], "h_contrastive": [], "l2": [], "loss": []}
        for start in range(0, n, cfg.batch_size):
            batch_idx = order[start:start + cfg.batch_size]
            batch = TrainingBatch(
                windows=[items[i]["windows"] for i in batch_idx],
                valid_texts=[items[i]["text_ids"] for i in batch_idx],
                contrastive_texts=[items[int(contrastive[i])]["text_ids"] for i in batch_idx],
                alpha=[
                    similarity_provider.similarity(
                        items[i]["text"], items[int(contrastive[i])]["text"]
                    )
                    for i in batch_idx
                ],
            )
            assembled = []
            for windows, valid_ids, wrong_ids in zip(
                batch.windows, batch.valid_texts, batch.contrastive_texts
            ):
                chunk_embs = model.encode_motion_windows(
                    torch.as_tensor(windows, dtype=model.dtype)
                )
                assembled.append(assemble_sequence(model, valid_ids, chunk_embs))
                assembled.append(assemble_sequence(model, wrong_ids, chunk_embs))
            out = batch_forward(model, assembled)
            logits = out["logits"].reshape(-1, 2)
            logits_v, logits_r = logits[:, 0], logits[:, 1]
            h_v = bce_group(logits_v, torch.ones_like(logits_v))
            per_r = bce_per_sample(logits_r, torch.zeros_like(logits_r))
            h_r = per_r.sum() / per_r.numel()
            l2 = balanced_loss(h_v, h_r)
            if cfg.loss == "l1":
                loss = h_v + h_r
            elif cfg.loss == "l2":
                loss = l2
            else:
                alpha = torch.as_tensor(batch.alpha, dtype=per_r.dtype)
                loss = weighted_loss(h_v, per_r, alpha)
            if initial_loss is None:
                initial_loss = float(loss.detach())  # loss at initialization
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            optimizer.step()
            epoch_stats["h_valid"].append(float(h_v.detach()))
            epoch_stats["h_contrastive"].append(float(h_r.detach()))
            epoch_stats["l2"].append(float(l2.detach()))
            epoch_stats["loss"].append(float(loss.detach()))
        for key in ("h_valid", "h_contrastive", "l2", "loss"):
            getattr(history, key).append(float(np.mean(epoch_stats[key])))
        epoch_loss = history.loss[-1]
        bad_epochs = bad_epochs + 1 if epoch_loss > 10.0 * initial_loss else 0
        if bad_epochs >= 3:
            raise TrainingError(
                f"training diverged: loss {epoch_loss:.4g} > 10x initial "
                f"{initial_loss:.4g} for 3 consecutive epochs (epoch {epoch})"
            )
        logger.debug("epoch %d: loss %.5f h_v %.5f h_r %.5f",
                      epoch, epoch_loss, history.h_valid[-1], history.h_contrastive[-1])
    model.eval()
    return history


@torch.no_grad()
def alignment_probabilities(
    model: MoBertModel, vocab: BpeVocab, pairs: list[tuple[MotionFeatures, str]]
) -> np.ndarray:
    """Eval-mode alignment probability for each (motion, text) pair."""
    model.eval()
    cfg = model.config
    probs = []
    for features, text in pairs:
        windows = chunk(features, cfg.chunk_len, cfg.chunk_overlap).chunks
        ids = clip_text_ids(vocab.encode(text), windows.shape[0], cfg.max_context)
        chunk_embs = model.encode_motion_windows(torch.as_tensor(windows, dtype=model.dtype))
        assembled = assemble_sequence(model, ids, chunk_embs)
        out = batch_forward(model, [assembled])
        probs.append(float(out["probabilities"][0]))
    return np.array(probs)


def alignment_accuracy(
    model: MoBertModel,
    vocab: BpeVocab,
    pairs: list[tuple[MotionFeatures, str]],
    seed: int = 0,
) -> float:
    """Fraction of valid pairings scored above 0.5 and mismatched-text
    pairings below 0.5. Mismatches are drawn with a description that
    differs from the true one, so every negative is decidable."""
    rng = np.random.default_rng(seed)
    n = len(pairs)
    wrong_pairs = []
    for i in range(n):
        candidates = [j for j in range(n) if pairs[j][1] != pairs[i][1]]
        if not candidates:
            raise DataError("cannot build mismatched pairs: all descriptions identical")
        wrong_pairs.append((pairs[i][0], pairs[int(rng.choice(candidates))][1]))
    valid_p = alignment_probabilities(model, vocab, pairs)
    wrong_p = alignment_probabilities(model, vocab, wrong_pairs)
    correct = (valid_p > 0.5).sum() + (wrong_p < 0.5).sum()
    return float(correct) / (2 * n)
