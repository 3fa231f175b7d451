"""Alignment-prediction losses: stable binary cross entropy per group,
the L2-balanced combination, and the similarity-weighted contrastive
variant.

The weighted contrastive mean divides its weights by their maximum
before averaging, so equal weights reduce bit-for-bit to the plain mean.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..errors import DataError, DegenerateBatchError


def bce_per_sample(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Numerically stable binary cross entropy, one value per sample."""
    return F.binary_cross_entropy_with_logits(logits, labels.to(logits.dtype), reduction="none")


def bce_group(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """H(q): mean BCE over one pairing group, computed from logits."""
    per_sample = bce_per_sample(logits, labels)
    return per_sample.sum() / per_sample.numel()


def balanced_loss(h_valid: torch.Tensor, h_contrastive: torch.Tensor) -> torch.Tensor:
    """L2-balanced loss: sqrt(H(V)^2 + H(R)^2)."""
    return torch.sqrt(h_valid * h_valid + h_contrastive * h_contrastive)


def weighted_contrastive_mean(per_sample: torch.Tensor, alpha: torch.Tensor) -> torch.Tensor:
    """Similarity-weighted mean of contrastive BCE terms.

    Weights are (1 - alpha_i), normalized by their sum; a sample with
    alpha_i = 1 contributes nothing. All alpha_i = 1 leaves zero total
    weight and is rejected.
    """
    alpha = alpha.to(per_sample.dtype)
    if torch.any(alpha < 0) or torch.any(alpha > 1):
        raise DataError("similarity scores must lie in [0, 1]")
    weights = 1.0 - alpha
    w_max = weights.max()
    if w_max.item() <= 0.0:
        raise DegenerateBatchError("all contrastive weights are zero (every alpha = 1)")
    scaled = weights / w_max
    return (scaled * per_sample).sum() / scaled.sum()


def weighted_loss(
    h_valid: torch.Tensor, contrastive_per_sample: torch.Tensor, alpha: torch.Tensor
) -> torch.Tensor:
    """Final loss: sqrt(H(V)^2 + Hw(R)^2) with the weighted contrastive mean."""
    h_w = weighted_contrastive_mean(contrastive_per_sample, alpha)
    return torch.sqrt(h_valid * h_valid + h_w * h_w)
