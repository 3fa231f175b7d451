"""Correlation and agreement statistics: Pearson r with two-tailed
p-values, sample- vs model-level aggregation, interval-metric
Krippendorff's alpha, and a deterministic k-fold cross-validation harness.

Also houses the human-ratings record type and its CSV reader.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import betainc

from .errors import ConfigError, DataError, FormatError, UndefinedCorrelation

logger = logging.getLogger(__name__)

MODEL_NAMES = ("HumanML3D", "MotionDiffuse", "text2motion", "TM2T", "MDM")
RATING_MIN, RATING_MAX = 0.0, 4.0


@dataclass(frozen=True)
class RatingRecord:
    """One row of the published ratings CSV, field order preserved."""

    restricted_index: int
    model_name: str
    original_index: int
    naturalness: float
    faithfulness: float
    prompt: str

    def rating(self, name: str) -> float:
        if name == "naturalness":
            return self.naturalness
        if name == "faithfulness":
            return self.faithfulness
        raise ConfigError(f"unknown rating {name!r}")


def load_ratings_csv(path: str | Path) -> list[RatingRecord]:
    """Parse the headerless ratings CSV.

    Columns: restricted index, model name, original index, mean
    naturalness, mean faithfulness, lowercase prompt. Prompts containing
    unquoted commas are re-joined from the trailing columns.
    """
    records = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 6:
                raise FormatError(f"{path}:{lineno}: expected 6 fields, got {len(row)}")
            try:
                restricted = int(row[0])
                original = int(row[2])
                naturalness = float(row[3])
                faithfulness = float(row[4])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            model = row[1].strip()
            if model not in MODEL_NAMES:
                raise FormatError(
                    f"{path}:{lineno}: unknown model name {model!r} (expected one of {MODEL_NAMES})"
                )
            for label, value in (("naturalness", naturalness), ("faithfulness", faithfulness)):
                if not (RATING_MIN <= value <= RATING_MAX):
                    raise FormatError(
                        f"{path}:{lineno}: {label} {value} outside the "
                        f"[{RATING_MIN:g}, {RATING_MAX:g}] Likert-mean bound"
                    )
            prompt = ",".join(row[5:]).strip().lower()
            records.append(RatingRecord(restricted, model, original, naturalness, faithfulness, prompt))
    if not records:
        raise DataError(f"{path}: no rating records found")
    return records


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Product-moment correlation with a two-tailed p-value.

    p comes from t = r*sqrt((n-2)/(1-r^2)) with n-2 degrees of freedom,
    evaluated through the regularized incomplete beta function.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n != y.size:
        raise DataError(f"series lengths differ: {n} vs {y.size}")
    if n < 3:
        raise DataError(f"pearson needs n >= 3, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt((dx * dx).sum()))
    sy = float(np.sqrt((dy * dy).sum()))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelation("correlation undefined: a series is constant")
    u = dx / sx
    v = dy / sy
    if np.array_equal(u, v):
        r = 1.0
    elif np.array_equal(u, -v):
        r = -1.0
    else:
        r = max(-1.0, min(1.0, float((u * v).sum())))
    df = n - 2
    if abs(r) == 1.0:
        return r, 0.0
    t2 = r * r * df / (1.0 - r * r)
    p = float(betainc(df / 2.0, 0.5, df / (df + t2)))
    return r, p


def paired_series(
    scores: Sequence[float],
    ratings: Sequence[float],
    model_names: Sequence[str],
    level: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Build the (metric, rating) series at sample or model level.

    Model level takes one point per model: the mean metric score paired
    with the mean rating, in sorted model-name order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    ratings = np.asarray(ratings, dtype=np.float64)
    if level == "sample":
        return scores, ratings
    if level != "model":
        raise ConfigError(f"unknown level {level!r}")
    xs, ys = [], []
    for name in sorted(set(model_names)):
        mask = np.array([m == name for m in model_names])
        if not mask.any():
            logger.warning("model %s has no samples; excluded from model level", name)
            continue
        xs.append(scores[mask].mean())
        ys.append(ratings[mask].mean())
    return np.array(xs), np.array(ys)


def aggregate(
    records: Sequence[RatingRecord],
    scores: Sequence[float],
    rating: str,
    level: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Pair metric scores with one rating series at the requested level."""
    if len(records) != len(scores):
        raise DataError(f"{len(scores)} scores for {len(records)} records")
    ratings = [rec.rating(rating) for rec in records]
    names = [rec.model_name for rec in records]
    return paired_series(scores, ratings, names, level)


@dataclass(frozen=True)
class CorrelationReport:
    level: str
    rating: str
    metric: str
    pearson_r: float
    p_value: float
    n: int


def krippendorff_alpha(ratings: np.ndarray, level: str = "interval") -> float:
    """Chance-corrected inter-annotator agreement, alpha = 1 - Do/De.

    `ratings` is raters x items with NaN marking missing entries. Only
    the interval metric (squared difference) is implemented; items need
    at least two ratings to be pairable.
    """
    if level != "interval":
        raise ConfigError(f"only the interval metric is implemented, got {level!r}")
    mat = np.asarray(ratings, dtype=np.float64)
    if mat.ndim != 2:
        raise DataError(f"ratings must be raters x items, got shape {mat.shape}")
    units = []
    for col in range(mat.shape[1]):
        vals = mat[:, col]
        vals = vals[~np.isnan(vals)]
        if vals.size >= 2:
            units.append(vals)
    if len(units) < 2:
        raise DataError("insufficient pairable values: need >= 2 items with >= 2 ratings")
    n = sum(u.size for u in units)
    # within-unit observed disagreement; sum over ordered pairs i != j of
    # (v_i - v_j)^2 equals 2*m*sum(v^2) - 2*(sum v)^2
    d_obs = 0.0
    for u in units:
        m = u.size
        pair_sum = 2.0 * m * float(u @ u) - 2.0 * float(u.sum()) ** 2
        d_obs += pair_sum / (m - 1)
    d_obs /= n
    pooled = np.concatenate(units)
    d_exp = 2.0 * n * float(pooled @ pooled) - 2.0 * float(pooled.sum()) ** 2
    d_exp /= n * (n - 1)
    if d_exp == 0.0:
        return 1.0
    return 1.0 - d_obs / d_exp


def fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle then contiguous split into k near-equal folds."""
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if k > n:
        raise ConfigError(f"k={k} folds but only {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    folds, start = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(perm[start:start + size])
        start += size
    return folds


def kfold_cv(
    features: np.ndarray,
    targets: np.ndarray,
    fit: Callable,
    predict: Callable,
    k: int = 10,
    seed: int = 0,
    keys: Sequence | None = None,
) -> np.ndarray:
    """Out-of-fold predictions: each sample is predicted exactly once by a
    model never fitted on it.

    When `keys` is given the partition is drawn over key-sorted order, so
    predictions are independent of the input ordering for a fixed seed.
    """
    features = np.asarray(features)
    targets = np.asarray(targets, dtype=np.float64)
    n = targets.size
    if features.shape[0] != n:
        raise DataError(f"{features.shape[0]} feature rows for {n} targets")
    order = np.arange(n)
    if keys is not None:
        if len(keys) != n:
            raise DataError(f"{len(keys)} keys for {n} samples")
        order = np.array(sorted(range(n), key=lambda i: keys[i]))
    preds = np.empty(n, dtype=np.float64)
    for fold in fold_indices(n, k, seed):
        test_idx = order[fold]
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        model = fit(features[train_mask], targets[train_mask])
        preds[test_idx] = np.asarray(predict(model, features[test_idx]), dtype=np.float64)
    return preds
