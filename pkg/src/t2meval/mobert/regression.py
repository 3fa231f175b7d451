"""Human-judgment regression over transformer output embeddings: feature
aggregation ([CLS; max over text outputs; max over motion outputs]), an
RBF epsilon-insensitive SVR solved by SMO, a closed-form standardized
ridge, and the scoring front end.
"""

from __future__ import annotations

import numpy as np
import torch

from ..errors import ConfigError, DataError, TrainingError
from ..motion import MotionFeatures, chunk
from .bpe import BpeVocab
from .model import MoBertModel, assemble_sequence, batch_forward, clip_text_ids

SVR_C = 3.68
SVR_EPSILON = 0.3
SVR_TOL = 1e-8
RIDGE_ALPHA = 0.12
SCORE_MODES = ("alignment", "svr", "ridge")


@torch.no_grad()
def extract_regression_features(
    model: MoBertModel, vocab: BpeVocab, features: MotionFeatures, text: str | None
) -> np.ndarray:
    """Concatenate [CLS output; per-dim max over text-token outputs;
    per-dim max over motion-chunk outputs] -> 3*d_model.

    Text-free scoring passes text=None and zeroes the text slice.
    """
    model.eval()
    cfg = model.config
    windows = chunk(features, cfg.chunk_len, cfg.chunk_overlap).chunks
    ids = [] if text is None else clip_text_ids(vocab.encode(text), windows.shape[0], cfg.max_context)
    chunk_embs = model.encode_motion_windows(torch.as_tensor(windows, dtype=model.dtype))
    assembled = assemble_sequence(model, ids, chunk_embs)
    out = batch_forward(model, [assembled])["outputs"][0]
    t0, t1 = assembled.text_span
    m0, m1 = assembled.motion_span
    cls_vec = out[0]
    if t1 > t0:
        text_vec = out[t0:t1].max(dim=0).values
    else:
        text_vec = torch.zeros_like(cls_vec)
    motion_vec = out[m0:m1].max(dim=0).values
    return torch.cat([cls_vec, text_vec, motion_vec]).cpu().numpy().astype(np.float64)


class _Standardizer:
    def __init__(self, x: np.ndarray):
        self.mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale[scale < 1e-12] = 1.0
        self.scale = scale

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale


def _rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * d2)


def _solve_epsilon_svr(
    kernel: np.ndarray,
    y: np.ndarray,
    c_bound: float,
    epsilon: float,
    tol: float,
    max_iter: int = 500_000,
) -> tuple[np.ndarray, float]:
    """SMO over the 2n-variable dual with maximal-violating-pair selection.

    Returns the coefficient vector beta = alpha - alpha* and the bias.
    """
    n = y.size
    sign = np.concatenate([np.ones(n), -np.ones(n)])
    z = np.zeros(2 * n)
    grad = np.concatenate([epsilon - y, epsilon + y])

    for _ in range(max_iter):
        at_upper = z >= c_bound - 1e-12 * c_bound
        at_lower = z <= 1e-12 * c_bound
        up = np.where(sign > 0, ~at_upper, ~at_lower)
        low = np.where(sign > 0, ~at_lower, ~at_upper)
        vals = -sign * grad
        if not up.any() or not low.any():
            break
        i = int(np.where(up, vals, -np.inf).argmax())
        j = int(np.where(low, vals, np.inf).argmin())
        m_up, m_low = vals[i], vals[j]
        if m_up - m_low <= tol:
            break
        ki, kj = i % n, j % n
        eta = kernel[ki, ki] + kernel[kj, kj] - 2.0 * sign[i] * sign[j] * kernel[ki, kj]
        step = (m_up - m_low) / eta if eta > 1e-12 else np.inf
        cap_i = (c_bound - z[i]) if sign[i] > 0 else z[i]
        cap_j = z[j] if sign[j] > 0 else (c_bound - z[j])
        step = min(step, cap_i, cap_j)
        if not step > 0:
            break
        z[i] += sign[i] * step
        z[j] -= sign[j] * step
        grad += sign * np.tile(kernel[ki], 2) * step
        grad -= sign * np.tile(kernel[kj], 2) * step
    else:
        raise TrainingError(f"SVR failed to reach tol={tol} within {max_iter} SMO steps")

    vals = -sign * grad
    at_upper = z >= c_bound - 1e-12 * c_bound
    at_lower = z <= 1e-12 * c_bound
    up = np.where(sign > 0, ~at_upper, ~at_lower)
    low = np.where(sign > 0, ~at_lower, ~at_upper)
    hi = np.where(up, vals, -np.inf).max()
    lo = np.where(low, vals, np.inf).min()
    bias = float((hi + lo) / 2.0)
    return z[:n] - z[n:], bias


class RegressionHead:
    """Fitted prediction head for human judgments (ridge or RBF SVR)."""

    def __init__(self, kind: str, params: dict):
        self.kind = kind
        self.params = params

    @classmethod
    def fit_ridge(cls, x: np.ndarray, y: np.ndarray, alpha: float = RIDGE_ALPHA) -> "RegressionHead":
        scaler = _Standardizer(x)
        z = scaler.transform(x)
        y_mean = float(y.mean())
        d = z.shape[1]
        weights = np.linalg.solve(z.T @ z + alpha * np.eye(d), z.T @ (y - y_mean))
        return cls("ridge", {
            "alpha": alpha, "mean": scaler.mean, "scale": scaler.scale,
            "weights": weights, "intercept": y_mean,
        })

    @classmethod
    def fit_svr(
        cls, x: np.ndarray, y: np.ndarray,
        c_bound: float = SVR_C, epsilon: float = SVR_EPSILON, tol: float = SVR_TOL,
    ) -> "RegressionHead":
        variance = float(x.var())
        gamma = 1.0 / (x.shape[1] * variance) if variance > 0 else 1.0
        kernel = _rbf_kernel(x, x, gamma)
        beta, bias = _solve_epsilon_svr(kernel, y, c_bound, epsilon, tol)
        support = np.abs(beta) > 1e-12
        return cls("svr", {
            "c": c_bound, "epsilon": epsilon, "gamma": gamma,
            "support_vectors": x[support].copy(), "dual_coef": beta[support].copy(),
            "intercept": bias,
        })

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        p = self.params
        if self.kind == "ridge":
            z = (x - p["mean"]) / p["scale"]
            return z @ p["weights"] + p["intercept"]
        if self.kind == "svr":
            if p["support_vectors"].size == 0:
                return np.full(x.shape[0], p["intercept"])
            k = _rbf_kernel(x, p["support_vectors"], p["gamma"])
            return k @ p["dual_coef"] + p["intercept"]
        raise ConfigError(f"unknown head kind {self.kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key, val in self.params.items():
            out[key] = val.tolist() if isinstance(val, np.ndarray) else val
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "RegressionHead":
        kind = payload["kind"]
        params = {}
        array_keys = {
            "ridge": ("mean", "scale", "weights"),
            "svr": ("support_vectors", "dual_coef"),
        }[kind]
        for key, val in payload.items():
            if key == "kind":
                continue
            params[key] = np.asarray(val, dtype=np.float64) if key in array_keys else val
        return cls(kind, params)


def fit_regression(features: np.ndarray, ratings: np.ndarray, kind: str) -> RegressionHead:
    """Fit a ridge or SVR head over extracted regression features."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(ratings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise DataError(f"features {x.shape} do not match {y.size} ratings")
    if y.size < 10:
        raise DataError(f"regression needs >= 10 samples, got {y.size}")
    if y.min() < 0.0 or y.max() > 4.0:
        raise DataError("ratings must lie on the 0-4 Likert mean scale")
    if kind == "ridge":
        return RegressionHead.fit_ridge(x, y)
    if kind == "svr":
        return RegressionHead.fit_svr(x, y)
    raise ConfigError(f"unknown regression kind {kind!r}")


def score(
    model: MoBertModel,
    vocab: BpeVocab,
    head: RegressionHead | None,
    features: MotionFeatures,
    text: str | None,
    mode: str = "alignment",
) -> float:
    """Evaluate one motion (optionally text-free) in the requested mode."""
    if mode not in SCORE_MODES:
        raise ConfigError(f"mode must be one of {SCORE_MODES}, got {mode!r}")
    if mode == "alignment":
        model.eval()
        cfg = model.config
        windows = chunk(features, cfg.chunk_len, cfg.chunk_overlap).chunks
        ids = [] if text is None else clip_text_ids(
            vocab.encode(text), windows.shape[0], cfg.max_context
        )
        with torch.no_grad():
            chunk_embs = model.encode_motion_windows(torch.as_tensor(windows, dtype=model.dtype))
            out = batch_forward(model, [assemble_sequence(model, ids, chunk_embs)])
        return float(out["probabilities"][0])
    if head is None:
        raise ConfigError(f"{mode} scoring requires a fitted regression head")
    if head.kind != mode:
        raise ConfigError(f"head kind {head.kind!r} does not match mode {mode!r}")
    vec = extract_regression_features(model, vocab, features, text)
    return float(head.predict(vec[None, :])[0])
