"""Coordinate-error metrics (AE / AVE) over joint positions and their
frame-difference derivatives, plus the root-scale and component-weight
grid searches that correlate each grid cell against human ratings.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import stats
from .errors import ConfigError, DataError
from .motion import MotionSequence

GROUPINGS = {
    "root": (0,),
    "joint": tuple(range(1, 22)),
    "pose": tuple(range(22)),
}
COMPONENTS = ("position", "velocity", "acceleration")
COMBINED = ("pv", "pva")

ROOT_SCALE_EXPONENTS = tuple(range(-15, 15))  # 2^-15 .. 2^14, 30 points
COMPONENT_EXPONENTS = tuple(range(0, 10))     # 2^0 .. 2^9, 10 points per component

RATINGS = ("naturalness", "faithfulness")
LEVELS = ("sample", "model")


@dataclass(frozen=True)
class CeConfig:
    """One fully specified coordinate-error metric."""

    kind: str = "ae"                 # ae | ave
    component: str = "position"      # position | velocity | acceleration | pv | pva
    grouping: str = "pose"           # root | joint | pose
    root_scale: float = 1.0
    component_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("ae", "ave"):
            raise ConfigError(f"unknown CE kind {self.kind!r}")
        if self.component not in COMPONENTS + COMBINED:
            raise ConfigError(f"unknown CE component {self.component!r}")
        if self.grouping not in GROUPINGS:
            raise ConfigError(f"unknown joint grouping {self.grouping!r}")
        if not self.root_scale > 0:
            raise ConfigError(f"root_scale must be positive, got {self.root_scale}")
        if len(self.component_weights) != 3 or any(w <= 0 for w in self.component_weights):
            raise ConfigError(f"component weights must be 3 positive factors, got {self.component_weights}")

    @property
    def name(self) -> str:
        return f"{self.kind}_{self.grouping}_{self.component}"


def _clipped_positions(ref: MotionSequence, gen: MotionSequence, scale: float):
    """Clip both motions to the shorter length and apply root scaling.

    Root scaling multiplies the root-translation contribution to every
    joint's global position by the factor before errors are computed.
    """
    if ref.positions.shape[1] != gen.positions.shape[1]:
        raise DataError("joint counts differ between reference and generated motions")
    t = min(ref.frames, gen.frames)
    a = np.asarray(ref.positions[:t], dtype=np.float64)
    b = np.asarray(gen.positions[:t], dtype=np.float64)
    if scale != 1.0:
        a = a + (scale - 1.0) * a[:, :1, :]
        b = b + (scale - 1.0) * b[:, :1, :]
    return a, b


def _component_signal(positions: np.ndarray, component: str) -> np.ndarray:
    if component == "position":
        sig = positions
    elif component == "velocity":
        sig = np.diff(positions, axis=0)
    elif component == "acceleration":
        sig = np.diff(positions, n=2, axis=0)
    else:
        raise ConfigError(f"{component!r} is not a single component")
    return sig


def average_error(ref: MotionSequence, gen: MotionSequence, cfg: CeConfig) -> float:
    """Mean per-frame, per-joint L2 error on the selected component signal."""
    a, b = _clipped_positions(ref, gen, cfg.root_scale)
    sa = _component_signal(a, cfg.component)
    sb = _component_signal(b, cfg.component)
    if sa.shape[0] < 1:
        raise DataError(f"too few frames for {cfg.component} error (clipped length {a.shape[0]})")
    joints = list(GROUPINGS[cfg.grouping])
    err = np.linalg.norm(sa[:, joints, :] - sb[:, joints, :], axis=2)
    return float(err.mean())


def average_variance_error(ref: MotionSequence, gen: MotionSequence, cfg: CeConfig) -> float:
    """Mean L2 distance between per-joint temporal variances (per axis,
    sample variance with the T-1 denominator)."""
    a, b = _clipped_positions(ref, gen, cfg.root_scale)
    sa = _component_signal(a, cfg.component)
    sb = _component_signal(b, cfg.component)
    if sa.shape[0] < 2:
        raise DataError(f"variance of {cfg.component} needs >= 2 frames, got {sa.shape[0]}")
    joints = list(GROUPINGS[cfg.grouping])
    var_a = sa[:, joints, :].var(axis=0, ddof=1)
    var_b = sb[:, joints, :].var(axis=0, ddof=1)
    return float(np.linalg.norm(var_a - var_b, axis=1).mean())


def combined_ce(ref: MotionSequence, gen: MotionSequence, cfg: CeConfig) -> float:
    """Weighted sum of single-component CE scores (PV or PVA)."""
    if cfg.component not in COMBINED:
        raise ConfigError(f"combined_ce requires pv or pva, got {cfg.component!r}")
    w_p, w_v, w_a = cfg.component_weights
    if cfg.component == "pv" and w_a != 1.0:
        raise ConfigError("pv metric takes no acceleration weight; leave w_a at its default")
    single = average_error if cfg.kind == "ae" else average_variance_error
    score = w_p * single(ref, gen, replace(cfg, component="position"))
    score += w_v * single(ref, gen, replace(cfg, component="velocity"))
    if cfg.component == "pva":
        score += w_a * single(ref, gen, replace(cfg, component="acceleration"))
    return float(score)


def ce_score(ref: MotionSequence, gen: MotionSequence, cfg: CeConfig) -> float:
    """Dispatch to the single-component or combined metric."""
    if cfg.component in COMBINED:
        return combined_ce(ref, gen, cfg)
    if cfg.kind == "ae":
        return average_error(ref, gen, cfg)
    return average_variance_error(ref, gen, cfg)


@dataclass(frozen=True)
class RatedPair:
    """One human-judged sample: reference motion, generated motion, ratings."""

    ref: MotionSequence
    gen: MotionSequence
    model_name: str
    naturalness: float
    faithfulness: float

    def rating(self, name: str) -> float:
        if name == "naturalness":
            return self.naturalness
        if name == "faithfulness":
            return self.faithfulness
        raise ConfigError(f"unknown rating {name!r}")


@dataclass(frozen=True)
class GridCell:
    """Correlation of one metric configuration against one rating series."""

    params: dict
    rating: str
    level: str
    pearson_r: float | None
    p_value: float | None
    n: int


@dataclass(frozen=True)
class SearchResult:
    cells: tuple[GridCell, ...]
    best: dict = field(default_factory=dict)  # (rating, level) -> params or None
    scores: dict = field(default_factory=dict)  # params key -> per-pair scores


def _params_key(params: dict) -> tuple:
    return tuple(sorted(params.items()))


def _correlate_cells(
    dataset: Sequence[RatedPair], params: dict, scores: np.ndarray
) -> list[GridCell]:
    cells = []
    names = [p.model_name for p in dataset]
    for rating in RATINGS:
        ratings = np.array([p.rating(rating) for p in dataset])
        for level in LEVELS:
            x, y = stats.paired_series(scores, ratings, names, level)
            try:
                r, p = stats.pearson(x, y)
            except (stats.UndefinedCorrelation, DataError):
                r, p = None, None
            cells.append(GridCell(params=params, rating=rating, level=level,
                                  pearson_r=r, p_value=p, n=len(x)))
    return cells


def _pick_best(cells: Sequence[GridCell]) -> dict:
    """Argmax-|r| cell per (rating, level); ties keep the earlier grid point."""
    best: dict = {}
    for cell in cells:
        key = (cell.rating, cell.level)
        if cell.pearson_r is None:
            best.setdefault(key, None)
            continue
        cur = best.get(key)
        if cur is None or abs(cell.pearson_r) > abs(cur.pearson_r):
            best[key] = cell
    return best


def root_scaling_search(
    dataset: Sequence[RatedPair],
    cfg: CeConfig,
    exponents: Sequence[int] = ROOT_SCALE_EXPONENTS,
) -> SearchResult:
    """Evaluate the metric across the root-scale grid and correlate each
    point with human ratings at sample and model level.

    Grid points with zero score variance get an undefined correlation and
    are excluded from the argmax.
    """
    if len(dataset) < 3:
        raise DataError(f"root scaling search needs >= 3 rated samples, got {len(dataset)}")
    cells: list[GridCell] = []
    scores_by_key: dict = {}
    for e in exponents:
        scale = 2.0 ** e
        cfg_e = replace(cfg, root_scale=scale)
        scores = np.array([ce_score(p.ref, p.gen, cfg_e) for p in dataset])
        params = {"exponent": e, "root_scale": scale}
        scores_by_key[_params_key(params)] = scores
        cells.extend(_correlate_cells(dataset, params, scores))
    return SearchResult(cells=tuple(cells), best=_pick_best(cells), scores=scores_by_key)


def component_scaling_search(
    dataset: Sequence[RatedPair],
    cfg: CeConfig,
    exponents: Sequence[int] = COMPONENT_EXPONENTS,
) -> SearchResult:
    """Full Cartesian grid over component weights (10 points per component:
    100 cells for PV, 1000 for PVA)."""
    if cfg.component not in COMBINED:
        raise ConfigError(f"component search requires pv or pva, got {cfg.component!r}")
    if len(dataset) < 3:
        raise DataError(f"component scaling search needs >= 3 rated samples, got {len(dataset)}")
    single = average_error if cfg.kind == "ae" else average_variance_error
    parts = ["position", "velocity"] + (["acceleration"] if cfg.component == "pva" else [])
    base = {
        part: np.array([single(p.ref, p.gen, replace(cfg, component=part)) for p in dataset])
        for part in parts
    }
    n_axes = len(parts)
    cells: list[GridCell] = []
    scores_by_key: dict = {}
    for combo in itertools.product(exponents, repeat=n_axes):
        weights = [2.0 ** e for e in combo]
        scores = np.zeros(len(dataset))
        for part, w in zip(parts, weights):
            scores = scores + w * base[part]
        if cfg.component == "pv":
            params = {"w_p": weights[0], "w_v": weights[1]}
        else:
            params = {"w_p": weights[0], "w_v": weights[1], "w_a": weights[2]}
        scores_by_key[_params_key(params)] = scores
        cells.extend(_correlate_cells(dataset, params, scores))
    return SearchResult(cells=tuple(cells), best=_pick_best(cells), scores=scores_by_key)
