"""Report emission: delimited outputs with a provenance header line, and
matplotlib figures rendered next to them.

Outputs are byte-deterministic for a fixed config and seed: headers
carry the tool version, config hash, and seed but never timestamps.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import __version__  # noqa: E402

_PNG_METADATA = {"Software": f"t2meval {__version__}"}


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def provenance_line(cfg_hash: str, seed: int) -> str:
    return f"# t2meval {__version__} config={cfg_hash} seed={seed}"


def write_csv(
    path: str | Path,
    fieldnames: Sequence[str],
    rows: Sequence[dict],
    cfg_hash: str,
    seed: int,
) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(provenance_line(cfg_hash, seed) + "\n")
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format(v) for k, v in row.items()})


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def read_csv(path: str | Path) -> list[dict]:
    """Read back a report CSV, skipping provenance comment lines."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def write_json(path: str | Path, payload: dict, cfg_hash: str, seed: int) -> None:
    wrapped = {"tool": f"t2meval {__version__}", "config_hash": cfg_hash, "seed": seed}
    wrapped.update(payload)
    Path(path).write_text(json.dumps(wrapped, indent=2, sort_keys=True) + "\n")


def _save(fig, path: str | Path, cfg_hash: str | None = None, seed: int | None = None) -> None:
    metadata = dict(_PNG_METADATA)
    if cfg_hash is not None:
        metadata["Description"] = f"config={cfg_hash} seed={seed}"
    fig.savefig(path, dpi=120, metadata=metadata)
    plt.close(fig)


def plot_scale_curves(cells, path: str | Path, title: str,
                      cfg_hash: str | None = None, seed: int | None = None) -> None:
    """Correlation vs log2 root scale, one line per (rating, level)."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    series: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for cell in cells:
        if cell.pearson_r is None:
            continue
        key = (cell.rating, cell.level)
        series.setdefault(key, []).append((cell.params["exponent"], cell.pearson_r))
    for (rating, level), points in sorted(series.items()):
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points],
                marker=".", label=f"{rating} ({level} level)")
    ax.set_xlabel("log2 root scale")
    ax.set_ylabel("Pearson's r")
    ax.set_title(title)
    ax.axhline(0.0, color="grey", lw=0.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path, cfg_hash, seed)


def plot_correlation_bars(reports, path: str | Path, title: str = "Metric correlations",
                          cfg_hash: str | None = None, seed: int | None = None) -> None:
    """Grouped bars of r per metric with grey p-value bars behind them."""
    groups: dict[tuple[str, str], list] = {}
    for rep in reports:
        groups.setdefault((rep.level, rep.rating), []).append(rep)
    n = max(1, len(groups))
    fig, axes = plt.subplots(1, n, figsize=(4.0 * n, 3.6), squeeze=False)
    for ax, ((level, rating), reps) in zip(axes[0], sorted(groups.items())):
        reps = sorted(reps, key=lambda r: r.metric)
        xs = range(len(reps))
        ax.bar(xs, [r.p_value for r in reps], color="lightgrey", label="p-value")
        ax.bar(xs, [r.pearson_r for r in reps], width=0.5, color="tab:blue", label="r")
        ax.set_xticks(list(xs))
        ax.set_xticklabels([r.metric for r in reps], rotation=45, ha="right", fontsize=7)
        ax.set_title(f"{rating} / {level} level", fontsize=9)
        ax.axhline(0.0, color="black", lw=0.5)
    axes[0][0].set_ylabel("Pearson's r")
    axes[0][-1].legend(fontsize=7)
    fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path, cfg_hash, seed)


def plot_loss_history(history, path: str | Path,
                      cfg_hash: str | None = None, seed: int | None = None) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.6))
    epochs = range(len(history.loss))
    ax.plot(epochs, history.loss, label="training loss")
    ax.plot(epochs, history.h_valid, label="H(valid)", ls="--")
    ax.plot(epochs, history.h_contrastive, label="H(contrastive)", ls="--")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path, cfg_hash, seed)
