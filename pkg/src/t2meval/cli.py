"""Command-line front end: ingestion, metric evaluation, correlation
reports, MoBERT training/regression/scoring. Every run is seeded, writes
a manifest echoing its resolved configuration, and emits byte-identical
reports for identical config + seed.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, ce, embed, reporting, stats, synthetic
from .errors import (
    ConfigError,
    DataError,
    FormatError,
    NumericalError,
    T2mEvalError,
    TrainingError,
    UndefinedCorrelation,
)
from .mobert import bpe, regression, training
from .mobert.model import MoBertConfig, MoBertModel, load_checkpoint, save_checkpoint
from .motion import extract_features, load_npy
from .stats import RatingRecord

logger = logging.getLogger("t2meval")

DEFAULT_CONFIG = {
    "seed": 0,
    "paths": {
        "ratings_csv": None,
        "motions_dir": None,
        "embeddings": None,
        "checkpoint": None,
        "head": None,
        "output_dir": "out",
    },
    "metrics": ["ae_pose_position", "ave_root_position"],
    "allowance": [1, 2, 3],
    "ce": {"root_scale": 1.0, "component_weights": [1.0, 1.0, 1.0]},
    "search": {"kind": "ae", "grouping": "pose", "component_metric": "pva"},
    "mobert": {},
    "train": {
        "epochs": 20,
        "batch_size": 32,
        "lr": 1e-4,
        "loss": "weighted",
        "vocab_size": 2000,
        "synthetic": False,
        "synthetic_n": 128,
        "pairs_file": None,
    },
    "regression": {"kind": "svr", "rating": "faithfulness", "folds": 10, "text_free": False},
}


def motion_filename(model_name: str, sample_index: int) -> str:
    return f"AMASS_motion_{model_name}_{sample_index}.npy"


def _deep_update(base: dict, overrides: dict) -> dict:
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        _deep_update(cfg, loaded)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    for flag, path_key in (
        ("ratings", "ratings_csv"), ("motions", "motions_dir"),
        ("embeddings", "embeddings"), ("checkpoint", "checkpoint"), ("head", "head"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            cfg["paths"][path_key] = value
    if getattr(args, "out", None):
        cfg["paths"]["output_dir"] = args.out
    if getattr(args, "metrics", None):
        cfg["metrics"] = [m.strip() for m in args.metrics.split(",") if m.strip()]
    if getattr(args, "allowance", None):
        cfg["allowance"] = [int(a) for a in args.allowance]
    if getattr(args, "mode", None):
        cfg["mobert"]["mode"] = args.mode
        cfg["regression"]["kind"] = args.mode
    if getattr(args, "text_free", False):
        cfg["mobert"]["text_free"] = True
        cfg["regression"]["text_free"] = True
    if getattr(args, "synthetic", False):
        cfg["train"]["synthetic"] = True
    return cfg


def _prepare_out(cfg: dict) -> tuple[Path, str]:
    out_dir = Path(cfg["paths"]["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    # the output location determines where reports land, not what they
    # contain; keep it out of the hash and manifest so identical runs in
    # different directories stay byte-identical
    echoed = copy.deepcopy(cfg)
    echoed["paths"]["output_dir"] = None
    cfg_hash = reporting.config_hash(echoed)
    manifest = {"tool": f"t2meval {__version__}", "config_hash": cfg_hash, "config": echoed}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out_dir, cfg_hash


def ingest_dataset(ratings_csv: str, motions_dir: str) -> dict:
    """Parse ratings and resolve each record's motion file."""
    records = stats.load_ratings_csv(ratings_csv)
    motions = Path(motions_dir)
    counts: dict[str, int] = {}
    missing: list[str] = []
    for rec in records:
        counts[rec.model_name] = counts.get(rec.model_name, 0) + 1
        fname = motion_filename(rec.model_name, rec.original_index)
        if not (motions / fname).exists():
            missing.append(fname)
    return {"records": records, "counts": counts, "missing": missing}


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    paths = cfg["paths"]
    if not paths["ratings_csv"] or not paths["motions_dir"]:
        raise ConfigError("ingest needs --ratings and --motions (or config paths)")
    summary = ingest_dataset(paths["ratings_csv"], paths["motions_dir"])
    records = summary["records"]
    print(f"ingested {len(records)} rating records")
    for model in sorted(summary["counts"]):
        print(f"  {model}: {summary['counts'][model]} samples")
    if summary["missing"]:
        print(f"missing motion files ({len(summary['missing'])}), excluded from metric runs:")
        for name in summary["missing"]:
            print(f"  {name}")
    else:
        print("all motion files resolved")
    if args.out:
        out_dir, cfg_hash = _prepare_out(cfg)
        reporting.write_json(
            out_dir / "ingest_summary.json",
            {"n_records": len(records), "counts": summary["counts"], "missing": summary["missing"]},
            cfg_hash, cfg["seed"],
        )
    return 0


def _parse_ce_metric(name: str, ce_cfg: dict) -> ce.CeConfig | None:
    parts = name.split("_")
    if len(parts) != 3 or parts[0] not in ("ae", "ave"):
        return None
    kind, grouping, component = parts
    if grouping not in ce.GROUPINGS or component not in ce.COMPONENTS + ce.COMBINED:
        return None
    return ce.CeConfig(
        kind=kind, component=component, grouping=grouping,
        root_scale=float(ce_cfg.get("root_scale", 1.0)),
        component_weights=tuple(float(w) for w in ce_cfg.get("component_weights", (1, 1, 1))),
    )


def _load_motion_pairs(records, motions_dir: Path):
    """Per record: (reference, generated) motions, ref matched through the
    HumanML3D row sharing the restricted index. Unresolvable records are
    dropped with a warning."""
    ref_by_restricted = {
        rec.restricted_index: rec for rec in records if rec.model_name == "HumanML3D"
    }
    pairs, kept = [], []
    for rec in records:
        ref_rec = ref_by_restricted.get(rec.restricted_index)
        if ref_rec is None:
            logger.warning("no HumanML3D reference for restricted index %d; skipped",
                           rec.restricted_index)
            continue
        gen_path = motions_dir / motion_filename(rec.model_name, rec.original_index)
        ref_path = motions_dir / motion_filename("HumanML3D", ref_rec.original_index)
        if not gen_path.exists() or not ref_path.exists():
            logger.warning("missing motion for %s[%d]; skipped", rec.model_name, rec.restricted_index)
            continue
        pairs.append((load_npy(ref_path), load_npy(gen_path)))
        kept.append(rec)
    return kept, pairs


def _record_row(rec: RatingRecord, metric: str, level: str, score: float) -> dict:
    return {
        "model_name": rec.model_name,
        "restricted_index": rec.restricted_index,
        "original_index": rec.original_index,
        "metric": metric,
        "level": level,
        "score": score,
    }


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    paths = cfg["paths"]
    if not paths["ratings_csv"] or not paths["motions_dir"]:
        raise ConfigError("eval needs ratings and motions paths")
    out_dir, cfg_hash = _prepare_out(cfg)
    seed = cfg["seed"]
    summary = ingest_dataset(paths["ratings_csv"], paths["motions_dir"])
    records = summary["records"]
    motions_dir = Path(paths["motions_dir"])

    rows: list[dict] = []
    metric_names = []
    for name in cfg["metrics"]:
        if name == "rprecision":  # expand over the configured allowances
            metric_names.extend(f"rprecision@{k}" for k in cfg["allowance"])
        else:
            metric_names.append(name)
    ce_metrics = {}
    needs_pairs = args.root_scale_search or args.component_search
    for name in metric_names:
        if name == "fid@sample":
            raise ConfigError(
                "FID needs distributional statistics over many samples and is "
                "reported at model level only; request 'fid' instead"
            )
        parsed = _parse_ce_metric(name, cfg["ce"])
        if parsed is not None:
            ce_metrics[name] = parsed
            needs_pairs = True

    kept, pairs = (records, []) if not needs_pairs else _load_motion_pairs(records, motions_dir)

    for name, metric_cfg in ce_metrics.items():
        for rec, (ref, gen) in zip(kept, pairs):
            rows.append(_record_row(rec, name, "sample", ce.ce_score(ref, gen, metric_cfg)))

    embed_names = [n for n in metric_names if n == "mmdist" or n.startswith("rprecision@") or n == "fid"]
    if embed_names:
        if not paths["embeddings"]:
            raise ConfigError(f"metrics {embed_names} need --embeddings (precomputed co-embeddings)")
        emb_dir = Path(paths["embeddings"])
        motion_embs = embed.load_embeddings(emb_dir / "motions.f32")
        text_embs = embed.load_embeddings(emb_dir / "texts.f32")
        if motion_embs.shape[0] != len(records):
            raise DataError(
                f"{motion_embs.shape[0]} motion embeddings for {len(records)} rating records"
            )
        for name in embed_names:
            if name == "mmdist":
                dists = np.linalg.norm(motion_embs - text_embs, axis=1)
                rows.extend(_record_row(r, name, "sample", float(d)) for r, d in zip(records, dists))
            elif name.startswith("rprecision@"):
                k = int(name.split("@", 1)[1])
                hits = embed.r_precision_per_sample(motion_embs, text_embs, k, seed=seed)
                rows.extend(_record_row(r, name, "sample", float(h)) for r, h in zip(records, hits))
            elif name == "fid":
                ref_mask = np.array([r.model_name == "HumanML3D" for r in records])
                if not ref_mask.any():
                    raise DataError("FID needs HumanML3D reference rows in the ratings CSV")
                ref_stats = embed.gaussian_stats(motion_embs[ref_mask])
                for model in sorted({r.model_name for r in records}):
                    mask = np.array([r.model_name == model for r in records])
                    value = embed.fid(ref_stats, embed.gaussian_stats(motion_embs[mask]))
                    rows.append({
                        "model_name": model, "restricted_index": "", "original_index": "",
                        "metric": "fid", "level": "model", "score": value,
                    })

    mobert_names = [n for n in metric_names if n.startswith("mobert_")]
    if mobert_names:
        if not paths["checkpoint"]:
            raise ConfigError(f"metrics {mobert_names} need --checkpoint")
        model, vocab = load_checkpoint(paths["checkpoint"])
        if vocab is None:
            raise ConfigError("checkpoint does not embed a vocabulary")
        head = None
        if paths["head"]:
            head = regression.RegressionHead.from_dict(json.loads(Path(paths["head"]).read_text()))
        text_free = bool(cfg["mobert"].get("text_free", False))
        for name in mobert_names:
            mode = name.split("_", 1)[1]
            for rec in records:
                path = motions_dir / motion_filename(rec.model_name, rec.original_index)
                if not path.exists():
                    continue
                feats = extract_features(load_npy(path))
                text = None if text_free else rec.prompt
                value = regression.score(model, vocab, head, feats, text, mode=mode)
                rows.append(_record_row(rec, name, "sample", value))

    fields = ["model_name", "restricted_index", "original_index", "metric", "level", "score"]
    reporting.write_csv(out_dir / "scores.csv", fields, rows, cfg_hash, seed)
    print(f"wrote {len(rows)} score rows to {out_dir / 'scores.csv'}")

    if args.root_scale_search or args.component_search:
        rated = [
            ce.RatedPair(ref=ref, gen=gen, model_name=rec.model_name,
                         naturalness=rec.naturalness, faithfulness=rec.faithfulness)
            for rec, (ref, gen) in zip(kept, pairs)
        ]
        search_cfg = cfg["search"]
        if args.root_scale_search:
            base = ce.CeConfig(kind=search_cfg["kind"], grouping=search_cfg["grouping"])
            result = ce.root_scaling_search(rated, base)
            _write_search(result, out_dir / "root_scale_search.csv", cfg_hash, seed,
                          ("root_scale",))
            reporting.plot_scale_curves(
                result.cells, out_dir / "root_scale_search.png",
                f"root scaling of {base.kind} {base.grouping}", cfg_hash, seed)
            print(f"root-scale search: {len(result.cells)} cells -> root_scale_search.csv")
        if args.component_search:
            base = ce.CeConfig(kind=search_cfg["kind"], grouping=search_cfg["grouping"],
                               component=search_cfg["component_metric"])
            result = ce.component_scaling_search(rated, base)
            _write_search(result, out_dir / "component_search.csv", cfg_hash, seed,
                          ("w_p", "w_v", "w_a"))
            print(f"component search: {len(result.cells)} cells -> component_search.csv")
    return 0


def _write_search(result: ce.SearchResult, path: Path, cfg_hash: str, seed: int,
                  param_fields: tuple[str, ...]) -> None:
    rows = []
    for cell in result.cells:
        row = {f: cell.params.get(f) for f in param_fields}
        row.update({"rating": cell.rating, "level": cell.level,
                    "pearson_r": cell.pearson_r, "p_value": cell.p_value})
        rows.append(row)
    reporting.write_csv(path, list(param_fields) + ["rating", "level", "pearson_r", "p_value"],
                        rows, cfg_hash, seed)


def cmd_correlate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    if not cfg["paths"]["ratings_csv"]:
        raise ConfigError("correlate needs the ratings CSV")
    out_dir, cfg_hash = _prepare_out(cfg)
    records = stats.load_ratings_csv(cfg["paths"]["ratings_csv"])
    by_key = {(r.model_name, r.restricted_index): r for r in records}
    score_rows = reporting.read_csv(args.scores)

    sample_scores: dict[str, dict] = {}
    model_scores: dict[str, dict[str, float]] = {}
    for row in score_rows:
        metric = row["metric"]
        if row["level"] == "model":
            model_scores.setdefault(metric, {})[row["model_name"]] = float(row["score"])
            continue
        key = (row["model_name"], int(row["restricted_index"]))
        rec = by_key.get(key)
        if rec is None:
            logger.warning("score row %s has no matching rating record; excluded", key)
            continue
        sample_scores.setdefault(metric, {})[key] = (rec, float(row["score"]))

    reports: list[stats.CorrelationReport] = []
    for metric in sorted(sample_scores):
        entries = list(sample_scores[metric].values())
        recs = [e[0] for e in entries]
        values = [e[1] for e in entries]
        for rating in ("faithfulness", "naturalness"):
            for level in ("sample", "model"):
                x, y = stats.aggregate(recs, values, rating, level)
                try:
                    r, p = stats.pearson(x, y)
                except (UndefinedCorrelation, DataError) as exc:
                    logger.warning("%s/%s/%s: %s", metric, rating, level, exc)
                    continue
                reports.append(stats.CorrelationReport(level, rating, metric, r, p, len(x)))
    for metric in sorted(model_scores):
        per_model = model_scores[metric]
        models = sorted(per_model)
        values = [per_model[m] for m in models]
        for rating in ("faithfulness", "naturalness"):
            means = []
            for m in models:
                rated = [r.rating(rating) for r in records if r.model_name == m]
                if not rated:
                    logger.warning("model %s has scores but no ratings; excluded", m)
                    continue
                means.append(float(np.mean(rated)))
            try:
                r, p = stats.pearson(values, means)
            except (UndefinedCorrelation, DataError) as exc:
                logger.warning("%s/%s/model: %s", metric, rating, exc)
                continue
            reports.append(stats.CorrelationReport("model", rating, metric, r, p, len(means)))

    fields = ["metric", "rating", "level", "pearson_r", "p_value", "n"]
    rows = [
        {"metric": rep.metric, "rating": rep.rating, "level": rep.level,
         "pearson_r": rep.pearson_r, "p_value": rep.p_value, "n": rep.n}
        for rep in reports
    ]
    reporting.write_csv(out_dir / "correlations.csv", fields, rows, cfg_hash, cfg["seed"])

    # 4-column table: one row per metric, model/sample x faithfulness/naturalness
    table_fields = ["metric", "model_faithfulness", "model_naturalness",
                    "sample_faithfulness", "sample_naturalness"]
    by_metric: dict[str, dict] = {}
    for rep in reports:
        by_metric.setdefault(rep.metric, {})[f"{rep.level}_{rep.rating}"] = rep.pearson_r
    table_rows = [dict({"metric": m}, **by_metric[m]) for m in sorted(by_metric)]
    reporting.write_csv(out_dir / "correlation_table.csv", table_fields, table_rows,
                        cfg_hash, cfg["seed"])
    reporting.write_json(
        out_dir / "correlations.json",
        {"correlations": [asdict(rep) for rep in reports]},
        cfg_hash, cfg["seed"],
    )
    reporting.plot_correlation_bars(reports, out_dir / "correlation_bars.png",
                                    cfg_hash=cfg_hash, seed=cfg["seed"])
    for rep in reports:
        print(f"{rep.metric:32s} {rep.rating:12s} {rep.level:6s} "
              f"r={rep.pearson_r:+.3f} p={rep.p_value:.4f} n={rep.n}")
    return 0


def _mobert_config(cfg: dict) -> MoBertConfig:
    overrides = {k: v for k, v in cfg.get("mobert", {}).items()
                 if k not in ("mode", "text_free")}
    for key in ("chunk_mlp_dims", "head_dims"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    return MoBertConfig(**overrides)


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out_dir, cfg_hash = _prepare_out(cfg)
    train_cfg = cfg["train"]
    seed = cfg["seed"]
    if train_cfg["synthetic"]:
        corpus_dir = out_dir / "synthetic_corpus"
        pairs_file = synthetic.write_corpus(corpus_dir, n=train_cfg["synthetic_n"], seed=seed)
        corpus = training.load_corpus(corpus_dir, pairs_file)
    else:
        if not cfg["paths"]["motions_dir"] or not train_cfg["pairs_file"]:
            raise ConfigError("train needs motions_dir and train.pairs_file (or --synthetic)")
        corpus = training.load_corpus(cfg["paths"]["motions_dir"], train_cfg["pairs_file"])

    vocab = bpe.train_bpe([text for _, text in corpus], target_size=train_cfg["vocab_size"])
    model = MoBertModel(_mobert_config(cfg))
    trainer = training.TrainerConfig(
        epochs=train_cfg["epochs"], batch_size=train_cfg["batch_size"],
        lr=train_cfg["lr"], seed=seed, loss=train_cfg["loss"],
    )
    history = training.train(model, vocab, corpus, training.BagOfWordsSimilarity(), trainer)

    ckpt_path = out_dir / "checkpoint.mbrt"
    save_checkpoint(model, ckpt_path, vocab=vocab)
    vocab.save(out_dir / "vocab.json")
    rows = [
        {"epoch": i, "h_valid": hv, "h_contrastive": hr, "l2": l2, "loss": ls}
        for i, (hv, hr, l2, ls) in enumerate(
            zip(history.h_valid, history.h_contrastive, history.l2, history.loss))
    ]
    reporting.write_csv(out_dir / "loss_history.csv",
                        ["epoch", "h_valid", "h_contrastive", "l2", "loss"],
                        rows, cfg_hash, seed)
    reporting.plot_loss_history(history, out_dir / "loss_history.png", cfg_hash, seed)
    accuracy = training.alignment_accuracy(model, vocab, corpus, seed=seed)
    print(f"trained {trainer.epochs} epochs; final loss {history.loss[-1]:.4f}; "
          f"training-corpus alignment accuracy {accuracy:.3f}")
    print(f"checkpoint: {ckpt_path}")
    return 0


def cmd_fit_regression(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    paths = cfg["paths"]
    reg_cfg = cfg["regression"]
    if not paths["checkpoint"] or not paths["ratings_csv"] or not paths["motions_dir"]:
        raise ConfigError("fit-regression needs checkpoint, ratings and motions paths")
    out_dir, cfg_hash = _prepare_out(cfg)
    seed = cfg["seed"]
    model, vocab = load_checkpoint(paths["checkpoint"])
    if vocab is None:
        raise ConfigError("checkpoint does not embed a vocabulary")
    summary = ingest_dataset(paths["ratings_csv"], paths["motions_dir"])
    motions_dir = Path(paths["motions_dir"])
    text_free = bool(reg_cfg.get("text_free", False))

    records, feats = [], []
    for rec in summary["records"]:
        path = motions_dir / motion_filename(rec.model_name, rec.original_index)
        if not path.exists():
            continue
        f = extract_features(load_npy(path))
        text = None if text_free else rec.prompt
        feats.append(regression.extract_regression_features(model, vocab, f, text))
        records.append(rec)
    if not records:
        raise DataError("no records with resolvable motions to fit on")
    x = np.stack(feats)
    rating = reg_cfg["rating"]
    y = np.array([rec.rating(rating) for rec in records])
    kind = reg_cfg["kind"]
    keys = [(rec.model_name, rec.restricted_index) for rec in records]
    preds = stats.kfold_cv(
        x, y,
        fit=lambda xt, yt: regression.fit_regression(xt, yt, kind),
        predict=lambda head, xt: head.predict(xt),
        k=reg_cfg["folds"], seed=seed, keys=keys,
    )
    r, p = stats.pearson(preds, y)
    head = regression.fit_regression(x, y, kind)
    (out_dir / "head.json").write_text(json.dumps(head.to_dict(), sort_keys=True) + "\n")
    rows = [
        {"model_name": rec.model_name, "restricted_index": rec.restricted_index,
         "prediction": float(pred), "rating": float(target)}
        for rec, pred, target in zip(records, preds, y)
    ]
    reporting.write_csv(out_dir / "oof_predictions.csv",
                        ["model_name", "restricted_index", "prediction", "rating"],
                        rows, cfg_hash, seed)
    reporting.write_json(out_dir / "regression_report.json",
                         {"kind": kind, "rating": rating, "folds": reg_cfg["folds"],
                          "pearson_r": r, "p_value": p, "n": len(records)},
                         cfg_hash, seed)
    print(f"{kind} head, {reg_cfg['folds']}-fold out-of-fold r={r:+.3f} (p={p:.4f}, n={len(records)})")
    print(f"head written to {out_dir / 'head.json'}")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    paths = cfg["paths"]
    if not paths["checkpoint"]:
        raise ConfigError("score needs --checkpoint")
    model, vocab = load_checkpoint(paths["checkpoint"])
    if vocab is None:
        raise ConfigError("checkpoint does not embed a vocabulary")
    mode = cfg["mobert"].get("mode", "alignment")
    head = None
    if paths["head"]:
        head = regression.RegressionHead.from_dict(json.loads(Path(paths["head"]).read_text()))
    text_free = bool(cfg["mobert"].get("text_free", False))
    if not text_free and args.text is None:
        raise ConfigError("score needs --text unless --text-free is set")
    features = extract_features(load_npy(args.motion))
    value = regression.score(model, vocab, head, features,
                             None if text_free else args.text, mode=mode)
    print(f"{mode} score: {value:.6f}")
    if args.out:
        out_dir, cfg_hash = _prepare_out(cfg)
        reporting.write_json(out_dir / "score.json",
                             {"mode": mode, "text_free": text_free, "motion": str(args.motion),
                              "score": value},
                             cfg_hash, cfg["seed"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="t2meval",
        description="Text-to-motion evaluation metrics and human-judgment correlation",
    )
    parser.add_argument("--version", action="version", version=f"t2meval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--out", help="output directory")

    p_ingest = sub.add_parser("ingest", help="validate ratings CSV and motion files")
    common(p_ingest)
    p_ingest.add_argument("--ratings", help="ratings_and_captions.csv path")
    p_ingest.add_argument("--motions", help="directory of AMASS npy motions")
    p_ingest.set_defaults(func=cmd_ingest)

    p_eval = sub.add_parser("eval", help="compute per-sample metric scores")
    common(p_eval)
    p_eval.add_argument("--ratings")
    p_eval.add_argument("--motions")
    p_eval.add_argument("--embeddings", help="directory with precomputed co-embeddings")
    p_eval.add_argument("--checkpoint", help="MoBERT checkpoint for mobert_* metrics")
    p_eval.add_argument("--head", help="regression head JSON for mobert_svr/mobert_ridge")
    p_eval.add_argument("--metrics", help="comma-separated metric names")
    p_eval.add_argument("--allowance", type=int, nargs="+", help="retrieval allowances")
    p_eval.add_argument("--root-scale-search", action="store_true")
    p_eval.add_argument("--component-search", action="store_true")
    p_eval.add_argument("--text-free", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_corr = sub.add_parser("correlate", help="correlate metric scores with ratings")
    common(p_corr)
    p_corr.add_argument("--scores", required=True, help="scores.csv from eval")
    p_corr.add_argument("--ratings")
    p_corr.set_defaults(func=cmd_correlate)

    p_train = sub.add_parser("train", help="train the MoBERT evaluator")
    common(p_train)
    p_train.add_argument("--motions")
    p_train.add_argument("--synthetic", action="store_true",
                         help="train on the bundled synthetic direction task")
    p_train.set_defaults(func=cmd_train)

    p_fit = sub.add_parser("fit-regression", help="fit human-judgment regression heads")
    common(p_fit)
    p_fit.add_argument("--ratings")
    p_fit.add_argument("--motions")
    p_fit.add_argument("--checkpoint")
    p_fit.add_argument("--mode", choices=("svr", "ridge"))
    p_fit.add_argument("--text-free", action="store_true")
    p_fit.set_defaults(func=cmd_fit_regression)

    p_score = sub.add_parser("score", help="score one motion (optionally text-free)")
    common(p_score)
    p_score.add_argument("--checkpoint")
    p_score.add_argument("--head")
    p_score.add_argument("--motion", required=True, help="npy motion file")
    p_score.add_argument("--text", help="prompt text")
    p_score.add_argument("--mode", choices=("alignment", "svr", "ridge"), default="alignment")
    p_score.add_argument("--text-free", action="store_true")
    p_score.set_defaults(func=cmd_score)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, TrainingError) as exc:
        print(f"numerical/training error: {exc}", file=sys.stderr)
        return 4
    except T2mEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
