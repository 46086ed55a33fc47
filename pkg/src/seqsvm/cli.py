"""Command-line experiments: run, score, synth, and roc subcommands.

Configs are TOML with flat sections.  Every random choice flows from the
single top-level seed through named streams, so re-running a config
reproduces its artifacts byte for byte; wall-clock timing is therefore kept
out of summary.json and written to timings.json instead.
"""

import argparse
import csv
import io
import itertools
import json
import os
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import data, evaluate, serialize, trainer
from .errors import (ConfigError, DataError, DivergenceError, NoMarginVectorError,
                     StepFailureError, ValidationError)
from .seeding import DATA_STREAM, derive_seed

TOP_KEYS = {"seed", "out", "data", "synth", "split", "train", "crossval"}
DATA_KEYS = {"path", "inject"}
SYNTH_KEYS = {"p", "d_min", "d_max", "ar_coeff", "normal_scale", "anomaly_scale",
              "n_normal", "n_anomalous"}
SPLIT_KEYS = {"train_fraction", "anomaly_fraction"}
TRAIN_KEYS = {"head", "method", "supervision", "cell", "m", "pooling", "mu",
              "lambda", "tau", "epsilon", "max_outer_iters", "cost", "cost_margin",
              "cost_unlabeled", "cost_labeled", "smo_epsilon", "smo_max_sweeps",
              "freeze_encoder"}


def _reject_unknown(section: dict, allowed: set, prefix: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown config key: {prefix}{key}")


def _as_int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"config key {key} must be an integer, got {value!r}")
    return value


def _as_float(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config key {key} must be a number, got {value!r}")
    return float(value)


def _as_str(value, key: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"config key {key} must be a string, got {value!r}")
    return value


def _as_bool(value, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"config key {key} must be a boolean, got {value!r}")
    return value


_TRAIN_FIELD_KINDS = {
    "head": _as_str, "method": _as_str, "supervision": _as_str, "cell": _as_str,
    "pooling": _as_str, "m": _as_int, "max_outer_iters": _as_int,
    "smo_max_sweeps": _as_int, "freeze_encoder": _as_bool,
    "mu": _as_float, "lambda": _as_float, "tau": _as_float, "epsilon": _as_float,
    "cost": _as_float, "cost_margin": _as_float, "cost_unlabeled": _as_float,
    "cost_labeled": _as_float, "smo_epsilon": _as_float,
}


def _train_kwargs(section: dict, prefix: str) -> dict:
    _reject_unknown(section, TRAIN_KEYS, prefix)
    kwargs = {}
    for key, raw in section.items():
        value = _TRAIN_FIELD_KINDS[key](raw, f"{prefix}{key}")
        kwargs["lam" if key == "lambda" else key] = value
    return kwargs


@dataclass
class Experiment:
    seed: int
    out: str
    data_path: str | None
    inject: int
    profile: data.SynthProfile | None
    n_normal: int
    n_anomalous: int
    train_fraction: float
    anomaly_fraction: float
    train_cfg: trainer.TrainConfig
    grid: list | None
    echo: dict


def _parse_synth(section: dict):
    _reject_unknown(section, SYNTH_KEYS, "synth.")
    n_normal = _as_int(section.get("n_normal", 0), "synth.n_normal")
    n_anomalous = _as_int(section.get("n_anomalous", 0), "synth.n_anomalous")
    kwargs = {}
    for key in ("p", "d_min", "d_max"):
        if key in section:
            kwargs[key] = _as_int(section[key], f"synth.{key}")
    for key in ("ar_coeff", "normal_scale", "anomaly_scale"):
        if key in section:
            kwargs[key] = _as_float(section[key], f"synth.{key}")
    return data.SynthProfile(**kwargs), n_normal, n_anomalous


def _read_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc


def _load_experiment(path, seed_override=None, out_override=None) -> Experiment:
    doc = _read_toml(path)
    _reject_unknown(doc, TOP_KEYS, "")
    seed = _as_int(doc.get("seed", 0), "seed")
    if seed_override is not None:
        seed = seed_override
    out = _as_str(doc.get("out", "."), "out")
    if out_override is not None:
        out = out_override

    data_section = doc.get("data", {})
    _reject_unknown(data_section, DATA_KEYS, "data.")
    data_path = data_section.get("path")
    if data_path is not None:
        data_path = _as_str(data_path, "data.path")
    inject = _as_int(data_section.get("inject", 0), "data.inject")
    if inject < 0:
        raise ConfigError("data.inject must be non-negative")

    profile = n_normal = n_anomalous = None
    if "synth" in doc:
        if data_path is not None:
            raise ConfigError("config sets both data.path and a synth section")
        profile, n_normal, n_anomalous = _parse_synth(doc["synth"])
    elif data_path is None:
        raise ConfigError("config needs either data.path or a synth section")

    split_section = doc.get("split", {})
    _reject_unknown(split_section, SPLIT_KEYS, "split.")
    train_fraction = _as_float(split_section.get("train_fraction", 0.6),
                               "split.train_fraction")
    anomaly_fraction = _as_float(split_section.get("anomaly_fraction", 0.1),
                                 "split.anomaly_fraction")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("split.train_fraction must lie strictly between 0 and 1")
    if not 0.0 <= anomaly_fraction < 1.0:
        raise ConfigError("split.anomaly_fraction must lie in [0, 1)")

    train_cfg = trainer.TrainConfig(seed=seed,
                                    **_train_kwargs(doc.get("train", {}), "train."))

    grid = None
    if "crossval" in doc:
        section = doc["crossval"]
        _reject_unknown(section, TRAIN_KEYS, "crossval.")
        if not section:
            raise ConfigError("crossval section is empty")
        keys = list(section.keys())
        axes = []
        for key in keys:
            raw = section[key]
            if not isinstance(raw, list) or not raw:
                raise ConfigError(f"config key crossval.{key} must be a non-empty list")
            axes.append([_TRAIN_FIELD_KINDS[key](v, f"crossval.{key}") for v in raw])
        grid = []
        for combo in itertools.product(*axes):
            overrides = {("lam" if k == "lambda" else k): v
                         for k, v in zip(keys, combo)}
            grid.append(replace(train_cfg, **overrides))

    # out is where artifacts land, not part of the experiment, so the echo
    # skips it and identical configs give identical summaries anywhere.
    echo = {
        "seed": seed,
        "data": {"path": data_path, "inject": inject},
        "synth": None if profile is None else {
            "p": profile.p, "d_min": profile.d_min, "d_max": profile.d_max,
            "ar_coeff": profile.ar_coeff, "normal_scale": profile.normal_scale,
            "anomaly_scale": profile.anomaly_scale,
            "n_normal": n_normal, "n_anomalous": n_anomalous},
        "split": {"train_fraction": train_fraction,
                  "anomaly_fraction": anomaly_fraction},
        "train": serialize._config_to_dict(train_cfg),
        "crossval": None if grid is None else doc["crossval"],
    }
    return Experiment(seed, out, data_path, inject, profile,
                      n_normal or 0, n_anomalous or 0,
                      train_fraction, anomaly_fraction, train_cfg, grid, echo)


class _ArtifactWriter:
    """Atomic file drops with rollback of everything written on failure."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.written = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_text(self, name: str, text: str) -> str:
        target = self.path(name)
        tmp = f"{target}.tmp-{os.getpid()}"
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, target)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        self.written.append(target)
        return target

    def rollback(self) -> None:
        for target in self.written:
            try:
                os.unlink(target)
            except OSError:
                pass
        self.written.clear()


def _load_batch(path) -> data.SequenceBatch:
    if str(path).endswith(".csv"):
        return data.load_csv(path)
    return data.load_jsonl(path)


def _scores_csv(batch: data.SequenceBatch, margins: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    with_labels = batch.is_fully_labeled()
    header = ["id", "score", "label_pred"] + (["label"] if with_labels else [])
    writer.writerow(header)
    for item, margin in zip(batch.items, margins):
        pred = 1 if margin >= 0.0 else -1
        row = [item.id, repr(float(margin)), pred]
        if with_labels:
            row.append(item.label)
        writer.writerow(row)
    return buf.getvalue()


def _json_text(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


def cmd_run(args) -> int:
    exp = _load_experiment(args.config, args.seed, args.out)
    started = time.perf_counter()
    data_master = derive_seed(exp.seed, DATA_STREAM)
    if exp.data_path is not None:
        batch = _load_batch(exp.data_path)
    else:
        batch = data.synth_generate(exp.profile, exp.n_normal, exp.n_anomalous,
                                    derive_seed(data_master, "synth"))
    if exp.inject:
        batch = data.inject_gaussian_anomalies(batch, exp.inject,
                                               derive_seed(data_master, "inject"))
    _say(args.quiet, f"loaded {batch.n} sequences (p={batch.p})")
    train_batch, test_batch = data.split_train_test(
        batch, exp.train_fraction, exp.anomaly_fraction,
        derive_seed(data_master, "split"))
    train_batch, stats = data.fit_and_normalize(train_batch)
    test_batch = data.apply_normalization(test_batch, stats)
    _say(args.quiet, f"split: {train_batch.n} train / {test_batch.n} test")

    cfg = exp.train_cfg
    selected = None
    if exp.grid is not None:
        cfg = evaluate.crossval_select(train_batch, exp.grid)
        selected = serialize._config_to_dict(cfg)
        _say(args.quiet, "selected config by two-fold cross validation")
    detector = trainer.train(train_batch, cfg)
    _say(args.quiet,
         f"trained: converged={detector.converged} iters={len(detector.trace) - 1}")

    margins = detector.margins(test_batch) if test_batch.n else np.empty(0)
    curve = None
    auc_value = n_pos = n_neg = None
    if test_batch.n and test_batch.is_fully_labeled():
        labels = np.asarray(test_batch.labels(), dtype=int)
        if np.any(labels == 1) and np.any(labels == -1):
            curve = evaluate.roc_curve(margins, labels)
            auc_value = evaluate.auc(curve)
            n_pos = int(np.sum(labels == 1))
            n_neg = int(np.sum(labels == -1))
    elapsed = time.perf_counter() - started

    writer = _ArtifactWriter(exp.out)
    try:
        writer.write_text("model.json", _json_text(serialize.model_to_dict(detector, stats)))
        if curve is not None:
            writer.write_text("roc.csv", evaluate.roc_to_csv(curve))
        writer.write_text("scores.csv", _scores_csv(test_batch, margins))
        summary = {
            "auc": auc_value,
            "n_pos": n_pos,
            "n_neg": n_neg,
            "n_items": batch.n,
            "n_train": train_batch.n,
            "n_test": test_batch.n,
            "converged": detector.converged,
            "warnings": list(detector.warnings),
            "trace": [float(v) for v in detector.trace],
            "crossval_selected": selected,
            "config": exp.echo,
        }
        writer.write_text("summary.json", _json_text(summary))
        writer.write_text("timings.json", _json_text({"wall_seconds": elapsed}))
    except BaseException:
        writer.rollback()
        raise
    if auc_value is None:
        _say(args.quiet, "test auc: n/a (test labels incomplete or one-sided)")
    else:
        _say(args.quiet, f"test auc: {auc_value:.4f}")
    _say(args.quiet, f"artifacts in {exp.out}")
    return 0


def cmd_score(args) -> int:
    detector, stats = serialize.load_model(args.model)
    batch = _load_batch(args.data)
    if batch.n:
        if stats is not None:
            batch = data.apply_normalization(batch, stats)
        if batch.p != detector.params.p:
            raise DataError(
                f"data has {batch.p} dimensions but the model expects {detector.params.p}")
        margins = detector.margins(batch)
    else:
        margins = np.empty(0)
    writer = _ArtifactWriter(args.out)
    target = writer.write_text("scores.csv", _scores_csv(batch, margins))
    _say(args.quiet, f"scored {batch.n} sequences -> {target}")
    return 0


def cmd_synth(args) -> int:
    doc = _read_toml(args.config)
    _reject_unknown(doc, TOP_KEYS, "")
    seed = args.seed if args.seed is not None else _as_int(doc.get("seed", 0), "seed")
    out = args.out if args.out is not None else _as_str(doc.get("out", "."), "out")
    if "synth" not in doc:
        raise ConfigError("synth command needs a synth section")
    profile, n_normal, n_anomalous = _parse_synth(doc["synth"])
    batch = data.synth_generate(
        profile, n_normal, n_anomalous,
        derive_seed(derive_seed(seed, DATA_STREAM), "synth"))
    writer = _ArtifactWriter(out)
    target = writer.path("synth.jsonl")
    tmp = f"{target}.tmp-{os.getpid()}"
    try:
        data.save_jsonl(tmp, batch)
        os.replace(tmp, target)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    _say(args.quiet, f"wrote {batch.n} sequences -> {target}")
    return 0


def cmd_roc(args) -> int:
    try:
        fh = open(args.scores, newline="", encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"scores file not found: {args.scores}") from exc
    except OSError as exc:
        raise DataError(f"cannot read scores file {args.scores}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "score" not in fields or "label" not in fields:
            raise DataError(f"{args.scores}: scores CSV needs score and label columns")
        scores = []
        labels = []
        for lineno, row in enumerate(reader, start=2):
            try:
                scores.append(float(row["score"]))
                labels.append(int(row["label"]))
            except (TypeError, ValueError) as exc:
                raise DataError(f"{args.scores}: line {lineno}: {exc}") from exc
    if not scores:
        raise DataError(f"{args.scores}: no score rows")
    curve = evaluate.roc_curve(scores, labels)
    writer = _ArtifactWriter(args.out)
    try:
        writer.write_text("roc.csv", evaluate.roc_to_csv(curve))
        writer.write_text("auc.json", _json_text(evaluate.auc_summary(scores, labels)))
    except BaseException:
        writer.rollback()
        raise
    _say(args.quiet, f"auc: {evaluate.auc(curve):.4f} ({len(scores)} rows)")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqsvm",
        description="One-class anomaly detectors for variable-length sequences.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train and evaluate one experiment config")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--out", default=None, help="override the output directory")
    run_p.add_argument("--quiet", action="store_true")
    run_p.set_defaults(handler=cmd_run)

    score_p = sub.add_parser("score", help="score a data file with a saved model")
    score_p.add_argument("--model", required=True)
    score_p.add_argument("--data", required=True)
    score_p.add_argument("--out", default=".")
    score_p.add_argument("--quiet", action="store_true")
    score_p.set_defaults(handler=cmd_score)

    synth_p = sub.add_parser("synth", help="generate a synthetic JSONL dataset")
    synth_p.add_argument("--config", required=True)
    synth_p.add_argument("--seed", type=int, default=None)
    synth_p.add_argument("--out", default=None)
    synth_p.add_argument("--quiet", action="store_true")
    synth_p.set_defaults(handler=cmd_synth)

    roc_p = sub.add_parser("roc", help="re-derive a curve from a score CSV")
    roc_p.add_argument("--scores", required=True)
    roc_p.add_argument("--out", default=".")
    roc_p.add_argument("--quiet", action="store_true")
    roc_p.set_defaults(handler=cmd_roc)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (DivergenceError, StepFailureError, NoMarginVectorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
