"""Command-line surface: data generation, training, scoring, evaluation,
optimal-critic verification, and the two sweep experiments.

Every command is deterministic given its flags and seed; training runs echo
their fully resolved configuration next to the checkpoint.  Exit codes:
0 success, 1 failed verification check, 2 invalid inputs, 3 runtime failure.
"""

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import RunConfig, load_config_file, resolve_config
from .critic import CriticInstance, check_theorem, closed_form_grid, random_instance
from .data import (
    anomaly_split,
    apply_scaler,
    load_delimited,
    load_matrix,
    make_synthetic,
    normalize,
    save_delimited,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    GanensError,
    GradientError,
    NonFiniteError,
    OracleError,
    ShapeError,
    VariantError,
)
from .metrics import auroc, prf_at_threshold, roc_curve, threshold_by_contamination
from .scoring import read_report, score_dataset, write_report
from .training import build_ensemble, load_checkpoint, save_checkpoint, train

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

_VALIDATION_ERRORS = (ConfigError, DataError, ShapeError, VariantError, ValueError)
_RUNTIME_ERRORS = (GradientError, OracleError, CheckpointError, NonFiniteError, OSError)


def _label_column(value):
    """Digit strings address label columns by index, anything else by name."""
    try:
        return int(value)
    except ValueError:
        return value


def _write_yaml(payload, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(payload, fh, sort_keys=False)


def _load_run_dataset(config):
    if config.data_file is not None:
        return load_delimited(config.data_file, config.label_column, config.delimiter)
    return make_synthetic(
        config.synthetic_kind,
        config.synthetic_normal,
        config.synthetic_anomaly,
        config.synthetic_dim,
        seed=config.data_seed,
    )


def _build_model(config, width):
    return build_ensemble(
        config.variant,
        d=width,
        dprime=config.dprime,
        n_generators=config.n_generators,
        n_discriminators=config.n_discriminators,
        weights=config.loss_weights(),
        seed=config.seed,
        enc_hidden=tuple(config.enc_hidden),
        dec_hidden=tuple(config.dec_hidden),
        disc_hidden=tuple(config.disc_hidden),
        decoder_output=config.decoder_output,
    )


def _train_run(config, outdir):
    """Shared train pipeline; returns (model, scaler, test split, history)."""
    dataset = _load_run_dataset(config)
    train_ds, test_ds = anomaly_split(dataset, config.train_frac, seed=config.data_seed)
    train_scaled, scaler = normalize(train_ds, config.normalization)
    model = _build_model(config, dataset.width)
    history = train(model, train_scaled.rows, config.train_config())
    outdir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, outdir / "checkpoint.npz", scaler=scaler)
    history.write(outdir / "history.csv")
    config_echo = dataclasses.replace(config, outdir=str(outdir))
    config_echo.save(outdir / "resolved_config.yaml")
    return model, scaler, test_ds, history


def _score_split(model, scaler, test_ds, score_weight=None):
    rows = apply_scaler(test_ds.rows, scaler)
    weights = model.weights
    if score_weight is not None:
        weights = dataclasses.replace(weights, score_weight=float(score_weight))
    return score_dataset(rows, model, labels=test_ds.labels, weights=weights)


def cmd_generate_data(args):
    if args.n_normal < 1:
        raise ConfigError("--n-normal must be >= 1")
    if args.n_anomaly < 0:
        raise ConfigError("--n-anomaly must be >= 0")
    dataset = make_synthetic(args.kind, args.n_normal, args.n_anomaly, args.d, seed=args.seed)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_delimited(dataset, out, delimiter=args.delimiter)
    print(f"wrote {dataset.n} rows ({args.n_normal} normal, {args.n_anomaly} anomalous) to {out}")
    return EXIT_OK


_TRAIN_FLAGS = (
    ("--variant", "variant", str),
    ("--n-generators", "n_generators", int),
    ("--n-discriminators", "n_discriminators", int),
    ("--adversarial-weight", "adversarial_weight", float),
    ("--reconstruction-weight", "reconstruction_weight", float),
    ("--discriminative-weight", "discriminative_weight", float),
    ("--encoding-weight", "encoding_weight", float),
    ("--score-weight", "score_weight", float),
    ("--norm-order", "norm_order", int),
    ("--dprime", "dprime", int),
    ("--lr-gen", "lr_gen", float),
    ("--lr-disc", "lr_disc", float),
    ("--batch-size", "batch_size", int),
    ("--max-iter", "max_iter", int),
    ("--n-critic", "n_critic", int),
    ("--clip-c", "clip_c", float),
    ("--ensemble-iter-multiplier", "ensemble_iter_multiplier", int),
    ("--phase-split", "phase_split", float),
    ("--convergence-tol", "convergence_tol", float),
    ("--data-file", "data_file", str),
    ("--label-column", "label_column", _label_column),
    ("--delimiter", "delimiter", str),
    ("--synthetic-kind", "synthetic_kind", str),
    ("--synthetic-normal", "synthetic_normal", int),
    ("--synthetic-anomaly", "synthetic_anomaly", int),
    ("--synthetic-dim", "synthetic_dim", int),
    ("--data-seed", "data_seed", int),
    ("--normalization", "normalization", str),
    ("--train-frac", "train_frac", float),
    ("--seed", "seed", int),
    ("--outdir", "outdir", str),
)


def _add_train_flags(parser):
    parser.add_argument("--config", help="YAML file with RunConfig keys")
    for flag, dest, typ in _TRAIN_FLAGS:
        parser.add_argument(flag, dest=dest, type=typ, default=None)


def _resolve_from_args(args):
    file_values = load_config_file(args.config) if args.config else {}
    flag_values = {dest: getattr(args, dest) for _, dest, _ in _TRAIN_FLAGS}
    return resolve_config(file_values, flag_values)


def cmd_train(args):
    config = _resolve_from_args(args)
    outdir = Path(config.outdir)
    model, _, _, history = _train_run(config, outdir)
    print(
        f"trained {config.variant} ensemble ({model.n_generators}x{model.n_discriminators}) "
        f"for {len(history)} iterations; outputs in {outdir}"
    )
    return EXIT_OK


def cmd_score(args):
    model, scaler = load_checkpoint(args.checkpoint)
    if args.no_labels:
        rows, _ = load_matrix(args.data, delimiter=args.delimiter)
        labels = None
    else:
        dataset = load_delimited(args.data, args.label_column, args.delimiter)
        rows, labels = dataset.rows, dataset.labels
    if rows.shape[1] != model.data_width:
        raise ShapeError(
            f"data width {rows.shape[1]} does not match checkpoint width {model.data_width}"
        )
    if scaler is not None:
        rows = scaler.apply(rows)
    weights = model.weights
    if args.score_weight is not None:
        weights = dataclasses.replace(weights, score_weight=args.score_weight)
    report = score_dataset(rows, model, labels=labels, seed=args.seed, weights=weights)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_report(report, out)
    if args.summary:
        _write_yaml(
            {
                "variant": report.variant,
                "n_generators": model.n_generators,
                "n_discriminators": model.n_discriminators,
                "score_weight": float(weights.score_weight),
                "norm_order": int(weights.norm_order),
                "seed": report.seed,
                "n_samples": int(report.n_samples),
            },
            args.summary,
        )
    print(f"scored {report.n_samples} samples with {len(report.pair_labels)} pairs -> {out}")
    return EXIT_OK


def cmd_evaluate(args):
    scores, labels, _ = read_report(args.scores)
    if labels is None:
        raise DataError(f"{args.scores}: score file carries no labels to evaluate against")
    auroc_value = auroc(scores, labels)
    curve = roc_curve(scores, labels)
    contamination = args.contamination
    if args.threshold is not None:
        threshold = args.threshold
    else:
        if contamination is None:
            contamination = float(np.mean(labels))
        threshold = threshold_by_contamination(scores, contamination)
    summary = prf_at_threshold(scores, labels, threshold)
    if args.roc_out:
        with open(args.roc_out, "w", encoding="utf-8") as fh:
            fh.write("fpr,tpr\n")
            for fpr, tpr in curve.points():
                fh.write(f"{fpr!r},{tpr!r}\n")
    payload = {
        "n_samples": int(scores.size),
        "n_anomalies": int(np.sum(labels)),
        "auroc": float(auroc_value),
        "roc_trapezoid_area": float(curve.area()),
        "threshold": float(summary.threshold),
        "contamination": None if contamination is None else float(contamination),
        "precision": float(summary.precision),
        "recall": float(summary.recall),
        "f1": float(summary.f1),
    }
    if args.out:
        _write_yaml(payload, args.out)
    print(
        f"auroc={auroc_value:.4f} precision={summary.precision:.4f} "
        f"recall={summary.recall:.4f} f1={summary.f1:.4f}"
    )
    return EXIT_OK


def cmd_verify_critic(args):
    if (args.instance is None) == (args.random is None):
        raise ConfigError("give exactly one of --instance FILE or --random N M")
    if args.instance is not None:
        instances = [CriticInstance.load(args.instance)]
    else:
        n_train, n_support = args.random
        instances = [
            random_instance(n_train, n_support, args.dim, args.norm, seed=args.seed + k)
            for k in range(args.repeat)
        ]
    reports = [check_theorem(inst, tol=args.tol, lipschitz_tol=args.lipschitz_tol)
               for inst in instances]
    text = "".join(report.to_text() for report in reports)
    print(text, end="")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.plot_data:
        grid = closed_form_grid(instances[0])
        with open(args.plot_data, "w", encoding="utf-8") as fh:
            coords = [f"x{k}" for k in range(instances[0].dim)]
            fh.write(",".join([*coords, "critic_value"]) + "\n")
            for row in grid:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def _parse_grid(text, converter, flag):
    try:
        values = [converter(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"{flag}: {exc}") from exc
    if not values:
        raise ConfigError(f"{flag}: empty grid")
    return values


def cmd_sweep(args):
    base = _resolve_from_args(args)
    outdir = Path(base.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    if args.kind == "ensemble-size":
        sizes = _parse_grid(args.sizes, int, "--sizes")
        cell = 0
        for size in sizes:
            for rep in range(args.reps):
                cell_cfg = dataclasses.replace(
                    base,
                    n_generators=size,
                    n_discriminators=size,
                    seed=base.seed + cell,
                    data_seed=base.data_seed + rep,
                    outdir=str(outdir / f"size{size}_rep{rep}"),
                )
                model, scaler, test_ds, _ = _train_run(cell_cfg, Path(cell_cfg.outdir))
                report = _score_split(model, scaler, test_ds)
                write_report(report, Path(cell_cfg.outdir) / "scores.csv")
                rows.append((size, cell_cfg.seed, auroc(report.scores, test_ds.labels)))
                cell += 1
    else:
        betas = _parse_grid(args.betas, float, "--betas")
        for rep in range(args.reps):
            cell_cfg = dataclasses.replace(
                base,
                seed=base.seed + rep,
                data_seed=base.data_seed + rep,
                outdir=str(outdir / f"rep{rep}"),
            )
            model, scaler, test_ds, _ = _train_run(cell_cfg, Path(cell_cfg.outdir))
            for beta in betas:
                report = _score_split(model, scaler, test_ds, score_weight=beta)
                write_report(report, Path(cell_cfg.outdir) / f"scores_beta{beta}.csv")
                rows.append((beta, cell_cfg.seed, auroc(report.scores, test_ds.labels)))
    table = outdir / "sweep.csv"
    with open(table, "w", encoding="utf-8") as fh:
        fh.write("setting,seed,auroc\n")
        for setting, seed, value in rows:
            fh.write(f"{setting},{seed},{value!r}\n")
    print(f"wrote {len(rows)} sweep rows to {table}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ganens",
        description="GAN-ensemble anomaly detection for vector data",
    )
    parser.add_argument("--version", action="version", version=f"ganens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="write a synthetic labeled dataset")
    p.add_argument("--kind", required=True, choices=("gaussian-mixture", "ring", "two-moons"))
    p.add_argument("--n-normal", type=int, required=True)
    p.add_argument("--n-anomaly", type=int, default=0)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="train an ensemble and write a checkpoint")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score samples with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-column", type=_label_column, default="label")
    p.add_argument("--no-labels", action="store_true", help="data file has no label column")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--score-weight", type=float, default=None,
                   help="override the checkpoint's discriminative score weight")
    p.add_argument("--seed", type=int, default=None, help="seed recorded in the summary")
    p.add_argument("--out", required=True)
    p.add_argument("--summary", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="metrics for a labeled score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--contamination", type=float, default=None,
                   help="flagged fraction; defaults to the observed anomaly rate")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--roc-out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify-critic", help="check the optimal-critic closed form")
    p.add_argument("--instance", default=None, help="JSON instance file")
    p.add_argument("--random", nargs=2, type=int, metavar=("N_TRAIN", "N_SUPPORT"))
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--norm", choices=("l1", "l2"), default="l2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--lipschitz-tol", type=float, default=1e-6)
    p.add_argument("--report", default=None)
    p.add_argument("--plot-data", default=None)
    p.set_defaults(func=cmd_verify_critic)

    p = sub.add_parser("sweep", help="ensemble-size or score-weight sweep")
    p.add_argument("--kind", required=True, choices=("ensemble-size", "beta"))
    p.add_argument("--sizes", default="1,3,5,7")
    p.add_argument("--betas", default="0.0,0.25,1.0,4.0")
    p.add_argument("--reps", type=int, default=5)
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except GanensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
