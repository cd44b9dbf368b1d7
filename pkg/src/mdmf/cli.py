"""Command-line interface: synth, train, score, eval, baseline, theory-check.

Flags override values from an optional TOML config file, which in turn override
built-in defaults.  Every run with a fixed --seed writes byte-identical output
files, at any --threads setting.  Exit codes: 0 ok, 1 runtime failure, 2 usage,
3 data-format error, 4 theory-check failure.
"""

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from ._io import atomic_write_bytes, atomic_write_text
from .baselines import pooled_score, train_patch_classifier, voting_score
from .detect import (build_reference_bank, batch_detect, calibrate_threshold_real_only,
                     score_reference_bank)
from .embeddings import (EmbeddingDataset, EmbeddingFormatError, LABEL_GENERATED,
                         LABEL_REAL, read_embedding_file, write_embedding_bytes)
from .metrics import ScoredLabels, auroc, average_precision, best_accuracy
from .pfs import CheckpointFormatError, load_params, save_params
from .synth import SyntheticConfig, sample_fake_fields, sample_real_fields
from .theory import run_all_checks
from .train import TrainConfig, train

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_THEORY = 4

CSV_HEADER = ["source_id", "score", "label"]


class UsageError(Exception):
    """Bad flag/config combination; maps to exit code 2."""


class DataError(Exception):
    """Malformed input file; maps to exit code 3."""


# Defaults per subcommand (argparse dest -> value).  Flags are declared with
# default=None so explicit flags, config-file values, and these defaults can be
# merged in that order.
_DEFAULTS = {
    "synth": {
        "n_real": 1000, "n_fake": 1000, "embed_dim": 8, "patch_count": 16,
        "noise_std": 1.0, "defect_prob": 0.3, "defect_norm": 4.0,
        "dilution_scale": None, "dilution_exponent": None, "sign_corr": 0.0,
        "seed": 0, "threads": 1,
    },
    "train": {
        "epochs": 25, "batch_size": 256, "learning_rate": 1e-4, "beta1": 0.9,
        "beta2": 0.99, "weight_decay": 0.01, "lam": 1e-8, "hidden_width": 256,
        "out_dim": 1, "dropout_rate": 0.3, "dropout": True, "activation": "gelu",
        "history": None, "seed": 0, "threads": 1,
    },
    "score": {
        "tau": None, "calibrate_alpha": None, "activation": "gelu",
        "seed": 0, "threads": 1,
    },
    "eval": {"out": None, "seed": 0, "threads": 1},
    "baseline": {
        "theta_patch": 0.2, "top_k": 5, "epochs": 25, "batch_size": 256,
        "learning_rate": 1e-4, "beta1": 0.9, "beta2": 0.99,
        "seed": 0, "threads": 1,
    },
    "theory-check": {
        "out": None, "mc_samples": 100_000, "trials": 500, "snr_images": 200,
        "snr_resamples": 150, "shift_patches": 1_000_000, "seed": 0, "threads": 1,
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdmf",
        description="Patch-forensic-signature MMD detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file; flags override its values")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None,
                       help="worker bound for schedule-independent operations")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("synth", help="write a synthetic real/fake .pfse file pair")
    p.add_argument("--out-real", required=True)
    p.add_argument("--out-fake", required=True)
    p.add_argument("--n-real", type=int, default=None)
    p.add_argument("--n-fake", type=int, default=None)
    p.add_argument("--embed-dim", type=int, default=None)
    p.add_argument("--patch-count", type=int, default=None)
    p.add_argument("--noise-std", type=float, default=None)
    p.add_argument("--defect-prob", type=float, default=None)
    p.add_argument("--defect-norm", type=float, default=None,
                   help="norm of the defect vector (applied on the first axis)")
    p.add_argument("--dilution-scale", type=float, default=None)
    p.add_argument("--dilution-exponent", type=float, default=None)
    p.add_argument("--sign-corr", type=float, default=None)
    common(p)

    p = sub.add_parser("train", help="train the projection on labelled .pfse pools")
    p.add_argument("--real", required=True)
    p.add_argument("--fake", required=True)
    p.add_argument("--out", required=True, help="output .pfsp checkpoint")
    p.add_argument("--history", default=None, help="optional JSON training history")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--beta1", type=float, default=None)
    p.add_argument("--beta2", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="variance regulariser in the objective denominator")
    p.add_argument("--hidden-width", type=int, default=None)
    p.add_argument("--out-dim", type=int, default=None)
    p.add_argument("--dropout-rate", type=float, default=None)
    p.add_argument("--dropout", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--activation", choices=["gelu", "tanh"], default=None)
    common(p)

    p = sub.add_parser("score", help="score test images against a real reference bank")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--refs", required=True, help="real reference .pfse")
    p.add_argument("--tests", required=True, help="test .pfse")
    p.add_argument("--out", required=True, help="output CSV: source_id,score,label")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--calibrate-alpha", type=float, default=None,
                   help="real-only calibration: tau = mean + alpha * std of "
                        "reference scores")
    p.add_argument("--activation", choices=["gelu", "tanh"], default=None)
    common(p)

    p = sub.add_parser("eval", help="summarise a score CSV into metric JSON")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", default=None, help="JSON path (stdout when omitted)")
    common(p)

    p = sub.add_parser("baseline", help="patch-classifier baselines (voting/pooling)")
    p.add_argument("--mode", required=True, choices=["voting", "mean", "max", "topk"])
    p.add_argument("--real", required=True)
    p.add_argument("--fake", required=True)
    p.add_argument("--tests", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--theta-patch", type=float, default=None)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--beta1", type=float, default=None)
    p.add_argument("--beta2", type=float, default=None)
    common(p)

    p = sub.add_parser("theory-check", help="run the Monte-Carlo verification suite")
    p.add_argument("--out", default=None, help="JSON report path")
    p.add_argument("--mc-samples", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--snr-images", type=int, default=None)
    p.add_argument("--snr-resamples", type=int, default=None)
    p.add_argument("--shift-patches", type=int, default=None)
    common(p)
    return parser


def _resolve_options(args: argparse.Namespace) -> dict:
    """Merge defaults, config-file values, and explicit flags (flags win)."""
    defaults = dict(_DEFAULTS[args.command])
    merged = dict(defaults)
    if args.config:
        try:
            with open(args.config, "rb") as handle:
                from_file = tomllib.load(handle)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}")
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"malformed config file: {exc}")
        unknown = sorted(set(from_file) - set(defaults))
        if unknown:
            raise UsageError(f"unknown config keys for '{args.command}': {unknown}")
        merged.update(from_file)
    for key in defaults:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def _check_output_path(path) -> None:
    """Fail fast (before any long computation) when an output cannot be written."""
    if path is None:
        return
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise UsageError(f"output directory does not exist: {directory}")


def _load_dataset(path: str) -> EmbeddingDataset:
    try:
        with open(path, "rb") as handle:
            return read_embedding_file(handle)
    except FileNotFoundError:
        raise UsageError(f"input file not found: {path}")
    except EmbeddingFormatError as exc:
        raise DataError(f"{path}: {exc}")


def _load_checkpoint(path: str, activation: str):
    try:
        with open(path, "rb") as handle:
            return load_params(handle, activation=activation)
    except FileNotFoundError:
        raise UsageError(f"checkpoint not found: {path}")
    except CheckpointFormatError as exc:
        raise DataError(f"{path}: {exc}")


def _write_dataset(path: str, dataset: EmbeddingDataset) -> None:
    atomic_write_bytes(path, write_embedding_bytes(dataset))


def _write_score_csv(path: str, source_ids, scores, labels) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for sid, score, label in zip(source_ids, scores, labels):
        writer.writerow([sid, repr(float(score)), label])
    atomic_write_text(path, buf.getvalue())


def _read_score_csv(path: str):
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header != CSV_HEADER:
                raise DataError(f"{path}: expected header {','.join(CSV_HEADER)}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise DataError(f"{path}:{lineno}: expected 3 columns")
                try:
                    score = float(row[1])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad score {row[1]!r}")
                if row[2] not in (LABEL_REAL, LABEL_GENERATED):
                    raise DataError(f"{path}:{lineno}: bad label {row[2]!r}")
                rows.append((row[0], score, row[2]))
    except FileNotFoundError:
        raise UsageError(f"score file not found: {path}")
    return rows


def _cmd_synth(opts: dict, args) -> int:
    _check_output_path(args.out_real)
    _check_output_path(args.out_fake)
    defect = np.zeros(opts["embed_dim"])
    defect[0] = opts["defect_norm"]
    if opts["dilution_scale"] is not None:
        defect = defect / np.linalg.norm(defect)  # dilution requires a unit direction
    cfg = SyntheticConfig(
        embed_dim=opts["embed_dim"], patch_count=opts["patch_count"],
        noise_std=opts["noise_std"], defect_prob=opts["defect_prob"],
        defect_vector=defect, dilution_scale=opts["dilution_scale"],
        dilution_exponent=opts["dilution_exponent"], sign_corr=opts["sign_corr"],
        seed=opts["seed"])
    real = sample_real_fields(cfg, opts["n_real"])
    # Fake records continue the record-index sequence, keeping the two classes
    # on disjoint random streams.
    fake = sample_fake_fields(cfg, opts["n_fake"], start_index=opts["n_real"])
    real_ds = EmbeddingDataset.from_fields(
        real, [LABEL_REAL] * len(real),
        [f"synth-real-{i:06d}" for i in range(len(real))],
        patch_count=cfg.patch_count, embed_dim=cfg.embed_dim)
    fake_ds = EmbeddingDataset.from_fields(
        fake, [LABEL_GENERATED] * len(fake),
        [f"synth-fake-{i:06d}" for i in range(len(fake))],
        patch_count=cfg.patch_count, embed_dim=cfg.embed_dim)
    _write_dataset(args.out_real, real_ds)
    _write_dataset(args.out_fake, fake_ds)
    if args.verbose:
        print(f"wrote {real_ds.n_records} real -> {args.out_real}, "
              f"{fake_ds.n_records} fake -> {args.out_fake}", file=sys.stderr)
    return EXIT_OK


def _train_config(opts: dict) -> TrainConfig:
    return TrainConfig(
        epochs=opts["epochs"], batch_size=opts["batch_size"],
        learning_rate=opts["learning_rate"], adam_beta1=opts["beta1"],
        adam_beta2=opts["beta2"], weight_decay=opts.get("weight_decay", 0.0),
        lam=opts.get("lam", 1e-8), seed=opts["seed"],
        dropout_enabled=opts.get("dropout", True),
        hidden_width=opts.get("hidden_width", 256), out_dim=opts.get("out_dim", 1),
        dropout_rate=opts.get("dropout_rate", 0.3),
        activation=opts.get("activation", "gelu"))


def _cmd_train(opts: dict, args) -> int:
    _check_output_path(args.out)
    _check_output_path(opts.get("history"))
    real = _load_dataset(args.real)
    fake = _load_dataset(args.fake)
    params, history = train(real, fake, _train_config(opts))
    buf = io.BytesIO()
    save_params(params, buf)
    atomic_write_bytes(args.out, buf.getvalue())
    history_path = opts.get("history")
    if history_path:
        payload = [{"step": s.step, "objective": s.objective, "mmd2": s.mmd2,
                    "variance": s.variance, "gamma": s.gamma} for s in history.steps]
        atomic_write_text(history_path, json.dumps(payload, indent=2) + "\n")
    if args.verbose:
        final = history.steps[-1]
        print(f"trained {len(history.steps)} steps; final objective "
              f"{final.objective:.4f}, gamma {final.gamma:.4f}", file=sys.stderr)
    return EXIT_OK


def _cmd_score(opts: dict, args) -> int:
    if opts["tau"] is not None and opts["calibrate_alpha"] is not None:
        raise UsageError("--tau and --calibrate-alpha are mutually exclusive")
    _check_output_path(args.out)
    params = _load_checkpoint(args.checkpoint, opts["activation"])
    refs = _load_dataset(args.refs)
    tests = _load_dataset(args.tests)
    bank = build_reference_bank(refs, params)
    if opts["tau"] is not None:
        tau = opts["tau"]
    else:
        alpha = opts["calibrate_alpha"] if opts["calibrate_alpha"] is not None else 3.0
        tau = calibrate_threshold_real_only(score_reference_bank(bank), alpha)
    report = batch_detect(bank, tests, params, tau, workers=opts["threads"])
    # Ground-truth labels (when the test file carries them) make the CSV
    # directly consumable by `eval`; otherwise fall back to predictions.
    labels = tests.labels if tests.labels is not None else report.labels
    ids = [sid if sid else f"test-{i:06d}" for i, sid in enumerate(report.source_ids)]
    _write_score_csv(args.out, ids, report.scores, labels)
    if args.verbose:
        flagged = sum(1 for lb in report.labels if lb == LABEL_GENERATED)
        print(f"tau {tau:.6g}; flagged {flagged}/{tests.n_records} as generated",
              file=sys.stderr)
    return EXIT_OK


def _cmd_eval(opts: dict, args) -> int:
    _check_output_path(opts["out"])
    rows = _read_score_csv(args.scores)
    if not rows:
        raise DataError(f"{args.scores}: no scored rows")
    data = ScoredLabels.from_pairs([(score, label) for _, score, label in rows])
    acc, tau = best_accuracy(data)
    report = {
        "auroc": auroc(data) if data.n_positive and data.n_negative else None,
        "ap": average_precision(data) if data.n_positive else None,
        "acc": acc,
        "tau": tau,
        "n_real": data.n_negative,
        "n_fake": data.n_positive,
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if opts["out"]:
        atomic_write_text(opts["out"], text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_baseline(opts: dict, args) -> int:
    _check_output_path(args.out)
    real = _load_dataset(args.real)
    fake = _load_dataset(args.fake)
    tests = _load_dataset(args.tests)
    cfg = TrainConfig(epochs=opts["epochs"], batch_size=opts["batch_size"],
                      learning_rate=opts["learning_rate"], adam_beta1=opts["beta1"],
                      adam_beta2=opts["beta2"], weight_decay=0.0, seed=opts["seed"])
    clf = train_patch_classifier(real, fake, cfg)
    scores = []
    for i in range(tests.n_records):
        field = tests.field(i)
        if args.mode == "voting":
            scores.append(voting_score(field, clf, opts["theta_patch"]))
        else:
            scores.append(pooled_score(field, clf, args.mode, opts["top_k"]))
    ids = [sid if sid else f"test-{i:06d}" for i, sid in enumerate(tests.source_ids)]
    labels = tests.labels if tests.labels is not None else [LABEL_REAL] * tests.n_records
    _write_score_csv(args.out, ids, scores, labels)
    if args.verbose:
        print(f"baseline {args.mode}: scored {tests.n_records} tests", file=sys.stderr)
    return EXIT_OK


def _cmd_theory(opts: dict, args) -> int:
    _check_output_path(opts["out"])
    report = run_all_checks(
        seed=opts["seed"], mc_samples=opts["mc_samples"],
        concentration_trials=opts["trials"], snr_images=opts["snr_images"],
        snr_resamples=opts["snr_resamples"], shift_patches=opts["shift_patches"])
    print(report.format_table())
    if opts["out"]:
        atomic_write_text(opts["out"], report.to_json())
    return EXIT_OK if report.passed else EXIT_THEORY


_HANDLERS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "baseline": _cmd_baseline,
    "theory-check": _cmd_theory,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        opts = _resolve_options(args)
        return _HANDLERS[args.command](opts, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EmbeddingFormatError, CheckpointFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
