"""Command line: ``geocert {train,certify,sweep,oracle-check}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal
assertion failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .data import Dataset, IdxError, load_idx, synth_dataset
from .metrics import certified_accuracy_curve, improvement_metrics
from .model import accuracy, load_checkpoint, save_checkpoint, train_noise_augmented
from .search import METHODS, CertificationReport, certify_geometric
from .validation import run_checks

log = logging.getLogger("geocert")

RESULT_COLUMNS = (
    "instance_id", "label", "predicted", "abstained", "e0_lower", "e1_upper",
    "r_cohen", "r_single", "r_double", "r_boundary", "r_best", "best_method",
    "iterations", "wall_time_ms", "seed",
)
RESULT_SCHEMA_VERSION = 1
R_GRID = np.round(np.arange(0.0, 2.0 + 1e-9, 0.025), 6)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class DataError(RuntimeError):
    pass


class InternalError(AssertionError):
    pass


def _datasets(cfg: RunConfig) -> tuple[Dataset, Dataset]:
    ds = cfg.data
    if ds.kind == "idx":
        paths = (ds.train_images, ds.train_labels, ds.test_images, ds.test_labels)
        if None in paths:
            raise ConfigError("idx data needs train_images, train_labels, test_images, test_labels")
        for p in paths:
            if not Path(p).is_file():
                raise DataError(f"missing data file {p}")
        try:
            train = load_idx(ds.train_images, ds.train_labels, ds.n_classes)
            test = load_idx(ds.test_images, ds.test_labels, ds.n_classes)
        except IdxError as exc:
            raise DataError(str(exc)) from exc
        return train, test.head(ds.n_test)
    train = synth_dataset(ds.kind, ds.dim, ds.n_train, ds.seed, ds.n_classes)
    test = synth_dataset(ds.kind, ds.dim, ds.n_test, ds.seed + 1, ds.n_classes)
    return train, test


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_row(r: CertificationReport, record_timing: bool) -> list[str]:
    values = {
        "instance_id": r.instance_id, "label": r.label, "predicted": r.predicted, "abstained": r.abstained,
        "e0_lower": r.e0_lower, "e1_upper": r.e1_upper, "r_cohen": r.r_cohen, "r_single": r.r_single,
        "r_double": r.r_double, "r_boundary": r.r_boundary, "r_best": r.r_best, "best_method": r.best_method,
        "iterations": r.iterations_used, "wall_time_ms": round(r.wall_time_ms, 3) if record_timing else 0.0,
        "seed": r.seed,
    }
    return [_fmt(values[c]) for c in RESULT_COLUMNS]


def instance_seed(global_seed: int, instance_id: int) -> int:
    return int(np.random.SeedSequence([global_seed, instance_id]).generate_state(1)[0])


def _certify_one(args):
    model, x, label, cfg, i = args
    seed = instance_seed(cfg.seed, i)
    rng = np.random.default_rng(seed)
    return certify_geometric(model, x, int(label), cfg.smoothing, cfg.search, rng, instance_id=i, seed=seed)


def certify_dataset(model, data: Dataset, cfg: RunConfig) -> list[CertificationReport]:
    jobs = [(model, data.inputs[i], data.labels[i], cfg, i) for i in range(len(data))]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            return list(pool.map(_certify_one, jobs, chunksize=4))
    return [_certify_one(job) for job in jobs]


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def summarize(reports: list[CertificationReport]) -> dict:
    n = len(reports)
    abstained = sum(r.abstained for r in reports)
    correct = sum(r.correct for r in reports)
    metrics = improvement_metrics(reports)
    improved = sum(r.correct and r.r_best > r.r_cohen for r in reports)
    certified = [r for r in reports if r.correct]
    return {
        "instances": n,
        "abstained": abstained,
        "abstention_rate": abstained / n if n else 0.0,
        "certified_correct": correct,
        "improved": improved,
        "mean_r_cohen": float(np.mean([r.r_cohen for r in certified])) if certified else 0.0,
        "mean_r_best": float(np.mean([r.r_best for r in certified])) if certified else 0.0,
        "mean_improvement_pct": metrics["mean_improvement"],
        "median_improvement_pct": metrics["median_improvement"],
        **{f"share_{m}": metrics["method_shares"][m] for m in METHODS},
    }


def write_outputs(reports: list[CertificationReport], out: Path, record_timing: bool) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "results.csv", RESULT_COLUMNS, [report_row(r, record_timing) for r in reports])
    summary = summarize(reports)
    lines = [f"# geocert results schema v{RESULT_SCHEMA_VERSION}"]
    lines += [f"{k} = {_fmt(v)}" for k, v in summary.items()]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")

    cohen = certified_accuracy_curve(reports, R_GRID, "r_cohen")
    best = certified_accuracy_curve(reports, R_GRID, "r_best")
    _write_csv(out / "certified_accuracy.csv", ("radius", "cohen", "best"),
               [(_fmt(r), _fmt(a), _fmt(b)) for (r, a), (_, b) in zip(cohen, best)])
    metrics = improvement_metrics(reports)
    _write_csv(out / "improvement.csv", ("radius", "median_improvement_pct", "count"),
               [(_fmt(c), _fmt(m), k) for c, m, k in metrics["binned_median"]])
    _write_csv(out / "best_method.csv", ("method", "proportion"),
               [(m, _fmt(metrics["method_shares"][m])) for m in METHODS])
    return summary


def _check_compat(model, data: Dataset):
    if model.dim != data.dim:
        raise DataError(f"checkpoint expects dimension {model.dim}, data has {data.dim}")
    if model.n_classes != data.n_classes:
        raise DataError(f"checkpoint has {model.n_classes} classes, data has {data.n_classes}")


def cmd_train(cfg: RunConfig) -> Path:
    train, _ = _datasets(cfg)
    params = train_noise_augmented(train, cfg.train)
    save_checkpoint(params, cfg.checkpoint)
    log.info("trained %s on %d points, clean accuracy %.3f -> %s",
             params.layer_dims, len(train), accuracy(params, train), cfg.checkpoint)
    return cfg.checkpoint


def _load_model(cfg: RunConfig):
    if not cfg.checkpoint.is_file():
        raise DataError(f"checkpoint {cfg.checkpoint} not found; run `geocert train` first")
    try:
        return load_checkpoint(cfg.checkpoint)
    except (ValueError, KeyError) as exc:
        raise DataError(f"unreadable checkpoint {cfg.checkpoint}: {exc}") from exc


def _certify_to(cfg: RunConfig, model, test: Dataset, out: Path) -> tuple[list[CertificationReport], dict]:
    reports = certify_dataset(model, test, cfg)
    bad = [r.instance_id for r in reports if r.r_best < r.r_cohen]
    if bad:
        raise InternalError(f"r_best < r_cohen for instances {bad}")
    return reports, write_outputs(reports, out, cfg.record_timing)


def cmd_certify(cfg: RunConfig) -> Path:
    model = _load_model(cfg)
    _, test = _datasets(cfg)
    _check_compat(model, test)
    _certify_to(cfg, model, test, cfg.output_dir)
    return cfg.output_dir / "results.csv"


def cmd_sweep(cfg: RunConfig) -> Path:
    if not cfg.sigmas:
        raise ConfigError("sigma list is empty")
    model = _load_model(cfg)
    _, test = _datasets(cfg)
    _check_compat(model, test)
    rows = []
    for sigma in sorted(cfg.sigmas):
        sub = replace(cfg.with_sigma(sigma), output_dir=cfg.output_dir / f"sigma_{sigma:g}")
        _, summary = _certify_to(sub, model, test, sub.output_dir)
        rows.append((sigma, summary))
    keys = list(rows[0][1])
    _write_csv(cfg.output_dir / "aggregate.csv", ("sigma", *keys),
               [(_fmt(s), *(_fmt(summary[k]) for k in keys)) for s, summary in rows])
    return cfg.output_dir / "aggregate.csv"


def cmd_oracle_check(full: bool = False) -> bool:
    checks = run_checks(quick=not full)
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.detail}")
    return all(c.passed for c in checks)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geocert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("train", "train the built-in MLP with Gaussian noise augmentation"),
                       ("certify", "certify the test split and write results.csv"),
                       ("sweep", "certify once per sigma and aggregate")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", type=Path, help="INI run configuration")
        p.add_argument("--workers", type=int, help="override [run] workers")
    p = sub.add_parser("oracle-check", help="validate every closed form against its oracle")
    p.add_argument("--full", action="store_true", help="use acceptance-scale sample sizes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "oracle-check":
            return EXIT_OK if cmd_oracle_check(args.full) else EXIT_INTERNAL
        cfg = load_config(args.config)
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            cfg = replace(cfg, workers=args.workers)
        out = {"train": cmd_train, "certify": cmd_certify, "sweep": cmd_sweep}[args.command](cfg)
        print(out)
        return EXIT_OK
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (DataError, IdxError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except AssertionError as exc:
        log.error("internal assertion failed: %s", exc)
        return EXIT_INTERNAL
    except ValueError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
