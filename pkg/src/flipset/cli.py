"""Command-line front door: train, flipset, experiment, calibrate,
attribution, serve.

Configuration comes from a JSON file plus flag overrides (flags win).
Exit codes: 0 success, 1 gate/assertion failure, 2 config error, 3 data
error, 4 numerical failure. FLIPSET_LOG controls the log level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .artifacts import load_bundle, save_bundle, train_from_config
from .config import RunConfig
from .errors import (ConfigError, DataError, FlipsetError, InputError,
                     NumericalError, TrainingError)
from .experiment import attribution_sweep, run_experiment
from .influence import METHODS
from .ioutil import atomic_write_text, write_json
from .search import GREEDY, ITERATIVE, greedy_flipset, iterative_flipset
from .verification import loo_calibration, verify_flip

log = logging.getLogger("flipset")

EXIT_OK = 0
EXIT_GATE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", help="JSON config file")
    p.add_argument("--out-dir", help="output directory (overrides config)")
    p.add_argument("--algorithm", choices=(GREEDY, ITERATIVE))
    p.add_argument("--max-passes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--lam", type=float, help="L2 regularization weight")
    p.add_argument("--tau", type=float, help="classification threshold")
    p.add_argument("--dataset-kind", choices=("corpus", "embeddings", "synthetic"))
    p.add_argument("--dataset-path")
    p.add_argument("--dataset-format", choices=("csv", "jsonl"))
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--class-separation", type=float)
    p.add_argument("--noise-rate", type=float)
    p.add_argument("--min-df", type=int)
    p.add_argument("--max-vocab", type=int)
    p.add_argument("--weighting", choices=("binary", "count", "tfidf"))


_OVERRIDES = {
    "out_dir": ("out_dir",),
    "algorithm": ("algorithm",),
    "max_passes": ("max_passes",),
    "seed": ("seed",),
    "parallelism": ("parallelism",),
    "lam": ("hyper", "lam"),
    "tau": ("hyper", "tau"),
    "dataset_kind": ("dataset", "kind"),
    "dataset_path": ("dataset", "path"),
    "dataset_format": ("dataset", "format"),
    "n_train": ("dataset", "n_train"),
    "n_test": ("dataset", "n_test"),
    "dim": ("dataset", "dim"),
    "class_separation": ("dataset", "class_separation"),
    "noise_rate": ("dataset", "noise_rate"),
    "min_df": ("bow", "min_df"),
    "max_vocab": ("bow", "max_vocab"),
    "weighting": ("bow", "weighting"),
}


def build_config(args: argparse.Namespace) -> RunConfig:
    raw = {}
    if getattr(args, "config", None):
        raw = RunConfig.from_file(args.config).to_dict()
    for attr, path in _OVERRIDES.items():
        value = getattr(args, attr, None)
        if value is None:
            continue
        node = raw
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
    config = RunConfig.from_dict(raw)
    config.validate_paths()
    return config


def cmd_train(args) -> int:
    config = build_config(args)
    bundle = train_from_config(config)
    out_dir = Path(config.out_dir)
    save_bundle(out_dir, bundle)
    m = bundle.metrics

    def fmt(v: Optional[float]) -> str:
        return "n/a" if v is None else f"{v:.4f}"

    summary = (
        f"trained on {bundle.train_split.n} points "
        f"(d={bundle.model.dimension}, {bundle.model.iterations} Newton iterations, "
        f"grad norm {bundle.model.final_grad_norm:.2e})\n"
        f"test metrics: accuracy={fmt(m['accuracy'])} f1={fmt(m['f1'])} auc={fmt(m['auc'])}\n")
    print(summary, end="")
    atomic_write_text(out_dir / "summary.txt", summary)
    print(f"model artifact written to {out_dir}")
    return EXIT_OK


def cmd_flipset(args) -> int:
    bundle = load_bundle(args.model)
    model, train_split, test_split = bundle.model, bundle.train_split, bundle.test_split
    t = args.test_index
    if not 0 <= t < test_split.n:
        raise InputError(f"test index {t} out of range (test set has {test_split.n} points)")
    x_t = test_split.feature_row(t)
    if args.algorithm == GREEDY:
        result = greedy_flipset(model, train_split, x_t, test_index=t)
    else:
        result = iterative_flipset(model, train_split, x_t, max_passes=args.max_passes, test_index=t)
    if args.verify and result.found:
        result = verify_flip(result, train_split, x_t, model.hyper)

    print(f"test {t}: prob={result.original_prob:.4f} label={result.original_label} "
          f"(tau={model.hyper.tau})")
    if not result.found:
        print("no flipping subset found")
    else:
        print(f"k={result.k} estimated_prob={result.estimated_prob:.4f} "
              f"passes={result.outer_passes}")
        for idx, delta in zip(result.members, result.member_deltas):
            text = train_split.text_of(idx)
            suffix = f"  {text[:80]!r}" if text else ""
            print(f"  train[{idx}] label={int(train_split.y[idx])} delta={delta:+.6f}{suffix}")
        if result.verified is not None:
            print(f"verified: {result.verified} retrained_prob={result.retrained_prob:.4f}")
    out = Path(args.model) / "flipsets" / f"{args.algorithm}_{t}.json"
    write_json(out, {
        "test_index": t, "algorithm": result.algorithm,
        "original_prob": result.original_prob, "original_label": result.original_label,
        "members": list(result.members), "member_deltas": list(result.member_deltas),
        "estimated_prob": result.estimated_prob, "outer_passes": result.outer_passes,
        "verified": result.verified, "retrained_prob": result.retrained_prob,
    })
    print(f"result persisted to {out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = build_config(args)
    bundle = train_from_config(config)
    out_dir = Path(config.out_dir)
    report = run_experiment(bundle.train_split, bundle.test_split, config.hyper,
                            config.algorithm, dataset_name=_dataset_name(config),
                            feature_kind=config.feature_kind, max_passes=config.max_passes,
                            parallelism=config.parallelism, out_dir=out_dir,
                            model=bundle.model)
    ks = np.array(report.k_values)
    mean_k = f"{ks.mean():.1f}" if ks.size else "n/a"
    passes = f"{report.mean_outer_passes:.2f}" if report.mean_outer_passes is not None else "n/a"
    print(f"dataset={report.dataset_name} algorithm={report.algorithm} n_test={report.n_test}")
    print(f"found {report.found_rate:.1%}  flipped {report.flip_rate:.1%}  "
          f"mean k {mean_k}  mean passes {passes}")
    print(f"wall time {report.wall_time_seconds:.2f}s")
    print(f"report files written to {out_dir}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config = build_config(args)
    bundle = train_from_config(config)
    n_points = min(args.test_points, bundle.test_split.n)
    if n_points < 1:
        raise DataError("calibration needs at least one test point")
    X_test = bundle.test_split.X[:n_points]
    report = loo_calibration(bundle.model, bundle.train_split, X_test,
                             test_indices=range(n_points))
    for point in report.per_point:
        r = "undefined" if point.pearson_r is None else f"{point.pearson_r:.4f}"
        print(f"test {point.test_index}: r={r} sign_agreement={point.sign_agreement:.1%}")
    mean_r = report.mean_r
    print(f"mean r: {'undefined' if mean_r is None else f'{mean_r:.4f}'}  "
          f"overall sign agreement: {report.sign_agreement:.1%}")
    if mean_r is None or mean_r < args.floor:
        print(f"calibration FAILED: mean r below floor {args.floor}", file=sys.stderr)
        return EXIT_GATE
    print(f"calibration ok (floor {args.floor})")
    return EXIT_OK


def cmd_attribution(args) -> int:
    config = build_config(args)
    methods = [m.strip().upper() for m in args.methods.split(",") if m.strip()]
    k_grid = [int(k) for k in args.k_grid.split(",") if k.strip()]
    bundle = train_from_config(config)
    test_indices = range(min(args.test_points, bundle.test_split.n))
    report = attribution_sweep(bundle.train_split, bundle.test_split, config.hyper,
                               methods, k_grid, test_indices=test_indices,
                               seed=config.seed, out_dir=Path(config.out_dir),
                               model=bundle.model)
    header = "method  " + "  ".join(f"k={k}" for k in report.k_grid)
    print(header)
    for method in methods:
        row = "  ".join(f"{v:.4f}" for v in report.curves[method])
        print(f"{method:7s} {row}")
    print(f"sweep CSV written to {Path(config.out_dir)}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.data_dir), ui_dir=Path(args.ui_dir) if args.ui_dir else None)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _dataset_name(config: RunConfig) -> str:
    ds = config.dataset
    if ds.kind == "synthetic":
        return f"synthetic(seed={ds.seed},n={ds.n_train},d={ds.dim})"
    return Path(ds.path).name


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flipset",
        description="Find, verify, and contest minimal training subsets that flip predictions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and persist the artifact")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("flipset", help="search a flipset for one test point")
    p.add_argument("--model", required=True, help="model artifact directory")
    p.add_argument("--test-index", type=int, required=True)
    p.add_argument("--algorithm", choices=(GREEDY, ITERATIVE), default=ITERATIVE)
    p.add_argument("--max-passes", type=int, default=25)
    p.add_argument("--verify", action="store_true", help="retrain to verify the flip")
    p.set_defaults(func=cmd_flipset)

    p = sub.add_parser("experiment", help="full sweep with retraining verification")
    _add_config_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("calibrate", help="LOO calibration gate for the influence convention")
    _add_config_flags(p)
    p.add_argument("--test-points", type=int, default=20)
    p.add_argument("--floor", type=float, default=0.9)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("attribution", help="top-k removal sweep across attribution methods")
    _add_config_flags(p)
    p.add_argument("--methods", default="IP,RANDOM,EUC,DOT,COS",
                   help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--k-grid", default="10,25,50,100")
    p.add_argument("--test-points", type=int, default=20)
    p.set_defaults(func=cmd_attribution)

    p = sub.add_parser("serve", help="run the contestation HTTP service")
    p.add_argument("--data-dir", default="runs/service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", default=None, help="built UI bundle to serve at /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("FLIPSET_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, InputError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FlipsetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GATE


if __name__ == "__main__":
    sys.exit(main())
