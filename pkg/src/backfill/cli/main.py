"""``backfill`` command line tool.

Subcommands
-----------
simulate   truth, ticks, dense window (and benchmarks) as CSV
filter     Kalman-Bucy mean and variance over the whole record
backfill   ensemble or baseline fill of the censored window
evaluate   RMSE and band coverage against the truth

All subcommands accept ``--config PATH``; ``--seed``, ``--method``, ``--out``
and ``--paths`` override the corresponding config keys.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..errors import BackfillError
from . import io, metrics, pipeline
from .config import METHODS, RunConfig, format_config, load_config


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg.replace(seed=args.seed, out=args.out,
                       method=getattr(args, "method", None), n_paths=getattr(args, "paths", None))


def _data_dir(args, cfg: RunConfig) -> Path:
    return Path(args.data) if getattr(args, "data", None) else Path(cfg.out)


def cmd_simulate(args) -> list[Path]:
    cfg = _config(args)
    sim = pipeline.simulate(cfg)
    files = pipeline.write_simulation(sim, cfg.out)
    path = Path(cfg.out) / "config.txt"
    path.write_text(format_config(cfg))
    return files + [path]


def cmd_filter(args) -> list[Path]:
    cfg = _config(args)
    inputs = pipeline.load_inputs(_data_dir(args, cfg))
    filt, _, calib = pipeline.run_filter(cfg, inputs)
    out = Path(cfg.out)
    files = [io.write_csv(out / "filter.csv", ("time", "mean", "var"),
                          (filt.grid.times, filt.means[:, 0], filt.covs[:, 0, 0]))]
    if calib is not None:
        files.append(io.write_report(out / "calibration.txt", {
            "a": calib.a, "c": calib.c, "a_se": calib.a_se, "c_se": calib.c_se,
            "n_points": calib.n_points}))
    return files


def cmd_backfill(args) -> list[Path]:
    cfg = _config(args)
    if args.save_paths:
        cfg = cfg.replace(save_paths=True)
    inputs = pipeline.load_inputs(_data_dir(args, cfg))
    result = pipeline.backfill(cfg, inputs)
    return pipeline.write_backfill(result, cfg.out, cfg.save_paths)


def cmd_evaluate(args) -> list[Path]:
    cfg = _config(args)
    out = Path(cfg.out)
    data = _data_dir(args, cfg)
    truth_path = Path(args.truth) if args.truth else data / "truth.csv"
    _, truth = io.read_csv(truth_path)
    dense_path = data / "dense.csv"
    T = io.read_csv(dense_path)[1][0, 0] if dense_path.exists() else cfg.liquidity_time
    files = [Path(f) for f in args.backfills] or sorted(out.glob("backfill_*.csv"))
    if not files:
        raise BackfillError(f"no backfill files found in {out}")
    report = {"liquidity_time": float(T)}
    for path in files:
        header, data_ = io.read_csv(path)
        if tuple(header) != pipeline.BACKFILL_HEADER:
            raise BackfillError(f"{path}: unexpected header {','.join(header)}")
        method = path.stem.removeprefix("backfill_")
        extra = {}
        anchors = path.with_name(f"anchors_{method}.txt")
        if anchors.exists():
            rep = io.read_report(anchors)
            extra = {"max_hit_error": float(rep["max_hit_error"]), "mean_kl": float(rep["mean_kl"])}
        sc = metrics.score(method, truth[:, 0], truth[:, 1], data_[:, 0], data_[:, 1:].T, T, **extra)
        report.update(sc.items())
    return [io.write_report(out / "evaluation.txt", report)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="backfill", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="key=value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", metavar="DIR", help="output directory")
        return p

    common(sub.add_parser("simulate", help="simulate a censored scenario")).set_defaults(func=cmd_simulate)
    p = common(sub.add_parser("filter", help="run the Kalman-Bucy filter"))
    p.add_argument("--data", metavar="DIR", help="directory with ticks.csv/dense.csv (default: --out)")
    p.set_defaults(func=cmd_filter)
    p = common(sub.add_parser("backfill", help="backfill the censored window"))
    p.add_argument("--data", metavar="DIR", help="directory with ticks.csv/dense.csv (default: --out)")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--paths", type=int, help="ensemble size")
    p.add_argument("--save-paths", action="store_true", help="also write raw paths")
    p.set_defaults(func=cmd_backfill)
    p = common(sub.add_parser("evaluate", help="score backfills against the truth"))
    p.add_argument("--data", metavar="DIR", help="directory with truth.csv/dense.csv (default: --out)")
    p.add_argument("--truth", metavar="PATH")
    p.add_argument("backfills", nargs="*", help="backfill CSVs (default: all in --out)")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        files = args.func(args)
    except (BackfillError, OSError) as exc:
        print(f"backfill {args.command}: error: {exc}", file=sys.stderr)
        return 2
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
