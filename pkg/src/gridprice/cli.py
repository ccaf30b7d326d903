"""Command-line entry point: ``gridprice <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 failure of one or more ISOs/stages.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import market_data, pipeline
from .errors import GridPriceError
from .market_data import IsoId

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2

logger = logging.getLogger("gridprice")


def _taus(text):
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad quantile list {text!r}") from None


def _tz(args):
    if getattr(args, "iso", None):
        return IsoId.parse(args.iso).timezone
    return getattr(args, "tz", None) or "UTC"


def cmd_ingest(args):
    cache = os.environ.get("GRIDPRICE_CACHE") or args.cache
    if not cache:
        raise SystemExit("ingest: --cache or GRIDPRICE_CACHE is required")
    frame = market_data.ingest(args.iso, market_data.parse_date(args.date_from),
                               market_data.parse_date(args.date_to), cache)
    market_data.write_hourly_csv(frame, args.out_csv)
    logger.info("wrote %d hourly rows to %s", len(frame), args.out_csv)
    return EXIT_OK


def cmd_detrend(args):
    hourly = market_data.read_hourly_csv(args.input)
    residuals, fit = pipeline.detrend_stage(hourly, _tz(args))
    market_data.write_frame_csv(residuals, args.out_residuals)
    pipeline._write_csv(fit.coefficients_frame(), Path(args.out_coefficients))
    return EXIT_OK


def cmd_volatility(args):
    residuals = market_data.read_frame_csv(args.input)
    out, _ = pipeline.volatility_stage(residuals, args.lam, args.warmup)
    market_data.write_frame_csv(out, args.out_csv)
    return EXIT_OK


def cmd_qreg(args):
    frame = market_data.read_frame_csv(args.input)
    x, y = pipeline.regression_pairs(frame, args.target, args.warmup)
    info = pipeline.qreg_stage(x, y, args.tau, args.knots, args.degree, args.grid_points,
                               Path(args.out_dir))
    print(json.dumps(info, sort_keys=True))
    return EXIT_OK


def cmd_skewt(args):
    frame = market_data.read_frame_csv(args.input)
    name = IsoId.parse(args.iso).value if args.iso else Path(args.input).stem
    info = pipeline.skewt_stage(frame, name, args.grid_points, args.mc_draws, args.seed,
                                Path(args.out_dir))
    print(json.dumps(info, sort_keys=True))
    return EXIT_OK


def cmd_report(args):
    frame = market_data.read_frame_csv(args.input)
    name = IsoId.parse(args.iso).value if args.iso else Path(args.input).stem
    checks = pipeline.report_stage(frame, name, args.warmup, Path(args.out_dir),
                                   untrimmed=args.untrimmed)
    print(json.dumps(checks, sort_keys=True))
    return EXIT_OK


def cmd_run(args):
    if args.config:
        config = pipeline.RunConfig.from_file(args.config, seed=args.seed, output_dir=args.out)
    else:
        overrides = {k: v for k, v in (("seed", args.seed), ("output_dir", args.out)) if v is not None}
        config = pipeline.RunConfig(**overrides)
    manifest = pipeline.run_pipeline(config)
    for entry in manifest["isos"]:
        line = f"{entry['iso']}: {entry['status']}"
        if entry["status"] != "ok":
            line += f" ({entry['failed_stage']}: {entry['error']})"
        print(line)
    return pipeline.exit_code(manifest)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value run configuration file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory (run) or file/dir")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gridprice",
                                     description="VRE penetration vs. electricity price analytics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="build canonical hourly CSV from raw cache")
    p.add_argument("--iso", type=IsoId.parse, required=True)
    p.add_argument("--from", dest="date_from", required=True)
    p.add_argument("--to", dest="date_to", required=True)
    p.add_argument("--cache")
    p.set_defaults(func=cmd_ingest, out_key="out_csv")

    p = sub.add_parser("detrend", parents=[common], help="remove hour/season/weekend pattern")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-residuals", required=True)
    p.add_argument("--out-coefficients", required=True)
    p.add_argument("--iso", type=IsoId.parse, help="take the local clock from this ISO")
    p.add_argument("--tz", help="IANA time zone for hour-of-day coding (default UTC)")
    p.set_defaults(func=cmd_detrend)

    p = sub.add_parser("volatility", parents=[common], help="EWMSD of detrended price")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.94)
    p.add_argument("--warmup", type=int, default=50)
    p.set_defaults(func=cmd_volatility, out_key="out_csv")

    p = sub.add_parser("qreg", parents=[common], help="B-spline quantile regression")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--target", choices=("price", "volatility"), required=True)
    p.add_argument("--tau", type=_taus, default=None)
    p.add_argument("--knots", type=int, default=3)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--warmup", type=int, default=50)
    p.add_argument("--grid-points", type=int, default=400)
    p.set_defaults(func=cmd_qreg, out_key="out_dir")

    p = sub.add_parser("skewt", parents=[common], help="skew-t regression on VRE")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--iso", type=IsoId.parse)
    p.add_argument("--grid-points", type=int, default=400)
    p.add_argument("--mc-draws", type=int, default=1000)
    p.set_defaults(func=cmd_skewt, out_key="out_dir")

    p = sub.add_parser("report", parents=[common], help="summary statistics and frequency checks")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--iso", type=IsoId.parse)
    p.add_argument("--warmup", type=int, default=50)
    p.add_argument("--untrimmed", action="store_true", help="also summarise EWMSD including warm-up")
    p.set_defaults(func=cmd_report, out_key="out_dir")

    p = sub.add_parser("run", parents=[common], help="full pipeline from a config file")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_key = getattr(args, "out_key", None)
    if out_key:
        if args.out is None:
            print(f"gridprice {args.command}: --out is required", file=sys.stderr)
            return EXIT_USAGE
        setattr(args, out_key, args.out)
    if args.command == "qreg" and args.tau is None:
        from .quantile_regression import PRICE_TAUS, VOLATILITY_TAUS
        args.tau = PRICE_TAUS if args.target == "price" else VOLATILITY_TAUS
    if args.command in ("skewt",) and args.seed is None:
        args.seed = pipeline.DEFAULT_SEED
    try:
        return args.func(args)
    except (GridPriceError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"gridprice {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
