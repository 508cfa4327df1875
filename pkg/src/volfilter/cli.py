"""Command-line front end.

Subcommands wire the library end to end: ``simulate`` writes synthetic
joint paths, ``estimate`` runs any of the four estimators over prices or
returns, ``analyze`` emits the diagnostic tables (pdf, acf, leverage,
mfpt), ``predict`` runs the conditional-median regressions and the
horizon scan, and ``compare`` reports the ML-vs-deconvolution variance
ratio per model.

Everything is seeded and deterministic: the same flags produce byte-
identical output files, regardless of ``--threads``. The default seed
comes from the VOLFILTER_SEED environment variable (0 if unset).

Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 computation failure. No plotting here — outputs are plot-ready
tab-separated tables.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import dataio, stats
from .dataio import DataError
from .estimator import (
    EstimationError,
    InsufficientDataError,
    MlConfig,
    ReturnSeries,
    VolSeries,
    estimate_series,
    sigma_decon,
    sigma_gbm,
    sigma_prop,
)
from .models import ModelKind, ModelParams, ModelSpec, load_preset, load_spec, preset_names
from .sim import SimConfig, simulate_path


class UsageError(Exception):
    """Bad flag combination detected after parsing."""


class _Parser(argparse.ArgumentParser):
    # Spec'd exit-code contract: usage errors are 1, not argparse's 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get("VOLFILTER_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"VOLFILTER_SEED must be an integer, got {raw!r}") from None


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model selection (flags > --config > --preset)")
    g.add_argument("--preset", help=f"bundled parameter set, one of {preset_names()}")
    g.add_argument("--config", help="flat key-value model config file")
    g.add_argument("--model", choices=[k.value for k in ModelKind], help="model kind")
    g.add_argument("--k", type=float, help="volatility-of-volatility (day^-1/2)")
    g.add_argument("--alpha", type=float, help="reversion rate (1/day)")
    g.add_argument("--m", type=float, help="normal volatility level (per day)")


def _resolve_spec(args, required: bool = True) -> ModelSpec | None:
    fields: dict = {}
    if args.preset:
        try:
            spec = load_preset(args.preset)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        fields = {"model": spec.kind.value, "k": spec.k, "alpha": spec.alpha, "m": spec.m}
    if args.config:
        spec = load_spec(args.config)
        fields.update(model=spec.kind.value, k=spec.k, alpha=spec.alpha, m=spec.m)
    for name in ("model", "k", "alpha", "m"):
        value = getattr(args, name)
        if value is not None:
            fields[name] = value
    if not fields:
        if required:
            raise UsageError("no model given: use --preset, --config, or --model with --k/--alpha/--m")
        return None
    missing = {"model", "k", "alpha", "m"} - fields.keys()
    if missing:
        raise UsageError(f"incomplete model spec, missing {sorted(missing)}")
    params = ModelParams(k=float(fields["k"]), alpha=float(fields["alpha"]), m=float(fields["m"]))
    return ModelSpec(ModelKind(fields["model"]), params)


def _load_returns(args) -> ReturnSeries:
    if getattr(args, "returns", None) and getattr(args, "prices", None):
        raise UsageError("give either --returns or --prices, not both")
    if getattr(args, "returns", None):
        obj = dataio.load_series(args.returns)
        if not isinstance(obj, ReturnSeries):
            raise DataError(f"{args.returns}: expected a ReturnSeries file")
        return obj
    if getattr(args, "prices", None):
        return dataio.to_returns(dataio.load_prices(args.prices))
    raise UsageError("an input is required: --returns FILE or --prices FILE")


def _load_vol(path) -> VolSeries:
    obj = dataio.load_series(path)
    if not isinstance(obj, VolSeries):
        raise DataError(f"{path}: expected a VolSeries file")
    return obj


def _parse_horizons(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, _, hi = part.partition("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out or any(h < 1 for h in out):
        raise UsageError(f"bad horizon list {text!r}")
    return out


def _parse_thresholds(text: str) -> np.ndarray:
    if ":" in text:
        lo, hi, n = text.split(":")
        return np.geomspace(float(lo), float(hi), int(n))
    return np.array([float(p) for p in text.split(",") if p.strip()], dtype=float)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    spec = _resolve_spec(args)
    if args.y0 == "stationary":
        y0 = None
    else:
        try:
            y0 = float(args.y0)
        except ValueError:
            raise UsageError(f"--y0 must be a number or 'stationary', got {args.y0!r}") from None
    cfg = SimConfig(spec=spec, n_steps=args.steps, dt=args.dt, seed=args.seed, y0=y0)
    path = simulate_path(cfg)
    dataio.save_series(args.out, path)
    return 0


def cmd_estimate(args) -> int:
    returns = _load_returns(args)
    name = args.estimator
    if name == "gbm":
        level = sigma_gbm(returns)
        vol = VolSeries(np.full(len(returns), level), "gbm")
    elif name == "prop":
        vol = sigma_prop(returns)
    elif name == "decon":
        vol = sigma_decon(returns, args.seed)
    else:
        spec = _resolve_spec(args)
        if args.iterations < 1000:
            print(
                f"warning: --iterations {args.iterations} is low; "
                "estimates will be rough (default is 100000)",
                file=sys.stderr,
            )
        cfg = MlConfig(
            window=args.window,
            iterations=args.iterations,
            seed=args.seed,
            vol_floor=args.vol_floor,
        )
        vol = estimate_series(returns, spec, cfg, threads=args.threads)
    dataio.save_series(args.out, vol)
    return 0


def cmd_analyze(args) -> int:
    what = args.what
    if what == "pdf":
        if bool(args.returns or args.prices) == bool(args.vol):
            raise UsageError("pdf needs exactly one input: returns/prices or --vol")
        if args.vol:
            samples = _load_vol(args.vol).values()
            source = "sigma"
        else:
            samples = _load_returns(args).dx
            source = "dx"
        hist = stats.pdf(samples, bins=args.bins, scale=args.scale)
        dataio.write_table(
            args.out,
            {
                "operation": "pdf", "source": source, "scale": hist.scale,
                "bins": args.bins, "n_samples": int(hist.counts.sum()),
            },
            [
                ("bin_left", list(hist.edges[:-1])),
                ("bin_right", list(hist.edges[1:])),
                ("center", list(hist.centers)),
                ("count", list(hist.counts)),
                ("density", list(hist.density)),
            ],
        )
    elif what == "acf":
        if not args.vol:
            raise UsageError("acf needs --vol FILE")
        vol = _load_vol(args.vol)
        acf = stats.autocorrelation(vol, max_lag=args.max_lag)
        dataio.write_table(
            args.out,
            {"operation": "acf", "estimator": vol.estimator_name,
             "max_lag": args.max_lag, "n": int(len(vol))},
            [("lag", list(range(args.max_lag + 1))), ("acf", list(acf))],
        )
    elif what == "leverage":
        if not (args.vol and (args.returns or args.prices)):
            raise UsageError("leverage needs --vol and returns/prices input")
        vol = _load_vol(args.vol)
        returns = _load_returns(args)
        if len(vol) != len(returns):
            raise DataError("returns and volatility series are not aligned")
        valid = vol.valid_mask
        taus, vals = stats.leverage(returns.dx[valid], vol.sigma[valid], max_lag=args.max_lag)
        dataio.write_table(
            args.out,
            {"operation": "leverage", "estimator": vol.estimator_name,
             "max_lag": args.max_lag, "n": int(valid.sum())},
            [("lag", list(taus)), ("leverage", list(vals))],
        )
    elif what == "mfpt":
        returns = _load_returns(args)
        if args.sigma_s is not None:
            sigma_s = args.sigma_s
        else:
            spec = _resolve_spec(args, required=False)
            if spec is None:
                raise UsageError("mfpt needs --sigma-s or a model spec to derive it from")
            from .models import stationary_vol_mean

            sigma_s = stationary_vol_mean(spec)
        thresholds = _parse_thresholds(args.thresholds)
        curve = stats.mfpt(np.abs(returns.dx), sigma_s, thresholds)
        dataio.write_table(
            args.out,
            {
                "operation": "mfpt", "sigma_s": sigma_s, "n": len(returns),
                "start_set": "every index below threshold",
                "censoring": "counted, excluded from the mean",
            },
            [
                ("L", list(curve.thresholds)),
                ("lambda", list(curve.lambdas)),
                ("mfpt_days", list(curve.mfpt)),
                ("crossed", list(curve.crossed)),
                ("censored", list(curve.censored)),
            ],
        )
    return 0


def cmd_predict(args) -> int:
    prefix = args.out_prefix
    if args.from_gamma:
        meta, columns = dataio.read_table(args.from_gamma)
        hs = np.array([int(float(v)) for v in columns["h"]])
        gam = np.array([float(v) for v in columns["gamma"]])
        err = np.array([float(v) for v in columns.get("stderr", ["nan"] * len(gam))])
        scan = stats.GammaScan(horizons=hs, gamma=gam, stderr=err)
    else:
        returns = _load_returns(args)
        vol = _load_vol(args.vol) if args.vol else None
        if vol is None:
            raise UsageError("predict needs --vol FILE (or --from-gamma)")
        if len(vol) != len(returns):
            raise DataError("returns and volatility series are not aligned")
        horizons = _parse_horizons(args.horizons)

        ls, lx = stats.log_pairs(vol, returns, horizon=horizons[0])
        curve, fit = stats.conditional_median_regression(
            ls, lx, n_bins=args.bins, min_count=args.min_count
        )
        dataio.write_table(
            f"{prefix}median.tsv",
            {
                "operation": "conditional_median", "horizon": horizons[0],
                "slope": fit.slope, "intercept": fit.intercept,
                "slope_stderr": fit.slope_stderr,
            },
            [
                ("ln_sigma_center", list(curve.centers)),
                ("median_ln_abs_dx", list(curve.medians)),
                ("q1", list(curve.q1)),
                ("q3", list(curve.q3)),
                ("count", list(curve.counts)),
            ],
        )
        scan = stats.gamma_horizon_scan(
            returns, vol, horizons, n_bins=args.bins, min_count=args.min_count
        )
        dataio.write_table(
            f"{prefix}gamma.tsv",
            {"operation": "gamma_scan", "horizons": args.horizons},
            [
                ("h", list(scan.horizons)),
                ("gamma", list(scan.gamma)),
                ("stderr", list(scan.stderr)),
            ],
        )
    fits = stats.fit_gamma_loglinear(scan, split_h=args.split_h)
    if args.split_h is None:
        segments = ["all"]
    else:
        segments = [f"h<{args.split_h}", f"h>{args.split_h}"]
    dataio.write_table(
        f"{prefix}gammafit.tsv",
        {"operation": "gamma_loglinear_fit", "split_h": args.split_h},
        [
            ("segment", segments),
            ("a", [f.slope for f in fits]),
            ("b", [f.intercept for f in fits]),
            ("a_stderr", [f.slope_stderr for f in fits]),
        ],
    )
    return 0


def cmd_compare(args) -> int:
    returns = _load_returns(args)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    rows = []
    decon = sigma_decon(returns, args.seed)
    for name in models:
        if name not in [k.value for k in ModelKind]:
            raise UsageError(f"unknown model {name!r} in --models")
        spec = load_preset(f"dji-{name}")
        if args.force_decon:
            est = decon
        else:
            cfg = MlConfig(
                window=args.window, iterations=args.iterations,
                seed=args.seed, vol_floor=args.vol_floor,
            )
            est = estimate_series(returns, spec, cfg, threads=args.threads)
        ratio = stats.variance_ratio(est, decon)
        both = est.valid_mask & decon.valid_mask
        rows.append((
            name,
            float(np.var(est.sigma[both])),
            float(np.var(decon.sigma[both])),
            ratio,
        ))
    dataio.write_table(
        args.out,
        {
            "operation": "variance_ratio", "window": args.window,
            "iterations": args.iterations, "seed": args.seed,
            "estimators": "decon" if args.force_decon else "ml vs decon",
        },
        [
            ("model", [r[0] for r in rows]),
            ("var_est", [r[1] for r in rows]),
            ("var_decon", [r[2] for r in rows]),
            ("ratio", [r[3] for r in rows]),
        ],
    )
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="volfilter", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    seed_default = None  # resolved lazily so the env var is read at run time

    p = sub.add_parser("simulate", help="simulate a joint (x, y, sigma) path")
    _add_model_flags(p)
    p.add_argument("--steps", type=int, required=True, help="number of Euler steps")
    p.add_argument("--dt", type=float, default=1.0, help="time step in days (default 1)")
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--y0", default="stationary", help="start state, a number or 'stationary'")
    p.add_argument("--out", required=True, help="output path file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate per-day volatility from returns")
    p.add_argument("--returns", help="ReturnSeries file")
    p.add_argument("--prices", help="CSV of date,close to build returns from")
    p.add_argument("--estimator", required=True, choices=["gbm", "prop", "decon", "ml"])
    _add_model_flags(p)
    p.add_argument("--window", type=int, default=10, help="trailing window length s")
    p.add_argument("--iterations", type=int, default=100_000, help="candidates per window I")
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--vol-floor", type=float, default=1e-6)
    p.add_argument("--threads", type=int, default=1, help="window-level parallelism")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("analyze", help="diagnostic tables from series files")
    p.add_argument("--what", required=True, choices=["pdf", "acf", "leverage", "mfpt"])
    p.add_argument("--returns", help="ReturnSeries file")
    p.add_argument("--prices", help="CSV of date,close")
    p.add_argument("--vol", help="VolSeries file")
    p.add_argument("--max-lag", type=int, default=100)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--scale", choices=["linear", "log"], default="linear")
    p.add_argument("--thresholds", default="0.1:10:30", help="L grid, 'lo:hi:n' or comma list")
    p.add_argument("--sigma-s", type=float, help="stationary mean volatility for mfpt")
    _add_model_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("predict", help="conditional-median regressions and horizon decay")
    p.add_argument("--returns", help="ReturnSeries file")
    p.add_argument("--prices", help="CSV of date,close")
    p.add_argument("--vol", help="VolSeries file")
    p.add_argument("--horizons", default="1..100", help="e.g. '1..100' or '1,5,20'")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--min-count", type=int, default=30)
    p.add_argument("--split-h", type=int, default=7, help="two-regime split day (default 7)")
    p.add_argument("--no-split", action="store_true", help="fit one segment over all horizons")
    p.add_argument("--from-gamma", help="fit a previously written gamma table instead")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", help="ML vs deconvolution variance ratio per model")
    p.add_argument("--returns", help="ReturnSeries file")
    p.add_argument("--prices", help="CSV of date,close")
    p.add_argument("--models", default="expou,ou,heston")
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--iterations", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--vol-floor", type=float, default=1e-6)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--force-decon", action="store_true",
                   help="use the deconvoluted series on both sides (self check)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "seed", None) is None and hasattr(args, "seed"):
            args.seed = _default_seed()
        if getattr(args, "no_split", False):
            args.split_h = None
        return args.func(args)
    except UsageError as exc:
        print(f"volfilter: usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, InsufficientDataError) as exc:
        print(f"volfilter: data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"volfilter: invalid input: {exc}", file=sys.stderr)
        return 2
    except (EstimationError, ArithmeticError) as exc:
        print(f"volfilter: computation failed: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"volfilter: i/o error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # last resort: report, never traceback-spam
        print(f"volfilter: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
