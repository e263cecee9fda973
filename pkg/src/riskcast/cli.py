"""Command-line front end: ingest -> forecast -> backtest -> report,
plus the simulators.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
failure. All outputs are plain UTF-8 CSVs with deterministic contents
for a given input and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .backtest import compute_backtest
from .errors import DataError, NumericalError, ParseError
from .forecast import ForecastConfig, ForecastSeries, forecast_models
from .garch import EgarchParams, simulate_egarch, true_var_es
from .llqar import LlqarConfig
from .market_data import LogLossSeries, log_losses, parse_price_csv, summary_stats
from .simstudy import StudyConfig, gamma_profile, run_mc_study

__all__ = ["main", "cli_main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); remap to usage error
        raise _UsageError(message)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _read_loss_csv(path: Path) -> LogLossSeries:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "loss"]:
            raise ParseError("expected header 'date,loss'", row=1)
        dates, losses = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", row=lineno)
            try:
                losses.append(float(row[1]))
            except ValueError:
                raise ParseError(f"bad loss {row[1]!r}", row=lineno) from None
            dates.append(row[0])
    return LogLossSeries(tuple(dates), np.array(losses))


def _parse_list(text: str, cast=float) -> tuple:
    return tuple(cast(tok) for tok in text.split(",") if tok)


# -- subcommands ---------------------------------------------------------------


def _cmd_ingest(args) -> int:
    src = Path(args.prices)
    with open(src, newline="") as fh:
        prices = parse_price_csv(fh)
    series = log_losses(prices)
    stats = summary_stats(series)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(
        out / f"{src.stem}_losses.csv",
        ["date", "loss"],
        zip(series.dates, series.losses),
    )
    _write_rows(
        out / f"{src.stem}_summary.csv",
        ["stat", "value"],
        [
            ("mean", stats.mean),
            ("sd", stats.sd),
            ("skewness", stats.skewness),
            ("excess_kurtosis", stats.excess_kurtosis),
            ("min", stats.min),
            ("max", stats.max),
        ],
    )
    return 0


def _cmd_forecast(args) -> int:
    series = _read_loss_csv(Path(args.losses))
    models = _parse_list(args.model, str)
    alphas = _parse_list(args.alpha)
    llqar_cfg = LlqarConfig(
        bandwidth_rule=args.llqar_rule,
        fixed_h=args.llqar_h,
        es_sublevels=args.llqar_sublevels,
    )
    cfg = ForecastConfig(
        evt_threshold_prob=args.evt_threshold,
        llqar=llqar_cfg,
        caviar_starts=args.caviar_starts,
        caviar_g=args.caviar_g,
        caviar_seed=args.seed,
    )
    fs = forecast_models(series, models, alphas, args.window, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "forecasts.csv", "w", newline="") as fh:
        fs.write_csv(fh)
    return 0


def _read_truth_csv(path: Path) -> dict:
    """Simulated-path CSV -> {column -> array indexed by t}."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ParseError("empty truth file", row=1)
    cols = {name: np.array([float(r[name]) for r in rows]) for name in rows[0] if name != "t"}
    cols["t"] = np.array([int(r["t"]) for r in rows])
    return cols


BACKTEST_HEADER = [
    "model",
    "alpha",
    "n",
    "x",
    "prop",
    "uc_lr",
    "uc_p",
    "cc_lr",
    "cc_p",
    "es_boot_p",
    "v1",
    "v2",
    "v",
    "rmse_var",
    "rmse_es",
]


def _cmd_backtest(args) -> int:
    with open(args.forecasts, newline="") as fh:
        fs = ForecastSeries.read_csv(fh)
    truth = _read_truth_csv(Path(args.truth)) if args.truth else None
    rows = []
    for model, alpha in fs.groups():
        t, losses, var, es, sigma = fs.arrays(model, alpha)
        tv = te = None
        if truth is not None:
            pos = np.searchsorted(truth["t"], t)
            tv = truth[f"true_var_{alpha!r}"][pos]
            te = truth[f"true_es_{alpha!r}"][pos]
        rep = compute_backtest(
            model, alpha, losses, var, es, sigma,
            truth_var=tv, truth_es=te, b=args.bootstrap_b, seed=args.seed,
        )
        rows.append(
            (
                rep.model, rep.alpha_tail, rep.n, rep.x, rep.violation_prop,
                rep.uc_lr, rep.uc_p, rep.cc_lr, rep.cc_p, rep.es_boot_p,
                rep.v1, rep.v2, rep.v, rep.rmse_var, rep.rmse_es,
            )
        )
    rows.sort(key=lambda r: (r[0], r[1]))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "backtest.csv", BACKTEST_HEADER, rows)
    return 0


def _cmd_simulate(args) -> int:
    alphas = _parse_list(args.alphas)
    params = EgarchParams(
        omega=args.egarch_omega,
        alpha=args.egarch_alpha,
        gamma_coef=args.egarch_gamma,
        beta=args.egarch_beta,
        nu=args.egarch_nu,
    )
    profile = gamma_profile(args.scenario, args.n)
    path = simulate_egarch(params, args.n, args.seed, profile)
    header = ["t", "loss", "sigma_true", "gamma"]
    truth_cols = []
    for a in alphas:
        header += [f"true_var_{a!r}", f"true_es_{a!r}"]
        truth_cols.append(true_var_es(path, a))
    rows = []
    for t in range(args.n):
        row = [t, path.losses[t], path.sigma_true[t], path.gamma[t]]
        for tv, te in truth_cols:
            row += [tv[t], te[t]]
        rows.append(row)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "simulated.csv", header, rows)
    return 0


def _apply_overrides(tree: dict, overrides: list[str]) -> dict:
    if len(overrides) % 2 != 0:
        raise _UsageError("overrides must come as '--key value' pairs")
    for key, value in zip(overrides[::2], overrides[1::2]):
        if not key.startswith("--"):
            raise _UsageError(f"expected an option, got {key!r}")
        pathway = key[2:].split(".")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = _parse_list(value, str) if "," in value else value
        if isinstance(parsed, list):
            parsed = tuple(parsed)
        node = tree
        for part in pathway[:-1]:
            node = node.setdefault(part, {})
        node[pathway[-1]] = parsed
    return tree


def _cmd_mc_study(args, overrides: list[str]) -> int:
    tree = {}
    if args.config:
        with open(args.config) as fh:
            tree = json.load(fh)
    tree = _apply_overrides(tree, overrides)
    cfg = StudyConfig.from_dict(tree)
    report = run_mc_study(cfg)
    report.save(args.out_dir)
    return 0


def _cmd_report(args) -> int:
    with open(args.forecasts, newline="") as fh:
        fs = ForecastSeries.read_csv(fh)
    with open(args.backtest, newline="") as fh:
        reader = csv.DictReader(fh)
        back_rows = {(r["model"], r["alpha"]): r for r in reader}
    comparison = []
    long_rows = []
    for model, alpha in fs.groups():
        t, losses, var, es, _ = fs.arrays(model, alpha)
        recs = fs.group(model, alpha)
        back = back_rows.get((model, repr(alpha)), {})
        comparison.append(
            (
                model,
                alpha,
                len(recs),
                back.get("x", ""),
                back.get("prop", ""),
                back.get("uc_p", ""),
                back.get("cc_p", ""),
                back.get("es_boot_p", ""),
                back.get("v", ""),
                float(np.mean(var)),
                float(np.mean(es)) if es is not None else None,
            )
        )
        for r in recs:
            long_rows.append((r.t, r.date, model, alpha, "loss", r.realized_loss))
            long_rows.append((r.t, r.date, model, alpha, "var", r.var))
            if r.es is not None:
                long_rows.append((r.t, r.date, model, alpha, "es", r.es))
    comparison.sort(key=lambda r: (r[0], r[1]))
    long_rows.sort(key=lambda r: (r[2], r[3], r[0], r[4]))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(
        out / "comparison.csv",
        ["model", "alpha", "n_forecasts", "x", "prop", "uc_p", "cc_p", "es_boot_p", "v", "mean_var", "mean_es"],
        comparison,
    )
    _write_rows(
        out / "long.csv",
        ["t", "date", "model", "alpha", "series", "value"],
        long_rows,
    )
    return 0


# -- argument wiring -----------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="riskcast", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("ingest", help="prices CSV -> losses + summary stats")
    p.add_argument("prices")
    p.add_argument("-o", "--out-dir", default=".")

    p = sub.add_parser("forecast", help="rolling one-step VaR/ES forecasts")
    p.add_argument("losses")
    p.add_argument("--model", required=True, help="comma-separated model ids")
    p.add_argument("--alpha", default="0.05,0.01")
    p.add_argument("--window", type=int, default=250)
    p.add_argument("--evt-threshold", type=float, default=0.90)
    p.add_argument("--llqar-rule", default="rot", choices=["rot", "qcv", "fixed"])
    p.add_argument("--llqar-h", type=float, default=None)
    p.add_argument("--llqar-sublevels", type=int, default=20)
    p.add_argument("--caviar-starts", type=int, default=25)
    p.add_argument("--caviar-g", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out-dir", default=".")

    p = sub.add_parser("backtest", help="coverage and ES tests of a forecast CSV")
    p.add_argument("forecasts")
    p.add_argument("--truth", default=None, help="simulated.csv with true VaR/ES columns")
    p.add_argument("--bootstrap-b", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out-dir", default=".")

    p = sub.add_parser("simulate", help="simulate a loss path with known truth")
    p.add_argument("--scenario", default="constant", choices=["constant", "step", "smooth"])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--alphas", default="0.05,0.01")
    p.add_argument("--egarch-omega", type=float, default=-0.40)
    p.add_argument("--egarch-alpha", type=float, default=-0.09)
    p.add_argument("--egarch-gamma", type=float, default=0.16)
    p.add_argument("--egarch-beta", type=float, default=0.96)
    p.add_argument("--egarch-nu", type=float, default=6.0)
    p.add_argument("-o", "--out-dir", default=".")

    p = sub.add_parser("mc-study", help="Monte Carlo study from a JSON config")
    p.add_argument("--config", default=None)
    p.add_argument("-o", "--out-dir", default="study-out")

    p = sub.add_parser("report", help="join forecasts and backtests into tables")
    p.add_argument("--forecasts", required=True)
    p.add_argument("--backtest", required=True)
    p.add_argument("-o", "--out-dir", default=".")

    return parser


def cli_main(argv=None) -> int:
    parser = _build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and argv[0] == "mc-study":
            args, overrides = parser.parse_known_args(argv)
            return _cmd_mc_study(args, overrides)
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required")
        handler = {
            "ingest": _cmd_ingest,
            "forecast": _cmd_forecast,
            "backtest": _cmd_backtest,
            "simulate": _cmd_simulate,
            "report": _cmd_report,
        }[args.command]
        return handler(args)
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as err:  # argparse --help
        return int(err.code or 0)
    except (DataError, OSError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_main())
