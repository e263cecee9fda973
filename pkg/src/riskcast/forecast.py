"""Per-model one-step VaR/ES formulas and the rolling forecast driver.

The driver walks windows in time order and, inside each window, fits
every requested model once: a GARCH likelihood fitted for one
innovation law is shared by the plain, distribution-free and GPD-tail
variants, and by every tail level. Window fits that fail fall back to
the previous window's fit (or the best iterate found) and mark the
record, so a run never aborts on a single bad window.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import Dist, quantile, upper_tail_mean
from .errors import (
    DegenerateBandwidth,
    DegenerateWeights,
    DomainError,
    FitError,
    ForecastError,
    InsufficientData,
    InsufficientTail,
    ParseError,
)
from .evt import GpdFit, fit_gpd, gpd_tail_es, gpd_tail_quantile, select_threshold
from .garch import FittedGarch, SimPath, fit_garch, forecast_sigma, true_var_es
from .llqar import (
    LlqarConfig,
    es_sublevels,
    llqar_forecasts,
    monotone_repair,
    qcv_bandwidth,
    rot_bandwidth,
    scaled_distances,
)
from .market_data import LogLossSeries, rolling_windows
from .quantile_regression import caviar_fit, caviar_forecast, weighted_linear_qr_path

__all__ = [
    "MODEL_IDS",
    "CAVIAR_MODELS",
    "GARCH_BASED_MODELS",
    "ForecastConfig",
    "ForecastRecord",
    "ForecastSeries",
    "var_es_ngarch",
    "var_es_tgarch",
    "var_es_dfgarch",
    "var_es_gpdgarch",
    "rolling_forecast",
    "forecast_models",
]

MODEL_IDS = (
    "nGARCH",
    "tGARCH",
    "DFGARCH",
    "gpdNGARCH",
    "gpdTGARCH",
    "QAR1",
    "LLQAR",
    "CAViaR-SAV",
    "CAViaR-AS",
    "CAViaR-IG",
    "CAViaR-Adaptive",
    "Oracle",
)

CAVIAR_MODELS = {
    "CAViaR-SAV": "SAV",
    "CAViaR-AS": "AS",
    "CAViaR-IG": "IndirectGarch",
    "CAViaR-Adaptive": "Adaptive",
}

GARCH_BASED_MODELS = ("nGARCH", "tGARCH", "DFGARCH", "gpdNGARCH", "gpdTGARCH")

FLAG_CARRIED = "carried-forward-fit"
FLAG_WEIGHT_FALLBACK = "weight-fallback"


@dataclass(frozen=True)
class ForecastConfig:
    """Knobs shared by every model in a rolling run."""

    evt_threshold_prob: float = 0.90
    llqar: LlqarConfig = field(default_factory=LlqarConfig)
    caviar_starts: int = 25
    caviar_g: float = 10.0
    caviar_seed: int = 0
    sim_path: SimPath | None = None


@dataclass(frozen=True)
class ForecastRecord:
    t: int
    date: str
    realized_loss: float
    var: float
    es: float | None
    model: str
    alpha_tail: float
    flags: tuple[str, ...] = ()
    sigma: float | None = None  # conditional SD when the model has one


@dataclass(frozen=True)
class ForecastSeries:
    records: tuple[ForecastRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def group(self, model: str, alpha_tail: float) -> list[ForecastRecord]:
        return [
            r for r in self.records if r.model == model and r.alpha_tail == alpha_tail
        ]

    def groups(self) -> list[tuple[str, float]]:
        seen: list[tuple[str, float]] = []
        for r in self.records:
            key = (r.model, r.alpha_tail)
            if key not in seen:
                seen.append(key)
        return seen

    def arrays(self, model: str, alpha_tail: float):
        """(t, losses, var, es, sigma) arrays for one model/level group;
        es and sigma are None when absent for the model."""
        recs = self.group(model, alpha_tail)
        t = np.array([r.t for r in recs], dtype=int)
        losses = np.array([r.realized_loss for r in recs])
        var = np.array([r.var for r in recs])
        es = None
        if recs and recs[0].es is not None:
            es = np.array([r.es for r in recs])
        sigma = None
        if recs and recs[0].sigma is not None:
            sigma = np.array([r.sigma for r in recs])
        return t, losses, var, es, sigma

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "date", "loss", "model", "alpha", "var", "es", "flags"])
        for r in self.records:
            writer.writerow(
                [
                    r.t,
                    r.date,
                    repr(float(r.realized_loss)),
                    r.model,
                    repr(float(r.alpha_tail)),
                    repr(float(r.var)),
                    "" if r.es is None else repr(float(r.es)),
                    ";".join(r.flags),
                ]
            )

    @staticmethod
    def read_csv(fh) -> "ForecastSeries":
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:8] != ["t", "date", "loss", "model", "alpha", "var", "es", "flags"]:
            raise ParseError("expected a forecast CSV header", row=1)
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                records.append(
                    ForecastRecord(
                        t=int(row[0]),
                        date=row[1],
                        realized_loss=float(row[2]),
                        var=float(row[5]),
                        es=float(row[6]) if row[6] != "" else None,
                        model=row[3],
                        alpha_tail=float(row[4]),
                        flags=tuple(f for f in row[7].split(";") if f),
                    )
                )
            except (ValueError, IndexError):
                raise ParseError("malformed forecast row", row=lineno) from None
        return ForecastSeries(tuple(records))


# -- closed-form per-model formulas -------------------------------------------


def var_es_ngarch(sigma: float, alpha_tail: float) -> tuple[float, float]:
    """Normal-innovation VaR/ES scaled by the conditional SD."""
    _check_sigma_alpha(sigma, alpha_tail)
    d = Dist.normal()
    return sigma * quantile(d, 1.0 - alpha_tail), sigma * upper_tail_mean(d, alpha_tail)


def var_es_tgarch(sigma: float, nu: float, alpha_tail: float) -> tuple[float, float]:
    """Unit-variance-t VaR/ES scaled by the conditional SD."""
    _check_sigma_alpha(sigma, alpha_tail)
    if not nu > 2.0:
        raise DomainError("nu must exceed 2")
    d = Dist.standardized_t(nu)
    return sigma * quantile(d, 1.0 - alpha_tail), sigma * upper_tail_mean(d, alpha_tail)


def var_es_dfgarch(sigma: float, std_residuals, alpha_tail: float) -> tuple[float, float]:
    """Distribution-free VaR/ES from the standardized residuals.

    VaR scales the empirical upper quantile; ES scales the mean of the
    ceil(alpha * n) largest residuals.
    """
    _check_sigma_alpha(sigma, alpha_tail)
    r = np.asarray(std_residuals, dtype=float)
    if r.size < 1.0 / alpha_tail:
        raise InsufficientData("too few residuals for this tail level")
    k = math.ceil(alpha_tail * r.size)
    top = np.sort(r)[-k:]
    return sigma * float(np.quantile(r, 1.0 - alpha_tail)), sigma * float(np.mean(top))


def var_es_gpdgarch(sigma: float, f: GpdFit, alpha_tail: float) -> tuple[float, float]:
    """GPD-tail VaR/ES on the residual scale, scaled by the SD."""
    _check_sigma_alpha(sigma, alpha_tail)
    q_hat = gpd_tail_quantile(f, alpha_tail)
    return sigma * q_hat, sigma * gpd_tail_es(f, q_hat)


def _check_sigma_alpha(sigma: float, alpha_tail: float) -> None:
    if sigma < 0.0 or not math.isfinite(sigma):
        raise DomainError("sigma must be finite and nonnegative")
    if not 0.0 < alpha_tail < 0.5:
        raise DomainError("tail probability must lie in (0, 0.5)")


# -- rolling driver ------------------------------------------------------------


def _qar1_forecasts(values: np.ndarray, alphas, k: int) -> dict[float, tuple[float, float]]:
    """Lag-1 linear quantile (VaR, ES) per tail level, jointly repaired.

    Used both for the plain autoregressive model and as the fallback
    when the local kernel weights underflow. Mirrors the local
    estimator's construction: midpoint ES sub-levels and a monotone
    repair across the whole fitted level ladder.
    """
    y, lagged = values[1:], values[:-1]
    levels: list[float] = []
    for a in alphas:
        levels.append(1.0 - a)
        levels.extend(1.0 - s for s in es_sublevels(a, k))
    arr = np.array(levels)
    ones = np.ones(y.size)
    if np.ptp(lagged) == 0.0:
        fits = weighted_linear_qr_path(ones[:, None], y, ones, arr)
        values_at = np.array([float(f.beta[0]) for f in fits])
    else:
        design = np.column_stack([ones, lagged])
        fits = weighted_linear_qr_path(design, y, ones, arr)
        values_at = np.array([float(f.beta[0] + f.beta[1] * values[-1]) for f in fits])
    repaired = monotone_repair(arr, values_at)
    out: dict[float, tuple[float, float]] = {}
    pos = 0
    for a in alphas:
        var = float(repaired[pos])
        es = max(float(np.mean(repaired[pos + 1 : pos + 1 + k])), var)
        out[a] = (var, es)
        pos += 1 + k
    run_var = run_es = -math.inf
    for a in sorted(out, reverse=True):
        var, es = out[a]
        run_var = max(run_var, var)
        run_es = max(run_es, es, run_var)
        out[a] = (run_var, run_es)
    return out


class _GarchState:
    """Carry-forward state for one innovation law."""

    def __init__(self, innovation: str):
        self.innovation = innovation
        self.last: FittedGarch | None = None

    def fit(self, values: np.ndarray) -> tuple[FittedGarch, bool]:
        try:
            fitted = fit_garch(values, self.innovation)
            self.last = fitted
            return fitted, False
        except FitError as err:
            if self.last is not None:
                return self.last, True
            self.last = err.best
            return err.best, True


class _TailState:
    """Carry-forward state for one GPD-tail model."""

    def __init__(self, threshold_prob: float):
        self.threshold_prob = threshold_prob
        self.last: GpdFit | None = None

    def fit(self, residuals: np.ndarray, n_total: int) -> tuple[GpdFit | None, bool]:
        try:
            u, exceed = select_threshold(residuals, self.threshold_prob)
            zeta, psi = fit_gpd(exceed)
            fitted = GpdFit(zeta, psi, u, n_total, exceed.size)
            self.last = fitted
            return fitted, False
        except FitError as err:
            try:
                u, exceed = select_threshold(residuals, self.threshold_prob)
                zeta, psi = err.best
                fitted = GpdFit(zeta, psi, u, n_total, exceed.size)
                self.last = fitted
                return fitted, True
            except (InsufficientTail, DomainError):
                pass
        except (InsufficientTail, DomainError):
            pass
        return (self.last, True) if self.last is not None else (None, True)


def rolling_forecast(
    series: LogLossSeries,
    model: str,
    alpha_tail: float,
    w: int = 250,
    config: ForecastConfig | None = None,
) -> ForecastSeries:
    """Rolling one-step forecasts of a single model at a single level."""
    return forecast_models(series, [model], [alpha_tail], w, config)


def forecast_models(
    series: LogLossSeries,
    models,
    alphas,
    w: int = 250,
    config: ForecastConfig | None = None,
) -> ForecastSeries:
    """Rolling one-step forecasts for several models and tail levels.

    Walks the windows once; each record corresponds to one (target,
    model, level) triple, and the output is ordered by (model, level,
    target). Requires ``config.sim_path`` when the Oracle model is
    requested.
    """
    cfg = config or ForecastConfig()
    models = list(models)
    alphas = sorted(set(float(a) for a in alphas))
    for m in models:
        if m not in MODEL_IDS:
            raise DomainError(f"unknown model {m!r}")
    for a in alphas:
        if not 0.0 < a < 0.5:
            raise DomainError("tail probability must lie in (0, 0.5)")
    if "Oracle" in models and cfg.sim_path is None:
        raise DomainError("the Oracle model needs the simulated path in config.sim_path")

    losses = np.asarray(series.losses, dtype=float)
    dates = series.dates
    windows = list(rolling_windows(series, w))

    need_normal = any(m in ("nGARCH", "DFGARCH", "gpdNGARCH") for m in models)
    need_t = any(m in ("tGARCH", "gpdTGARCH") for m in models)
    garch_states: dict[str, _GarchState] = {}
    if need_normal:
        garch_states["normal"] = _GarchState("normal")
    if need_t:
        garch_states["standardized-t"] = _GarchState("standardized-t")
    tail_states = {
        m: _TailState(cfg.evt_threshold_prob)
        for m in models
        if m in ("gpdNGARCH", "gpdTGARCH")
    }
    caviar_prev: dict[tuple[str, float], float] = {}

    oracle_truth = {}
    if "Oracle" in models:
        for a in alphas:
            oracle_truth[a] = true_var_es(cfg.sim_path, a)

    llqar_frozen_h: dict[float, float] = {}
    if "LLQAR" in models and cfg.llqar.bandwidth_rule == "qcv":
        first = windows[0].values
        for a in alphas:
            llqar_frozen_h[a] = qcv_bandwidth(first, a, cfg.llqar.qcv_grid).h

    records: list[ForecastRecord] = []
    for win in windows:
        values = win.values
        target = win.target
        date = dates[target]
        realized = float(losses[target])
        last = float(values[-1])

        fits: dict[str, tuple[FittedGarch, bool]] = {}
        for kind, state in garch_states.items():
            fits[kind] = state.fit(values)

        for model in models:
            if model in GARCH_BASED_MODELS:
                kind = "standardized-t" if model in ("tGARCH", "gpdTGARCH") else "normal"
                fitted, carried = fits[kind]
                sig = forecast_sigma(fitted, last)
                flags = (FLAG_CARRIED,) if carried else ()
                if model in ("nGARCH", "tGARCH"):
                    for a in alphas:
                        if model == "nGARCH":
                            v, e = var_es_ngarch(sig, a)
                        else:
                            v, e = var_es_tgarch(sig, fitted.params.nu, a)
                        records.append(
                            ForecastRecord(target, date, realized, v, e, model, a, flags, sig)
                        )
                elif model == "DFGARCH":
                    for a in alphas:
                        v, e = var_es_dfgarch(sig, fitted.std_residuals, a)
                        records.append(
                            ForecastRecord(target, date, realized, v, e, model, a, flags, sig)
                        )
                else:
                    tail_fit, tail_carried = tail_states[model].fit(
                        fitted.std_residuals, values.size
                    )
                    tflags = flags if not tail_carried else tuple(set(flags) | {FLAG_CARRIED})
                    for a in alphas:
                        if tail_fit is not None:
                            v, e = var_es_gpdgarch(sig, tail_fit, a)
                        else:
                            # no tail model available yet: empirical stop-gap
                            v, e = var_es_dfgarch(sig, fitted.std_residuals, a)
                        records.append(
                            ForecastRecord(target, date, realized, v, e, model, a, tflags, sig)
                        )
            elif model == "QAR1":
                pairs = _qar1_forecasts(values, alphas, cfg.llqar.es_sublevels)
                for a in alphas:
                    v, e = pairs[a]
                    records.append(ForecastRecord(target, date, realized, v, e, model, a))
            elif model == "LLQAR":
                records.extend(
                    _llqar_records(values, target, date, realized, alphas, cfg, llqar_frozen_h)
                )
            elif model in CAVIAR_MODELS:
                for a in alphas:
                    records.append(
                        _caviar_record(
                            values, target, date, realized, model, a, cfg, caviar_prev, last
                        )
                    )
            elif model == "Oracle":
                path = cfg.sim_path
                for a in alphas:
                    tv, te = oracle_truth[a]
                    records.append(
                        ForecastRecord(
                            target,
                            date,
                            realized,
                            float(tv[target]),
                            float(te[target]),
                            model,
                            a,
                            (),
                            float(path.sigma_true[target]),
                        )
                    )

    records.sort(key=lambda r: (r.model, r.alpha_tail, r.t))
    return ForecastSeries(tuple(records))


def _llqar_records(values, target, date, realized, alphas, cfg, frozen_h) -> list[ForecastRecord]:
    """LLQAR records for every tail level of one window.

    Levels sharing a bandwidth are fitted jointly (one repair across
    the whole ladder); with per-level bandwidths (frozen
    cross-validated ones) a final cross-level pass keeps deeper-tail
    forecasts at least as large as shallower ones.
    """
    lc = cfg.llqar
    pairs: dict[float, tuple[float, float]] = {}
    flags: dict[float, tuple[str, ...]] = {a: () for a in alphas}
    try:
        if lc.bandwidth_rule == "fixed":
            groups = {lc.fixed_h: list(alphas)}
        elif lc.bandwidth_rule == "qcv":
            groups = {}
            for a in alphas:
                groups.setdefault(frozen_h[a], []).append(a)
        else:
            groups = {rot_bandwidth(scaled_distances(values)): list(alphas)}
        for h, group in groups.items():
            pairs.update(llqar_forecasts(values, group, h, lc.es_sublevels))
    except (DegenerateWeights, DegenerateBandwidth):
        pairs = _qar1_forecasts(values, alphas, lc.es_sublevels)
        flags = {a: (FLAG_WEIGHT_FALLBACK,) for a in alphas}
    # deeper tails never fall below shallower ones across groups
    run_var = run_es = -math.inf
    for a in sorted(alphas, reverse=True):
        v, e = pairs[a]
        run_var = max(run_var, v)
        run_es = max(run_es, e, run_var)
        pairs[a] = (run_var, run_es)
    return [
        ForecastRecord(target, date, realized, pairs[a][0], pairs[a][1], "LLQAR", a, flags[a])
        for a in alphas
    ]


def _caviar_record(values, target, date, realized, model, a, cfg, prev, last) -> ForecastRecord:
    spec = CAVIAR_MODELS[model]
    flags: tuple[str, ...] = ()
    try:
        fit = caviar_fit(
            values,
            spec,
            a,
            starts=cfg.caviar_starts,
            G=cfg.caviar_g,
            seed=cfg.caviar_seed,
        )
    except FitError as err:
        fit = err.best
        flags = (FLAG_CARRIED,)
    try:
        v = caviar_forecast(fit, last)
        prev[(model, a)] = v
    except ForecastError:
        v = prev.get((model, a), float(np.quantile(values, 1.0 - a)))
        flags = tuple(set(flags) | {FLAG_CARRIED})
    return ForecastRecord(target, date, realized, v, None, model, a, flags)
