"""Volatility-profile scenarios and the Monte Carlo study driver.

Each replication simulates a loss path, runs the rolling forecaster for
every requested model and tail level, and backtests the forecasts
against the known truth. Replications draw from independent
sub-streams of the master seed, so results are reproducible and
identical whether reps run serially or across processes.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .backtest import BacktestReport, compute_backtest, region_errors
from .errors import DomainError, RiskcastError
from .forecast import (
    CAVIAR_MODELS,
    FLAG_CARRIED,
    FLAG_WEIGHT_FALLBACK,
    MODEL_IDS,
    ForecastConfig,
    ForecastSeries,
    forecast_models,
)
from .garch import EgarchParams, SimPath, simulate_egarch, true_var_es
from .llqar import LlqarConfig, bofinger_bandwidth, hall_sheather_bandwidth
from .market_data import LogLossSeries
from .rng import derive_seed

__all__ = [
    "SCENARIOS",
    "GammaProfile",
    "StudyConfig",
    "StudyReport",
    "gamma_profile",
    "run_mc_study",
]

SCENARIOS = ("constant", "step", "smooth")

DEFAULT_MODELS = ("nGARCH", "tGARCH", "gpdNGARCH", "gpdTGARCH", "LLQAR", "Oracle")


@dataclass(frozen=True)
class GammaProfile:
    """Deterministic multiplicative volatility profile."""

    spec: str
    n: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != (self.n,):
            raise DomainError("profile length must equal n")
        if np.any(v <= 0.0):
            raise DomainError("profile values must be positive")
        if not 0.8 <= float(np.mean(v)) <= 1.2:
            raise DomainError("profile must fluctuate around 1")
        if self.spec == "constant" and not np.all(v == 1.0):
            raise DomainError("constant profile must be identically 1")


def gamma_profile(
    spec: str,
    n: int,
    *,
    step_levels: tuple[float, float, float] = (1.0, 1.5, 0.75),
    step_breaks: tuple[float, float] = (0.4, 0.7),
    smooth_amplitude: float = 0.5,
    smooth_period: float = 500.0,
) -> GammaProfile:
    """Build one of the named profiles over ``n`` time points.

    ``step`` holds three levels over the fractions given by
    ``step_breaks``; ``smooth`` is 1 plus a sine wave. Both average
    near 1 so the profile modulates rather than rescales volatility.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    t = np.arange(n)
    if spec == "constant":
        values = np.ones(n)
    elif spec == "step":
        values = np.full(n, step_levels[0])
        values[t >= step_breaks[0] * n] = step_levels[1]
        values[t >= step_breaks[1] * n] = step_levels[2]
    elif spec == "smooth":
        values = 1.0 + smooth_amplitude * np.sin(2.0 * np.pi * t / smooth_period)
    else:
        raise DomainError(f"unknown profile spec {spec!r}")
    return GammaProfile(spec, n, values)


@dataclass
class StudyConfig:
    """Everything a Monte Carlo study run depends on."""

    egarch: EgarchParams = field(default_factory=EgarchParams)
    n_obs: int = 1000
    n_reps: int = 100
    window: int = 250
    alphas: tuple[float, ...] = (0.05, 0.01)
    models: tuple[str, ...] = DEFAULT_MODELS
    scenario: str = "constant"
    seed: int = 20240
    bootstrap_b: int = 1000
    n_jobs: int = 1
    test_level: float = 0.05
    evt_threshold_prob: float = 0.90
    llqar: LlqarConfig = field(default_factory=LlqarConfig)
    caviar_starts: int = 25
    caviar_g: float = 10.0
    caviar_seed: int = 0
    scenario_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.alphas = tuple(float(a) for a in self.alphas)
        self.models = tuple(self.models)
        if self.n_obs <= self.window:
            raise DomainError("n_obs must exceed the window size")
        if self.n_reps < 1:
            raise DomainError("need at least one replication")
        if self.scenario not in SCENARIOS:
            raise DomainError(f"unknown scenario {self.scenario!r}")
        for m in self.models:
            if m not in MODEL_IDS:
                raise DomainError(f"unknown model {m!r}")

    PRESETS = {"desk": {"n_reps": 20}, "full": {"n_reps": 100}}

    @classmethod
    def from_dict(cls, raw: dict) -> "StudyConfig":
        """Build a config from a JSON-style tree; ``preset`` applies
        named defaults (desk/full) before explicit keys."""
        data = dict(raw)
        preset = data.pop("preset", None)
        merged: dict = {}
        if preset is not None:
            if preset not in cls.PRESETS:
                raise DomainError(f"unknown preset {preset!r}")
            merged.update(cls.PRESETS[preset])
        merged.update(data)
        known = {f.name for f in fields(cls)}
        unknown = set(merged) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        if "egarch" in merged and isinstance(merged["egarch"], dict):
            merged["egarch"] = EgarchParams(**merged["egarch"])
        if "llqar" in merged and isinstance(merged["llqar"], dict):
            lq = dict(merged["llqar"])
            if "qcv_grid" in lq:
                lq["qcv_grid"] = tuple(lq["qcv_grid"])
            merged["llqar"] = LlqarConfig(**lq)
        for key in ("alphas", "models"):
            if key in merged:
                value = merged[key]
                merged[key] = (value,) if isinstance(value, (str, float, int)) else tuple(value)
        return cls(**merged)

    def to_forecast_config(self, sim_path: SimPath | None = None) -> ForecastConfig:
        return ForecastConfig(
            evt_threshold_prob=self.evt_threshold_prob,
            llqar=self.llqar,
            caviar_starts=self.caviar_starts,
            caviar_g=self.caviar_g,
            caviar_seed=self.caviar_seed,
            sim_path=sim_path,
        )


@dataclass(frozen=True)
class RepMetrics:
    """One replication's backtest of one (model, level) pair."""

    rep: int
    report: BacktestReport
    carried_windows: int
    fallback_windows: int
    es_below_var: int
    var_forecast: np.ndarray
    es_forecast: np.ndarray | None
    truth_var: np.ndarray
    truth_es: np.ndarray


@dataclass(frozen=True)
class StudyReport:
    config: StudyConfig
    metrics: tuple[RepMetrics, ...]
    exclusions: tuple[tuple[str, float, int, str, str], ...]

    # -- aggregates ------------------------------------------------------

    def completed(self, model: str, alpha: float) -> list[RepMetrics]:
        return [
            m
            for m in self.metrics
            if m.report.model == model and m.report.alpha_tail == alpha
        ]

    def rejection_rows(self) -> list[tuple]:
        """(model, alpha, test, rejected, completed, percent) rows at the
        configured test level."""
        rows = []
        level = self.config.test_level
        for model in self.config.models:
            for alpha in self.config.alphas:
                reps = self.completed(model, alpha)
                for test, get in (
                    ("uc", lambda m: m.report.uc_p),
                    ("cc", lambda m: m.report.cc_p),
                    ("es_boot", lambda m: m.report.es_boot_p),
                ):
                    pvals = [get(m) for m in reps if get(m) is not None]
                    nrej = sum(1 for p in pvals if p < level)
                    pct = 100.0 * nrej / len(pvals) if pvals else float("nan")
                    rows.append((model, alpha, test, nrej, len(pvals), pct))
        return rows

    def rmse_rows(self) -> list[tuple]:
        rows = []
        for m in self.metrics:
            rows.append(
                (
                    m.report.model,
                    m.report.alpha_tail,
                    m.rep,
                    m.report.rmse_var,
                    m.report.rmse_es,
                )
            )
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        return rows

    def region_rows(self, regions: int = 5) -> list[tuple]:
        """Pooled five-region bias/variance rows per model, level and
        measure."""
        rows = []
        for model in self.config.models:
            for alpha in self.config.alphas:
                reps = self.completed(model, alpha)
                if not reps:
                    continue
                pooled_var = np.concatenate([m.var_forecast for m in reps])
                pooled_tv = np.concatenate([m.truth_var for m in reps])
                summaries = [("var", pooled_var, pooled_tv)]
                if all(m.es_forecast is not None for m in reps):
                    pooled_es = np.concatenate([m.es_forecast for m in reps])
                    pooled_te = np.concatenate([m.truth_es for m in reps])
                    summaries.append(("es", pooled_es, pooled_te))
                for measure, fc, truth in summaries:
                    s = region_errors(fc, truth, regions)
                    for k in range(regions):
                        rows.append(
                            (model, alpha, measure, k, s.counts[k], s.bias[k], s.variance[k])
                        )
        return rows

    def nonconvergence_rows(self) -> list[tuple]:
        rows = []
        for model in self.config.models:
            for alpha in self.config.alphas:
                reps = self.completed(model, alpha)
                rows.append(
                    (
                        model,
                        alpha,
                        sum(m.carried_windows for m in reps),
                        sum(m.fallback_windows for m in reps),
                    )
                )
        return rows

    def es_coherence_violations(self) -> int:
        return sum(m.es_below_var for m in self.metrics)

    def bandwidth_rows(self) -> list[tuple]:
        n = self.config.window - 1
        rows = []
        for alpha in self.config.alphas:
            tau = 1.0 - alpha
            rows.append((alpha, n, hall_sheather_bandwidth(n, tau), bofinger_bandwidth(n, tau)))
        return rows

    def mean_rmse_rank(self, alpha: float, measure: str = "var") -> dict[str, float]:
        """Average cross-model rank (1 = smallest RMSE) per model over
        the replications where every model completed."""
        models = [m for m in self.config.models]
        per_rep: dict[int, dict[str, float]] = {}
        for m in self.metrics:
            if m.report.alpha_tail != alpha:
                continue
            val = m.report.rmse_var if measure == "var" else m.report.rmse_es
            if val is not None:
                per_rep.setdefault(m.rep, {})[m.report.model] = val
        ranks: dict[str, list[float]] = {mm: [] for mm in models}
        for rep_vals in per_rep.values():
            if set(rep_vals) != set(models):
                continue
            ordered = sorted(models, key=lambda mm: rep_vals[mm])
            for pos, mm in enumerate(ordered, start=1):
                ranks[mm].append(float(pos))
        return {mm: float(np.mean(r)) if r else float("nan") for mm, r in ranks.items()}

    # -- serialization ---------------------------------------------------

    def save(self, out_dir: str | Path) -> list[Path]:
        """Write the study CSVs (plus a config echo) into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []

        def _write(name: str, header: list[str], rows: list[tuple]) -> None:
            path = out / name
            with open(path, "w", newline="") as fh:
                fh.write(",".join(header) + "\n")
                for row in rows:
                    fh.write(",".join(_fmt(v) for v in row) + "\n")
            written.append(path)

        _write(
            "rejections.csv",
            ["model", "alpha", "test", "rejected", "completed", "percent"],
            self.rejection_rows(),
        )
        _write(
            "rmse.csv",
            ["model", "alpha", "rep", "rmse_var", "rmse_es"],
            self.rmse_rows(),
        )
        _write(
            "region_errors.csv",
            ["model", "alpha", "measure", "region", "count", "bias", "variance"],
            self.region_rows(),
        )
        _write(
            "nonconvergence.csv",
            ["model", "alpha", "carried_windows", "fallback_windows"],
            self.nonconvergence_rows(),
        )
        _write(
            "exclusions.csv",
            ["model", "alpha", "rep", "test", "reason"],
            sorted(self.exclusions),
        )
        _write(
            "bandwidths.csv",
            ["alpha", "n", "hall_sheather", "bofinger"],
            self.bandwidth_rows(),
        )
        cfg_path = out / "config_echo.json"
        with open(cfg_path, "w") as fh:
            json.dump(_config_tree(self.config), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(cfg_path)
        return written


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _config_tree(cfg: StudyConfig) -> dict:
    return asdict(cfg)


def _run_rep(cfg: StudyConfig, rep: int):
    """Simulate, forecast and backtest one replication."""
    profile = gamma_profile(cfg.scenario, cfg.n_obs, **cfg.scenario_params)
    path = simulate_egarch(cfg.egarch, cfg.n_obs, derive_seed(cfg.seed, rep), profile)
    series = LogLossSeries(tuple(str(i) for i in range(cfg.n_obs)), path.losses)
    fc_cfg = cfg.to_forecast_config(sim_path=path)

    metrics: list[RepMetrics] = []
    exclusions: list[tuple[str, float, int, str, str]] = []

    try:
        fs = forecast_models(series, cfg.models, cfg.alphas, cfg.window, fc_cfg)
        failed: dict[str, str] = {}
    except RiskcastError:
        # isolate the failing model(s) so the others still count
        failed = {}
        pieces = []
        for model in cfg.models:
            try:
                pieces.append(forecast_models(series, [model], cfg.alphas, cfg.window, fc_cfg))
            except RiskcastError as err:
                failed[model] = f"{type(err).__name__}: {err}"
        fs = ForecastSeries(tuple(r for p in pieces for r in p.records))

    truth = {a: true_var_es(path, a) for a in cfg.alphas}
    for model in cfg.models:
        for alpha in cfg.alphas:
            if model in failed:
                exclusions.append((model, alpha, rep, "all", failed[model]))
                continue
            t, losses, var, es, sigma = fs.arrays(model, alpha)
            tv = truth[alpha][0][t]
            te = truth[alpha][1][t]
            report = compute_backtest(
                model,
                alpha,
                losses,
                var,
                es,
                sigma,
                truth_var=tv,
                truth_es=te,
                b=cfg.bootstrap_b,
                seed=derive_seed(cfg.seed, rep, 1 + MODEL_IDS.index(model), int(round(alpha * 1000))),
            )
            if model not in CAVIAR_MODELS and report.es_boot_p is None:
                exclusions.append((model, alpha, rep, "es_boot", "no usable exceedance residuals"))
            recs = fs.group(model, alpha)
            carried = sum(1 for r in recs if FLAG_CARRIED in r.flags)
            fallback = sum(1 for r in recs if FLAG_WEIGHT_FALLBACK in r.flags)
            es_below = int(np.sum(es < var)) if es is not None else 0
            metrics.append(
                RepMetrics(
                    rep=rep,
                    report=report,
                    carried_windows=carried,
                    fallback_windows=fallback,
                    es_below_var=es_below,
                    var_forecast=var,
                    es_forecast=es,
                    truth_var=tv,
                    truth_es=te,
                )
            )
    return metrics, exclusions


def _rep_worker(args):
    return _run_rep(*args)


def run_mc_study(cfg: StudyConfig) -> StudyReport:
    """Run the full Monte Carlo study described by ``cfg``.

    Fully deterministic for a given config: replication k always uses
    the (seed, k) sub-stream, and aggregation happens in replication
    order regardless of how many worker processes are used.
    """
    jobs = [(cfg, rep) for rep in range(cfg.n_reps)]
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            results = list(pool.map(_rep_worker, jobs))
    else:
        results = [_rep_worker(j) for j in jobs]

    metrics: list[RepMetrics] = []
    exclusions: list[tuple] = []
    for rep_metrics, rep_exclusions in results:
        metrics.extend(rep_metrics)
        exclusions.extend(rep_exclusions)
    return StudyReport(config=cfg, metrics=tuple(metrics), exclusions=tuple(exclusions))
