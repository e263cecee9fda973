"""One-step-ahead VaR/ES forecasting, backtesting and evaluation.

Pipeline: ingest prices into log losses, roll a window over the series
fitting GARCH-family, tail, autoregressive-quantile and local-linear
quantile models, forecast next-day VaR/ES per model and tail level,
then backtest coverage and expected shortfall. A Monte Carlo driver
runs the whole pipeline on simulated paths with known truth.
"""

from .backtest import (
    BacktestReport,
    RegionErrorSummary,
    ViolationSeries,
    chi2_sf,
    christoffersen_cc,
    compute_backtest,
    es_bootstrap_test,
    exceedance_residuals,
    kupiec_uc,
    region_errors,
    rmse,
    v_measure,
    violations,
)
from .distributions import (
    Dist,
    abs_moment,
    cdf,
    gaussian_kernel,
    pdf,
    quantile,
    sample,
    upper_tail_mean,
)
from .errors import (
    AlignmentError,
    DataError,
    DegenerateBandwidth,
    DegenerateResiduals,
    DegenerateWeights,
    DomainError,
    EmptyResiduals,
    FitError,
    ForecastError,
    InsufficientData,
    InsufficientTail,
    NotApplicable,
    NumericalError,
    OrderError,
    ParseError,
    RiskcastError,
    SingularDesign,
    TailError,
    TailMeanUndefined,
)
from .evt import GpdFit, fit_gpd, gpd_loglik, gpd_tail_es, gpd_tail_quantile, select_threshold
from .forecast import (
    CAVIAR_MODELS,
    MODEL_IDS,
    ForecastConfig,
    ForecastRecord,
    ForecastSeries,
    forecast_models,
    rolling_forecast,
    var_es_dfgarch,
    var_es_gpdgarch,
    var_es_ngarch,
    var_es_tgarch,
)
from .garch import (
    EgarchParams,
    FittedGarch,
    GarchParams,
    SimPath,
    conditional_loglik,
    fit_garch,
    forecast_sigma,
    simulate_egarch,
    true_var_es,
)
from .llqar import (
    LlqarConfig,
    QcvResult,
    bofinger_bandwidth,
    hall_sheather_bandwidth,
    llqar_es,
    llqar_var,
    llqar_var_es,
    qcv_bandwidth,
    rot_bandwidth,
    scaled_distances,
    yu_jones_bandwidth,
)
from .market_data import (
    LogLossSeries,
    PriceSeries,
    SummaryStats,
    Window,
    log_losses,
    parse_price_csv,
    rolling_windows,
    summary_stats,
)
from .quantile_regression import (
    CAVIAR_SPECS,
    CaviarFit,
    QrFit,
    caviar_fit,
    caviar_forecast,
    check_loss,
    qar1_forecast,
    weighted_linear_qr,
    weighted_linear_qr_path,
)
from .simstudy import (
    SCENARIOS,
    GammaProfile,
    StudyConfig,
    StudyReport,
    gamma_profile,
    run_mc_study,
)

__version__ = "0.1.0"
