import io
import math

import numpy as np
import pytest

from riskcast.distributions import Dist, pdf, quantile
from riskcast.errors import DomainError, InsufficientData
from riskcast.evt import GpdFit, gpd_tail_es, gpd_tail_quantile
from riskcast.forecast import (
    ForecastConfig,
    ForecastSeries,
    forecast_models,
    rolling_forecast,
    var_es_dfgarch,
    var_es_gpdgarch,
    var_es_ngarch,
    var_es_tgarch,
)
from riskcast.garch import EgarchParams, simulate_egarch, true_var_es
from riskcast.llqar import LlqarConfig
from riskcast.market_data import LogLossSeries
from riskcast.rng import make_generator
from riskcast.simstudy import gamma_profile


def _series(losses):
    return LogLossSeries(tuple(str(i) for i in range(len(losses))), np.asarray(losses))


def test_ngarch_hand_values():
    var, es = var_es_ngarch(1.0, 0.05)
    assert var == pytest.approx(1.644854, abs=1e-5)
    assert es == pytest.approx(2.062713, abs=1e-5)
    q = quantile(Dist.normal(), 0.95)
    assert es == pytest.approx(pdf(Dist.normal(), q) / 0.05, abs=1e-12)


def test_ngarch_zero_sigma_limit():
    assert var_es_ngarch(0.0, 0.05) == (0.0, 0.0)


def test_deeper_tail_larger():
    v5, e5 = var_es_ngarch(1.0, 0.05)
    v1, e1 = var_es_ngarch(1.0, 0.01)
    assert v1 > v5 and e1 > e5


def test_homogeneity_exact():
    for fn, args in (
        (var_es_ngarch, ()),
        (lambda s, a: var_es_tgarch(s, 6.0, a), ()),
    ):
        v1, e1 = fn(1.0, 0.05)
        v2, e2 = fn(2.0, 0.05)
        assert v2 == pytest.approx(2 * v1, rel=1e-12)
        assert e2 == pytest.approx(2 * e1, rel=1e-12)


def test_tgarch_normal_limit():
    vn, en = var_es_ngarch(1.0, 0.05)
    vt, et = var_es_tgarch(1.0, 1e4, 0.05)
    assert abs(vt / vn - 1) < 0.005
    assert abs(et / en - 1) < 0.005
    with pytest.raises(DomainError):
        var_es_tgarch(1.0, 2.0, 0.05)


def test_dfgarch_hand_count():
    resid = np.arange(1.0, 101.0)
    var, es = var_es_dfgarch(1.0, resid, 0.05)
    assert es == pytest.approx(98.0)  # mean of the 5 largest: 96..100
    assert var == pytest.approx(95.05)  # type-7 upper quantile
    c = np.full(100, 3.3)
    var, es = var_es_dfgarch(2.0, c, 0.05)
    assert var == es == pytest.approx(6.6)
    with pytest.raises(InsufficientData):
        var_es_dfgarch(1.0, np.arange(50.0), 0.01)


def test_dfgarch_es_dominates_var():
    rng = make_generator(1)
    for _ in range(20):
        resid = rng.standard_t(5, size=250)
        var, es = var_es_dfgarch(1.0, resid, 0.05)
        assert es >= var


def test_gpdgarch_composition():
    f = GpdFit(zeta=0.15, psi=1.1, u=1.3, n_total=250, n_exceed=25)
    sigma = 0.02
    var, es = var_es_gpdgarch(sigma, f, 0.05)
    assert var == pytest.approx(sigma * gpd_tail_quantile(f, 0.05), rel=1e-12)
    assert es == pytest.approx(sigma * gpd_tail_es(f, gpd_tail_quantile(f, 0.05)), rel=1e-12)


def test_rolling_forecast_counts_and_order():
    path = simulate_egarch(EgarchParams(), 123, 5, np.ones(123))
    series = _series(path.losses)
    fs = forecast_models(series, ["nGARCH", "QAR1"], [0.05, 0.01], 120)
    assert len(fs) == 3 * 2 * 2
    keys = [(r.model, r.alpha_tail, r.t) for r in fs.records]
    assert keys == sorted(keys)
    for r in fs.records:
        assert r.realized_loss == path.losses[r.t]
        assert r.es >= r.var


def test_oracle_passthrough_exact():
    path = simulate_egarch(EgarchParams(), 80, 6, np.ones(80))
    series = _series(path.losses)
    fs = rolling_forecast(series, "Oracle", 0.05, 60, ForecastConfig(sim_path=path))
    tv, te = true_var_es(path, 0.05)
    for r in fs.records:
        assert r.var == tv[r.t]
        assert r.es == te[r.t]


def test_oracle_requires_truth():
    path = simulate_egarch(EgarchParams(), 80, 6, np.ones(80))
    with pytest.raises(DomainError):
        rolling_forecast(_series(path.losses), "Oracle", 0.05, 60)


def test_unknown_model_rejected():
    path = simulate_egarch(EgarchParams(), 80, 6, np.ones(80))
    with pytest.raises(DomainError):
        rolling_forecast(_series(path.losses), "garch", 0.05, 60)


def test_rolling_forecast_deterministic_csv():
    path = simulate_egarch(EgarchParams(), 140, 8, np.ones(140))
    series = _series(path.losses)
    out = []
    for _ in range(2):
        fs = forecast_models(series, ["nGARCH", "LLQAR"], [0.05], 120)
        buf = io.StringIO()
        fs.write_csv(buf)
        out.append(buf.getvalue())
    assert out[0] == out[1]


def test_forecast_series_csv_roundtrip():
    path = simulate_egarch(EgarchParams(), 130, 9, np.ones(130))
    series = _series(path.losses)
    fs = forecast_models(series, ["tGARCH", "CAViaR-SAV"], [0.05], 120, ForecastConfig(caviar_starts=4))
    buf = io.StringIO()
    fs.write_csv(buf)
    buf.seek(0)
    again = ForecastSeries.read_csv(buf)
    assert len(again) == len(fs)
    for a, b in zip(again.records, fs.records):
        assert a.t == b.t and a.model == b.model and a.alpha_tail == b.alpha_tail
        assert a.var == b.var
        assert (a.es is None) == (b.es is None)
        if a.es is not None:
            assert a.es == b.es
    # conditional SD column is internal only, never serialized
    assert again.records[0].sigma is None


def test_caviar_records_have_no_es():
    path = simulate_egarch(EgarchParams(), 125, 10, np.ones(125))
    series = _series(path.losses)
    fs = rolling_forecast(series, "CAViaR-Adaptive", 0.05, 120, ForecastConfig(caviar_starts=4))
    assert len(fs) == 5
    assert all(r.es is None for r in fs.records)


def test_llqar_weight_underflow_falls_back():
    rng = make_generator(11)
    x = 1.0 + 0.1 * rng.standard_normal(130)
    series = _series(x)
    # a fixed microscopic bandwidth drives every kernel weight to zero
    cfg = ForecastConfig(llqar=LlqarConfig(bandwidth_rule="fixed", fixed_h=1e-12))
    fs = rolling_forecast(series, "LLQAR", 0.05, 120, cfg)
    rec = [r for r in fs.records if r.t == 120][0]
    assert "weight-fallback" in rec.flags
    from riskcast.forecast import _qar1_forecasts

    want_var, want_es = _qar1_forecasts(x[:120], [0.05], 20)[0.05]
    assert rec.var == want_var and rec.es == want_es


def test_garch_variants_share_base_fit():
    path = simulate_egarch(EgarchParams(), 130, 12, np.ones(130))
    series = _series(path.losses)
    fs = forecast_models(series, ["nGARCH", "gpdNGARCH", "DFGARCH"], [0.05], 120)
    sig = {m: fs.arrays(m, 0.05)[4] for m in ("nGARCH", "gpdNGARCH", "DFGARCH")}
    assert np.array_equal(sig["nGARCH"], sig["gpdNGARCH"])
    assert np.array_equal(sig["nGARCH"], sig["DFGARCH"])


def test_violation_frequency_sanity_scenario1():
    # well-specified innovations: realized violation rate near alpha
    path = simulate_egarch(EgarchParams(), 800, 13, np.ones(800))
    series = _series(path.losses)
    fs = rolling_forecast(series, "tGARCH", 0.05, 250)
    _, losses, var, _, _ = fs.arrays("tGARCH", 0.05)
    n = losses.size
    prop = float(np.mean(losses > var))
    assert abs(prop - 0.05) <= 3 * math.sqrt(0.05 * 0.95 / n)
