"""One-step-ahead forecasts, Mincer-Zarnowitz regressions and loss functions.

Mincer-Zarnowitz regressions run in volatility units (square roots);
HMSE and QLIKE run in variance units with a realized measure as proxy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InsufficientDataError, NumericError
from .models import MIN_OBS, FitResult, ModelData, ModelSpec, filter_states, fit

logger = logging.getLogger(__name__)

ANNUALIZATION = 252
EPS_FLOOR = 1e-12
MIN_OOS = 20


def annualize(iv):
    """sqrt(252 * iv) for a daily variance (scalar or array)."""
    a = np.asarray(iv, dtype=float)
    if np.any(a < 0):
        raise ValueError("variance must be non-negative")
    out = np.sqrt(ANNUALIZATION * a)
    return float(out) if out.ndim == 0 else out


def one_step_forecast(fit_: FitResult, h_t: float, x_t: float | None = None, jv_t: float = 0.0,
                      r_t: float | None = None) -> float:
    """Conditional variance for ``t+1`` from the state at ``t``."""
    p = fit_.params
    if fit_.spec.family == "garch":
        if r_t is None:
            raise ValueError("GARCH forecasts need r_t")
        return p["omega"] + p["alpha"] * r_t**2 + p["beta"] * h_t
    x_t = max(float(x_t), EPS_FLOOR)
    lh = p["omega"] + p["beta"] * math.log(h_t) + p["gamma"] * math.log(x_t)
    if fit_.spec.include_jumps:
        lh += p["gamma_j"] * math.log1p(jv_t)
    if not math.isfinite(lh) or lh > 700:
        raise NumericError("forecast overflow")
    return math.exp(lh)


@dataclass
class ForecastRecord:
    date: str
    h_forecast: float
    target_measure: str
    target_variance: float

    @property
    def vol_forecast(self) -> float:
        return math.sqrt(self.h_forecast)

    @property
    def target_value(self) -> float:
        """Realized volatility proxy, the square root of the measure."""
        return math.sqrt(max(self.target_variance, 0.0))


@dataclass
class MincerZarnowitz:
    alpha: float
    beta: float
    r2: float
    se_alpha: float
    se_beta: float
    n_obs: int


def mincer_zarnowitz(targets, forecasts) -> MincerZarnowitz:
    """OLS of ``targets`` on a constant and ``forecasts``."""
    y = np.asarray(targets, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    if len(y) != len(f):
        raise ValueError("targets and forecasts differ in length")
    n = len(y)
    if n < 3:
        raise InsufficientDataError("Mincer-Zarnowitz needs at least 3 observations")
    fc = f - f.mean()
    sxx = float(fc @ fc)
    if sxx <= 1e-300 * n or np.ptp(f) == 0:
        raise NumericError("forecasts are constant; regression is degenerate")
    beta = float(fc @ (y - y.mean())) / sxx
    alpha = float(y.mean() - beta * f.mean())
    resid = y - alpha - beta * f
    sst = float(np.sum((y - y.mean()) ** 2))
    sse = float(resid @ resid)
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    s2 = sse / (n - 2) if n > 2 else float("nan")
    se_beta = math.sqrt(s2 / sxx)
    se_alpha = math.sqrt(s2 * (1.0 / n + f.mean() ** 2 / sxx))
    return MincerZarnowitz(alpha, beta, r2, se_alpha, se_beta, n)


def loss_metrics(target_variance, h_forecasts) -> tuple[float, float]:
    """HMSE and QLIKE; zero proxies are floored at 1e-12."""
    s = np.maximum(np.asarray(target_variance, dtype=float), EPS_FLOOR)
    h = np.asarray(h_forecasts, dtype=float)
    if len(s) != len(h):
        raise ValueError("targets and forecasts differ in length")
    if np.any(h <= 0):
        raise ValueError("variance forecasts must be positive")
    ratio = s / h
    return float(np.mean((ratio - 1.0) ** 2)), float(np.mean(np.log(h) + ratio))


@dataclass
class EvalReport:
    alpha_mz: float
    beta_mz: float
    r2_mz: float
    hmse: float
    qlike: float
    n_obs: int
    scheme: str
    gaps: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"alpha_mz": self.alpha_mz, "beta_mz": self.beta_mz, "r2_mz": self.r2_mz,
                "hmse": self.hmse, "qlike": self.qlike, "n_obs": self.n_obs, "scheme": self.scheme,
                "gaps": list(self.gaps)}


def evaluate_records(records: list[ForecastRecord], scheme: str = "fixed-params", gaps=()) -> EvalReport:
    h = np.array([r.h_forecast for r in records])
    tv = np.array([r.target_variance for r in records])
    mz = mincer_zarnowitz(np.sqrt(np.maximum(tv, 0.0)), np.sqrt(h))
    hmse, qlike = loss_metrics(tv, h)
    return EvalReport(mz.alpha, mz.beta, mz.r2, hmse, qlike, len(records), scheme, list(gaps))


def _forecast_path(fit_: FitResult, data: ModelData) -> np.ndarray:
    # h_t from the filter only uses information up to t-1
    return filter_states(fit_.params, fit_.spec, data, fit_.h1).h


def rolling_evaluate(spec: ModelSpec, data: ModelData, split: int, scheme: str = "fixed-params",
                     refit_every: int = 20, fit_result: FitResult | None = None, target_name: str = "",
                     min_in_sample: int = MIN_OBS, min_out_of_sample: int = MIN_OOS):
    """Out-of-sample one-step forecasts for days ``split, ..., T-1``.

    ``fixed-params`` estimates once on ``[0, split)`` (or uses
    ``fit_result``) and rolls the filter forward through the realized
    inputs.  ``re-estimate`` refits every ``refit_every`` days on an
    expanding window; a failed refit keeps the last good parameters and is
    logged in the report's ``gaps``.

    Returns ``(records, report, fit)``.
    """
    T = len(data)
    if split < min_in_sample or T - split < min_out_of_sample:
        raise InsufficientDataError(
            f"split at {split} of {T} leaves fewer than {min_in_sample} in-sample or {min_out_of_sample} out-of-sample days")
    if scheme not in ("fixed-params", "re-estimate"):
        raise ValueError(f"unknown scheme {scheme!r}")
    proxy = data.proxy
    if proxy is None:
        raise ValueError("no forecast target available")
    current = fit_result or fit(spec, data.slice(0, split), min_obs=min_in_sample)
    first = current
    gaps = []
    h = np.empty(T - split)
    if scheme == "fixed-params":
        h[:] = _forecast_path(current, data)[split:]
    else:
        t = split
        while t < T:
            stop = min(T, t + refit_every)
            h[t - split:stop - split] = _forecast_path(current, data.slice(0, stop))[t:stop]
            t = stop
            if t < T:
                try:
                    current = fit(spec, data.slice(0, t), start=current.params, min_obs=min_in_sample,
                                  compute_se=False)
                except (ConvergenceError, NumericError) as exc:
                    logger.warning("refit at day %d failed: %s", t, exc)
                    gaps.append(t)
    dates = data.dates or [str(i) for i in range(T)]
    name = target_name or spec.measure
    records = [ForecastRecord(str(dates[t]), float(h[t - split]), name, float(proxy[t])) for t in range(split, T)]
    return records, evaluate_records(records, scheme, gaps), first
