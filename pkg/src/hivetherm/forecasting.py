"""Fit-then-integrate forecasting and the rolling-origin benchmark."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .baselines import BaselineId, BaselineModel, fit_baseline, predict_baseline
from .errors import (
    DegradedInputWarning,
    HiveThermError,
    HorizonForcingMissing,
    NoOverlap,
)
from .fitting import FitResult, SearchSpace, fit_segment
from .model import (
    STEP,
    HiveDataset,
    HiveParams,
    HiveType,
    ModelConfig,
    TemperatureSeries,
    adjunct_series,
    integrate_segment,
)

log = logging.getLogger(__name__)

EBV = "ebv"
FIT_DAYS = 3
HORIZON_DAYS = 7


def rmse(actual: TemperatureSeries | np.ndarray, predicted: TemperatureSeries | np.ndarray
         ) -> float:
    """Root mean squared error over ticks where both series are present."""
    a = np.asarray(getattr(actual, "values", actual), dtype=float)
    p = np.asarray(getattr(predicted, "values", predicted), dtype=float)
    if a.shape != p.shape:
        raise ValueError("series are not aligned")
    both = ~np.isnan(a) & ~np.isnan(p)
    if not both.any():
        raise NoOverlap("no tick has both an actual and a predicted value")
    d = a[both] - p[both]
    return float(np.sqrt(np.mean(d * d)))


def _longest_gap(values: np.ndarray) -> int:
    best = run = 0
    for missing in np.isnan(values):
        run = run + 1 if missing else 0
        best = max(best, run)
    return best


@dataclass(frozen=True, eq=False)
class ForecastRequest:
    dataset: HiveDataset
    fit_window: tuple[int, int]
    future_ext: TemperatureSeries
    future_adj: TemperatureSeries | None = None

    def __post_init__(self):
        a, b = self.fit_window
        expected = self.dataset.core.start_time + b * STEP
        if self.future_ext.start_time != expected:
            raise ValueError("future_ext must start at the end of the fit window")
        if self.future_adj is not None and (
                len(self.future_adj) != len(self.future_ext)
                or self.future_adj.start_time != self.future_ext.start_time):
            raise ValueError("future_adj must be aligned with future_ext")

    @property
    def horizon(self) -> int:
        return len(self.future_ext)

    @classmethod
    def from_dataset(cls, dataset: HiveDataset, fit_start_day: int,
                     fit_days: int = FIT_DAYS, horizon_days: int = HORIZON_DAYS,
                     with_adj: bool = True) -> tuple["ForecastRequest", TemperatureSeries]:
        """Split a recorded dataset into a request and the held-out core series."""
        a, b = dataset.day_span(fit_start_day, fit_start_day + fit_days)
        _, c = dataset.day_span(fit_start_day + fit_days,
                                fit_start_day + fit_days + horizon_days)
        future_adj = None
        if with_adj and dataset.hive_type is HiveType.TREATED:
            future_adj = dataset.peri.slice(b, c)
        request = cls(dataset, (a, b), dataset.ext.slice(b, c), future_adj)
        return request, dataset.core.slice(b, c)


@dataclass(frozen=True, eq=False)
class ForecastResult:
    forecast: TemperatureSeries
    params_used: HiveParams
    fit: FitResult
    rmse: float | None = None
    per_day_rmse: tuple[float, ...] = ()
    degraded_adj: bool = False


def per_day_rmse(actual: TemperatureSeries, predicted: TemperatureSeries,
                 day: int = 24) -> tuple[float, ...]:
    out = []
    for i in range(0, len(actual), day):
        try:
            out.append(rmse(actual.values[i:i + day], predicted.values[i:i + day]))
        except NoOverlap:
            out.append(float("nan"))
    return tuple(out)


def forecast(request: ForecastRequest, space: SearchSpace | None = None,
             config: ModelConfig = ModelConfig(),
             actual: TemperatureSeries | None = None) -> ForecastResult:
    """Fit the window, then integrate forward on the supplied future forcing.

    The trajectory starts from the last observed core value in the window.
    A treated hive without ``future_adj`` uses ``future_ext`` instead and the
    result is flagged ``degraded_adj``.
    """
    ds = request.dataset
    a, b = request.fit_window
    fit = fit_segment(ds, (a, b), space, config)

    fut_ext = request.future_ext.values
    if not (~np.isnan(fut_ext)).any() or _longest_gap(fut_ext) >= config.reseed_gap:
        raise HorizonForcingMissing("future external temperature has gaps too long to bridge")

    degraded = False
    if ds.hive_type is HiveType.CONTROL:
        fut_adj = fut_ext
    elif request.future_adj is not None:
        fut_adj = np.where(np.isnan(request.future_adj.values), fut_ext,
                           request.future_adj.values)
    else:
        degraded = True
        warnings.warn("treated hive forecast without future peripheral temperature; "
                      "using external temperature instead", DegradedInputWarning, stacklevel=2)
        fut_adj = fut_ext

    core = ds.core.values
    last = a + int(np.flatnonzero(~np.isnan(core[a:b]))[-1])
    ext = np.concatenate([ds.ext.values[last:b], fut_ext])
    adj = np.concatenate([adjunct_series(ds).values[last:b], fut_adj])
    seed = np.full(ext.size, np.nan)
    seed[0] = core[last]
    out = integrate_segment(ext, adj, seed, fit.params, config)[b - last:]
    if np.isnan(out).any():
        raise HorizonForcingMissing("forecast trajectory could not be carried through the horizon")
    series = TemperatureSeries(out, request.future_ext.start_time, sensor=False)

    score, daily = None, ()
    if actual is not None:
        score = rmse(actual, series)
        daily = per_day_rmse(actual, series)
    return ForecastResult(series, fit.params, fit, score, daily, degraded)


DEFAULT_BASELINES = (BaselineId.PERSISTENCE, BaselineId.SEASONAL_NAIVE_24,
                     BaselineId.ARX, BaselineId.HOLT_WINTERS)


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Per-origin scores (``table``) and their per-method aggregate."""

    table: pd.DataFrame
    skipped: tuple[tuple[int, str], ...] = ()

    def summary(self) -> pd.DataFrame:
        g = self.table.groupby("method", sort=False)["rmse"]
        return pd.DataFrame({"mean_rmse": g.mean(), "std_rmse": g.std(ddof=0), "n": g.size()})

    def improvement_share(self, margin: float = 0.2) -> float:
        """Fraction of origins where the model beats the best baseline by ``margin``."""
        wide = self.table.pivot(index="origin", columns="method", values="rmse")
        others = wide.drop(columns=EBV)
        return float(np.mean(wide[EBV] <= (1 - margin) * others.min(axis=1)))


def _evaluate_origin(dataset, origin, space, config, baselines, fit_days, horizon_days):
    request, actual = ForecastRequest.from_dataset(dataset, origin, fit_days, horizon_days)
    a, b = request.fit_window
    rows = []
    result = forecast(request, space, config, actual)
    rows.append((EBV, result.rmse))
    for bid in baselines:
        model = bid if isinstance(bid, BaselineModel) else BaselineModel(bid)
        fitted = fit_baseline(model, dataset.core.slice(a, b), dataset.ext.slice(a, b))
        pred = predict_baseline(fitted, request.horizon, request.future_ext)
        rows.append((model.id.value, rmse(actual, pred)))
    return [{"hive_id": dataset.hive_id, "origin": origin, "fit_start_day": origin,
             "forecast_start_day": origin + fit_days, "method": m, "rmse": r}
            for m, r in rows]


def rolling_evaluation(dataset: HiveDataset, space: SearchSpace | None = None,
                       config: ModelConfig = ModelConfig(),
                       baselines: Sequence[BaselineId | BaselineModel] = DEFAULT_BASELINES,
                       fit_days: int = FIT_DAYS, horizon_days: int = HORIZON_DAYS,
                       max_workers: int | None = None) -> Evaluation:
    """Slide the fit/forecast split one day at a time and score every method."""
    n_origins = dataset.n_days - fit_days - horizon_days + 1
    if n_origins < 1:
        raise ValueError(f"need at least {fit_days + horizon_days} days, got {dataset.n_days}")
    baselines = [BaselineId(b) if isinstance(b, str) else b for b in baselines]

    def one(origin):
        try:
            return _evaluate_origin(dataset, origin, space, config, baselines,
                                    fit_days, horizon_days)
        except (HiveThermError, ValueError) as exc:
            return exc

    origins = range(n_origins)
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            outcomes = list(pool.map(one, origins))
    else:
        outcomes = [one(o) for o in origins]
    rows, skipped = [], []
    for origin, out in zip(origins, outcomes):
        if isinstance(out, Exception):
            log.info("origin %d skipped: %s", origin, out)
            skipped.append((origin, f"{type(out).__name__}: {out}"))
        else:
            rows.extend(out)
    table = pd.DataFrame(rows, columns=["hive_id", "origin", "fit_start_day",
                                        "forecast_start_day", "method", "rmse"])
    return Evaluation(table, tuple(skipped))


def summarize(evaluations: Sequence[Evaluation]) -> pd.DataFrame:
    """Mean RMSE per method pooled over all origins and averaged per hive."""
    table = pd.concat([e.table for e in evaluations], ignore_index=True)
    pooled = table.groupby("method", sort=False)["rmse"]
    per_hive = table.groupby(["method", "hive_id"], sort=False)["rmse"].mean()
    by_hive = per_hive.groupby(level="method", sort=False)
    return pd.DataFrame({
        "pooled_mean": pooled.mean(), "pooled_std": pooled.std(ddof=0),
        "n_origins": pooled.size(),
        "hive_mean": by_hive.mean(), "hive_std": by_hive.std(ddof=0),
    })
