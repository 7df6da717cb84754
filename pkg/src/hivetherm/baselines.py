"""Reference forecasters: persistence, seasonal naive, ARX and Holt-Winters."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientHistory
from .model import TemperatureSeries

SEASON = 24
RIDGE_PENALTY = 1e-6
SMOOTHING_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


class BaselineId(enum.Enum):
    PERSISTENCE = "persistence"
    SEASONAL_NAIVE_24 = "seasonal_naive_24"
    ARX = "arx"
    HOLT_WINTERS = "holt_winters_additive"


def locf(values: np.ndarray) -> np.ndarray:
    """Carry the last observation forward; leading gaps take the first value."""
    v = np.asarray(values, dtype=float)
    present = ~np.isnan(v)
    if not present.any():
        raise InsufficientHistory("series has no observations")
    idx = np.where(present, np.arange(v.size), 0)
    np.maximum.accumulate(idx, out=idx)
    out = v[idx]
    out[: np.argmax(present)] = v[np.argmax(present)]
    return out


def _need(values: np.ndarray, count: int, what: str) -> None:
    n = int((~np.isnan(values)).sum())
    if n < count or values.size < count:
        raise InsufficientHistory(f"{what} needs {count} observed ticks, got {n}")


@dataclass(frozen=True)
class BaselineModel:
    """Which forecaster to fit, plus its hyperparameters.

    ``orders`` fixes the ARX (autoregressive, exogenous) lag counts; when
    ``None`` both are chosen by AIC over ``1..max_order``. Exogenous lags
    start at the contemporaneous external temperature.
    """

    id: BaselineId
    orders: tuple[int, int] | None = None
    max_order: int = 6
    smoothing_grid: tuple[float, ...] = SMOOTHING_GRID

    def __post_init__(self):
        object.__setattr__(self, "id", BaselineId(self.id))
        if self.orders is not None and min(self.orders) < 0:
            raise ValueError("ARX orders must be >= 0")
        if self.max_order < 1:
            raise ValueError("max_order must be >= 1")
        if not all(0 < w < 1 for w in self.smoothing_grid):
            raise ValueError("smoothing weights must lie in (0, 1)")


class FittedBaseline:
    model: BaselineModel
    history_end: object

    def predict(self, horizon: int, future_ext=None) -> np.ndarray:
        raise NotImplementedError


@dataclass(eq=False)
class Persistence(FittedBaseline):
    model: BaselineModel
    history_end: object
    last: float

    def predict(self, horizon, future_ext=None):
        return np.full(horizon, self.last)


@dataclass(eq=False)
class SeasonalNaive(FittedBaseline):
    model: BaselineModel
    history_end: object
    last_season: np.ndarray

    def predict(self, horizon, future_ext=None):
        return np.resize(self.last_season, horizon)


@dataclass(eq=False)
class ARX(FittedBaseline):
    """``y[t] = c + sum a_i y[t-i] + sum b_j u[t-j]`` with ``j`` from 0."""

    model: BaselineModel
    history_end: object
    ar_order: int
    exog_order: int
    intercept: float
    ar: np.ndarray
    exog: np.ndarray
    aic: float
    residuals: np.ndarray
    ridge: bool
    y_hist: np.ndarray
    u_hist: np.ndarray
    aic_table: dict = field(default_factory=dict)

    def predict(self, horizon, future_ext=None):
        if self.exog_order > 0:
            if future_ext is None or len(future_ext) < horizon:
                raise ValueError("ARX needs future external temperature over the horizon")
            fut = np.asarray(future_ext, dtype=float)[:horizon]
            u = np.concatenate([self.u_hist, fut])
            u = locf(u)
        else:
            u = self.u_hist
        y = np.concatenate([self.y_hist, np.empty(horizon)])
        n0 = self.y_hist.size
        for t in range(n0, n0 + horizon):
            val = self.intercept
            for i in range(self.ar_order):
                val += self.ar[i] * y[t - 1 - i]
            for j in range(self.exog_order):
                val += self.exog[j] * u[t - j]
            y[t] = val
        return y[n0:]


def _arx_design(y, u, q, r, start):
    rows = np.arange(start, y.size)
    cols = [np.ones(rows.size)]
    cols += [y[rows - 1 - i] for i in range(q)]
    cols += [u[rows - j] for j in range(r)]
    return np.column_stack(cols), y[rows]


def _solve(x, target):
    if np.linalg.matrix_rank(x) < x.shape[1]:
        beta = np.linalg.solve(x.T @ x + RIDGE_PENALTY * np.eye(x.shape[1]), x.T @ target)
        return beta, True
    beta, *_ = np.linalg.lstsq(x, target, rcond=None)
    return beta, False


def _arx_aic(resid, n_coef):
    n = resid.size
    ss = max(float(resid @ resid), 1e-300)
    return n * np.log(ss / n) + 2 * n_coef


def fit_arx(model, y, u, history_end) -> ARX:
    if model.orders is not None:
        grid = [model.orders]
        start = max(model.orders[0], model.orders[1] - 1, 0)
    else:
        grid = list(itertools.product(range(1, model.max_order + 1), repeat=2))
        start = model.max_order
    if y.size - start <= 2 * model.max_order + 1:
        raise InsufficientHistory(f"ARX needs more than {start + 2 * model.max_order + 1} ticks")
    best = None
    table = {}
    for q, r in grid:
        x, target = _arx_design(y, u, q, r, start)
        beta, ridge = _solve(x, target)
        resid = target - x @ beta
        score = _arx_aic(resid, 1 + q + r)
        table[(q, r)] = score
        # strict comparison keeps the smaller order on ties
        if best is None or score < best[0]:
            best = (score, q, r, beta, resid, ridge)
    score, q, r, beta, resid, ridge = best
    return ARX(model, history_end, q, r, float(beta[0]), beta[1:1 + q].copy(),
               beta[1 + q:].copy(), float(score), resid, ridge, y.copy(), u.copy(), table)


@dataclass(eq=False)
class HoltWinters(FittedBaseline):
    """Additive trend and additive 24-tick season."""

    model: BaselineModel
    history_end: object
    alpha: float
    beta: float
    gamma: float
    level: float
    trend: float
    season: np.ndarray
    rmse: float

    def predict(self, horizon, future_ext=None):
        h = np.arange(1, horizon + 1)
        return self.level + h * self.trend + self.season[(h - 1) % SEASON]


def fit_holt_winters(model, y, history_end) -> HoltWinters:
    grid = np.array(list(itertools.product(model.smoothing_grid, repeat=3)))
    a, b, g = grid[:, 0], grid[:, 1], grid[:, 2]
    level = np.full(len(grid), y[:SEASON].mean())
    trend = np.full(len(grid), (y[SEASON:2 * SEASON].mean() - y[:SEASON].mean()) / SEASON)
    season = np.tile(y[:SEASON] - y[:SEASON].mean(), (len(grid), 1))
    sse = np.zeros(len(grid))
    for t in range(y.size):
        k = t % SEASON
        s_old = season[:, k]
        err = y[t] - (level + trend + s_old)
        sse += err * err
        new_level = a * (y[t] - s_old) + (1 - a) * (level + trend)
        trend = b * (new_level - level) + (1 - b) * trend
        season[:, k] = g * (y[t] - new_level) + (1 - g) * s_old
        level = new_level
    i = int(np.argmin(sse))
    # rotate so that index 0 is the season slot of the first forecast tick
    rolled = np.roll(season[i], -(y.size % SEASON))
    return HoltWinters(model, history_end, *map(float, grid[i]), float(level[i]),
                       float(trend[i]), rolled, float(np.sqrt(sse[i] / y.size)))


def fit_baseline(model: BaselineModel, history_core: TemperatureSeries,
                 history_ext: TemperatureSeries) -> FittedBaseline:
    """Fit a baseline on aligned core and external history.

    Gaps are bridged by carrying the last observation forward.
    """
    if len(history_core) != len(history_ext):
        raise ValueError("core and ext history must be aligned")
    raw = history_core.values
    end = history_core.end_time
    if model.id is BaselineId.PERSISTENCE:
        _need(raw, 1, "persistence")
        return Persistence(model, end, float(locf(raw)[-1]))
    _need(raw, 2 * SEASON, model.id.value)
    y = locf(raw)
    if model.id is BaselineId.SEASONAL_NAIVE_24:
        return SeasonalNaive(model, end, y[-SEASON:].copy())
    if model.id is BaselineId.HOLT_WINTERS:
        return fit_holt_winters(model, y, end)
    return fit_arx(model, y, locf(history_ext.values), end)


def predict_baseline(fitted: FittedBaseline, horizon: int,
                     future_ext: TemperatureSeries | None = None) -> TemperatureSeries:
    if horizon < 1:
        raise ValueError("horizon must be positive")
    if future_ext is not None and future_ext.start_time != fitted.history_end:
        raise ValueError("future_ext must start where the history ends")
    fut = None if future_ext is None else future_ext.values
    values = fitted.predict(horizon, fut)
    return TemperatureSeries(values, fitted.history_end, sensor=False)
