"""Greedy AIC-driven cut-point search over day boundaries."""

from __future__ import annotations

import logging
import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import (
    EmptySegment,
    InsufficientDays,
    NoConvergence,
    TooFewObservations,
    ZeroVarianceWarning,
)
from .fitting import FitResult, SearchSpace, fit_segment
from .model import (
    HiveDataset,
    HiveParams,
    ModelConfig,
    TemperatureSeries,
    adjunct_series,
    reconstruct,
)

log = logging.getLogger(__name__)

PARAMS_PER_SEGMENT = 3
# errors that make a candidate cut unusable rather than aborting the search
_CANDIDATE_ERRORS = (TooFewObservations, NoConvergence, EmptySegment)

_SCREEN_STRENGTHS = (0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 11.0, 15.0, 20.0,
                     27.0, 36.0, 50.0, 70.0, 100.0)
_SCREEN_THETA_STEP = 0.25


@dataclass(frozen=True)
class LikelihoodSpec:
    """Gaussian residual model; ``sigma=None`` means the per-model MLE."""

    sigma: float | None = None

    def __post_init__(self):
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("fixed sigma must be positive")


def log_likelihood(residuals, spec: LikelihoodSpec = LikelihoodSpec()) -> float:
    """Gaussian log-likelihood of the residuals; NaN entries are skipped.

    Under the MLE policy an all-zero residual vector gives ``+inf`` and a
    ``ZeroVarianceWarning``.
    """
    r = np.asarray(residuals, dtype=float)
    r = r[~np.isnan(r)]
    n = r.size
    if n < 2:
        raise ValueError("log_likelihood needs at least two residuals")
    ss = float(r @ r)
    if spec.sigma is None:
        var = ss / n
        if var == 0.0:
            warnings.warn("residuals are identically zero", ZeroVarianceWarning, stacklevel=2)
            return math.inf
        return -0.5 * n * (math.log(2 * math.pi * var) + 1.0)
    var = spec.sigma ** 2
    return -0.5 * n * math.log(2 * math.pi * var) - ss / (2 * var)


def aic(log_lik: float, num_cuts: int, params_per_segment: int = PARAMS_PER_SEGMENT) -> float:
    if num_cuts < 0 or params_per_segment < 1:
        raise ValueError("num_cuts must be >= 0 and params_per_segment >= 1")
    return -2.0 * log_lik + 2.0 * (num_cuts + (num_cuts + 1) * params_per_segment)


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    cut_points: tuple[int, ...]
    cut_days: tuple[int, ...]
    segments: tuple[tuple[int, int], ...]
    params: tuple[HiveParams, ...]
    fits: tuple[FitResult, ...]
    reconstruction: TemperatureSeries
    aic: float
    aic_trace: tuple[tuple[int, float], ...]
    sigma_mle: float
    # cut days committed at each greedy round, before the parsimony choice
    greedy_cuts: tuple[tuple[int, ...], ...] = ()


class _FitCache:
    def __init__(self, dataset, space, config):
        self.dataset, self.space, self.config = dataset, space, config
        self._store: dict[tuple[int, int], FitResult | Exception] = {}
        self._lock = threading.Lock()
        self.misses = 0

    def get(self, span: tuple[int, int]) -> FitResult:
        with self._lock:
            hit = self._store.get(span)
        if hit is None:
            try:
                hit = fit_segment(self.dataset, span, self.space, self.config)
            except _CANDIDATE_ERRORS as exc:
                hit = exc
            with self._lock:
                self._store.setdefault(span, hit)
                self.misses += 1
        if isinstance(hit, Exception):
            raise hit
        return hit


def _evaluate(fits: Sequence[FitResult], spec: LikelihoodSpec):
    resid = np.concatenate([f.residuals for f in fits])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroVarianceWarning)
        ll = log_likelihood(resid, spec)
    return ll, aic(ll, len(fits) - 1), resid


def _screen_table(dataset: HiveDataset, space: SearchSpace, config: ModelConfig):
    """Cumulative per-day SSE for a coarse parameter grid, shape (grid, days + 1)."""
    s_c = [s for s in _SCREEN_STRENGTHS if space.s_c_range[0] <= s <= space.s_c_range[1]]
    s_h = [s for s in _SCREEN_STRENGTHS if space.s_h_range[0] <= s <= space.s_h_range[1]]
    lo, hi = space.theta_ideal_range
    theta = np.arange(lo, hi + 1e-9, _SCREEN_THETA_STEP)
    grid = np.array(np.meshgrid(s_c or [space.s_c_range[0]], s_h or [space.s_h_range[0]],
                                theta, indexing="ij")).reshape(3, -1).T.copy()
    literal, integrator, substeps, gap = config.kernel_args
    rss, _ = _kernels.day_grid_rss(
        np.ascontiguousarray(dataset.ext.values), np.ascontiguousarray(adjunct_series(dataset).values),
        np.ascontiguousarray(dataset.core.values), dataset.day_edges(), grid,
        literal, integrator, substeps, gap)
    table = np.zeros((grid.shape[0], dataset.n_days + 1))
    np.cumsum(rss, axis=1, out=table[:, 1:])
    return table


def _screen(table: np.ndarray, cuts: list[int], n_days: int, candidates: list[int],
            keep: int) -> list[int]:
    """The ``keep`` candidates with the lowest approximate total SSE."""
    edges = [0] + cuts + [n_days]

    def approx(a, b):
        return float(np.min(table[:, b] - table[:, a]))

    seg_cost = [approx(a, b) for a, b in zip(edges, edges[1:])]
    total = sum(seg_cost)
    scores = {}
    for i, (a, b) in enumerate(zip(edges, edges[1:])):
        inside = [p for p in candidates if a < p < b]
        if not inside:
            continue
        p = np.array(inside)
        left = np.min(table[:, p] - table[:, [a]], axis=0)
        right = np.min(table[:, [b]] - table[:, p], axis=0)
        for day, cost in zip(inside, total - seg_cost[i] + left + right):
            scores[day] = cost
    ranked = sorted(candidates, key=lambda d: (scores[d], d))
    return sorted(ranked[:keep])


def _select(trace: list[tuple[int, float]], relaxation: float) -> int:
    """Index of the smallest model within ``relaxation`` of the best AIC."""
    best = min(a for _, a in trace)
    if best == -math.inf:
        return next(i for i, (_, a) in enumerate(trace) if a == -math.inf)
    limit = best + (relaxation - 1.0) * abs(best)
    return next(i for i, (_, a) in enumerate(trace) if a <= limit)


def segment(dataset: HiveDataset, space: SearchSpace | None = None,
            config: ModelConfig = ModelConfig(), spec: LikelihoodSpec = LikelihoodSpec(),
            *, relaxation: float = 1.10, screen_top: int | None = 3,
            max_cuts: int | None = None, max_workers: int | None = None
            ) -> SegmentationResult:
    """Find cut days by greedy forward selection on AIC.

    Each round tries every unused interior day boundary as an extra cut, fits
    the affected segments and commits the cut with the lowest AIC; the search
    stops once AIC no longer improves. The returned model is the one with the
    fewest cuts whose AIC lies within ``relaxation - 1`` (relative) of the
    best AIC seen.

    With ``screen_top`` set, each round first ranks all candidates on a
    coarse per-day parameter grid and fully fits only the best few, which
    keeps the cost linear in the number of days. ``screen_top=None`` fits
    every candidate.
    """
    if not relaxation >= 1.0:
        raise ValueError("relaxation must be >= 1")
    if dataset.n_days < 2:
        raise InsufficientDays("segmentation needs at least two days")
    space = space or SearchSpace.for_config(config)
    cache = _FitCache(dataset, space, config)
    edges = dataset.day_edges()
    n_days = dataset.n_days
    limit = n_days - 1 if max_cuts is None else min(max_cuts, n_days - 1)

    def fits_for(cuts):
        days = [0] + cuts + [n_days]
        return [cache.get((int(edges[a]), int(edges[b]))) for a, b in zip(days, days[1:])]

    fits = fits_for([])
    ll, current, _ = _evaluate(fits, spec)
    history = [([], fits, current)]
    table = None
    cuts: list[int] = []

    while len(cuts) < limit and ll != math.inf:
        candidates = [d for d in range(1, n_days) if d not in cuts]
        if screen_top is not None and len(candidates) > screen_top:
            if table is None:
                table = _screen_table(dataset, space, config)
            candidates = _screen(table, cuts, n_days, candidates, screen_top)

        def trial(day):
            trial_cuts = sorted(cuts + [day])
            try:
                trial_fits = fits_for(trial_cuts)
            except _CANDIDATE_ERRORS as exc:
                log.debug("cut at day %d skipped: %s", day, exc)
                return None
            t_ll, t_aic, _ = _evaluate(trial_fits, spec)
            return t_aic, day, trial_cuts, trial_fits, t_ll

        if max_workers and max_workers > 1:
            with ThreadPoolExecutor(max_workers) as pool:
                outcomes = list(pool.map(trial, candidates))
        else:
            outcomes = [trial(d) for d in candidates]
        outcomes = [o for o in outcomes if o is not None]
        if not outcomes:
            break
        best_aic, _, best_cuts, best_fits, best_ll = min(outcomes, key=lambda o: (o[0], o[1]))
        if not best_aic < current:
            break
        cuts, current, ll = best_cuts, best_aic, best_ll
        history.append((cuts, best_fits, current))

    trace = [(len(c), a) for c, _, a in history]
    chosen_cuts, chosen_fits, chosen_aic = history[_select(trace, relaxation)]

    days = [0] + chosen_cuts + [n_days]
    segments = tuple((int(edges[a]), int(edges[b])) for a, b in zip(days, days[1:]))
    params = tuple(f.params for f in chosen_fits)
    recon = reconstruct(dataset, list(zip(segments, params)), config)
    resid = np.concatenate([f.residuals for f in chosen_fits])
    return SegmentationResult(
        cut_points=tuple(int(edges[d]) for d in chosen_cuts),
        cut_days=tuple(chosen_cuts),
        segments=segments,
        params=params,
        fits=tuple(chosen_fits),
        reconstruction=recon,
        aic=chosen_aic,
        aic_trace=tuple(trace),
        sigma_mle=float(np.sqrt(np.mean(resid ** 2))),
        greedy_cuts=tuple(tuple(c) for c, _, _ in history),
    )
