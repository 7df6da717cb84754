"""Per-segment estimation of cooling/heating strengths and ideal temperature."""

from __future__ import annotations

import enum
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import AllDegenerate, HiveThermError, NoConvergence, TooFewObservations
from .model import (
    THETA_IDEAL_HIGH,
    THETA_IDEAL_LOW,
    HiveDataset,
    HiveParams,
    ModelConfig,
    Segment,
    adjunct_series,
    integrate_segment,
)

log = logging.getLogger(__name__)

STRENGTHS = ("s_c", "s_h")

MIN_OBSERVATIONS = 12
CONSTANT_CORE_RANGE = 0.3
MAX_ITER = 200
RTOL = 1e-6
FD_STEP = 1e-4


class Degeneracy(enum.Enum):
    NONE = "none"
    CONSTANT_CORE = "constant_core"
    ONE_SIDED_EXT = "one_sided_ext"


def _seed_grid(s_c_range, s_h_range, theta_range) -> tuple[HiveParams, ...]:
    levels = [(lo, 0.5 * (lo + hi), hi) for lo, hi in (s_c_range, s_h_range, theta_range)]
    return tuple(HiveParams(*x) for x in itertools.product(*levels))


@dataclass(frozen=True)
class SearchSpace:
    """Parameter box and the deterministic multistart seeds."""

    s_c_range: tuple[float, float] = (0.0, 100.0)
    s_h_range: tuple[float, float] = (0.0, 100.0)
    theta_ideal_range: tuple[float, float] = (THETA_IDEAL_LOW, THETA_IDEAL_HIGH)
    multistart_grid: tuple[HiveParams, ...] = ()

    def __post_init__(self):
        for name in ("s_c_range", "s_h_range", "theta_ideal_range"):
            lo, hi = map(float, getattr(self, name))
            if not lo <= hi:
                raise ValueError(f"{name} is empty")
            object.__setattr__(self, name, (lo, hi))
        if self.s_c_range[0] < 0 or self.s_h_range[0] < 0:
            raise ValueError("strength ranges must be non-negative")
        if not self.multistart_grid:
            object.__setattr__(self, "multistart_grid", _seed_grid(
                self.s_c_range, self.s_h_range, self.theta_ideal_range))

    @classmethod
    def for_config(cls, config: ModelConfig, **kw) -> "SearchSpace":
        return cls((0.0, config.s_inf), (0.0, config.s_inf), **kw)

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.s_c_range[0], self.s_h_range[0], self.theta_ideal_range[0]])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.s_c_range[1], self.s_h_range[1], self.theta_ideal_range[1]])

    def contains(self, params: HiveParams) -> bool:
        x = params.as_array()
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True, eq=False)
class FitResult:
    """Best parameters for one segment and the residuals they leave.

    ``unidentified`` names the strengths the data could not pin down;
    ``filled`` names those later replaced by interpolation across days
    (``rmse`` and ``residuals`` always describe the raw fit).
    """

    segment: Segment
    params: HiveParams
    rmse: float
    sse: float
    n_used: int
    residual_ticks: np.ndarray
    residuals: np.ndarray
    degenerate: Degeneracy = Degeneracy.NONE
    unidentified: frozenset = frozenset()
    filled: frozenset = frozenset()
    iterations: int = 0


class DayFitErrors(HiveThermError):
    """Some days of a per-day fit failed; the others are in ``results``."""

    def __init__(self, results, failures):
        days = ", ".join(str(d) for d in sorted(failures))
        super().__init__(f"fit failed on day(s) {days}")
        self.results = results
        self.failures = failures


def _check_whole_days(dataset: HiveDataset, segment: Segment) -> tuple[int, int]:
    a, b = int(segment[0]), int(segment[1])
    edges = set(dataset.day_edges().tolist())
    if a not in edges or b not in edges or b <= a:
        raise ValueError(f"segment [{a}, {b}) must cover whole days")
    return a, b


def _run_seeds(ext, adj, core, space: SearchSpace, config: ModelConfig):
    literal, integrator, substeps, gap = config.kernel_args
    lo, hi = space.lower, space.upper
    runs = []
    for seed in space.multistart_grid:
        x, sse, count, iters = _kernels.damped_least_squares(
            ext, adj, core, seed.as_array(), lo, hi, literal, integrator,
            substeps, gap, MAX_ITER, RTOL, FD_STEP)
        if count > 0 and np.isfinite(sse):
            runs.append((sse, tuple(x), count, iters))
    return runs


def _pick(runs):
    best = min(r[0] for r in runs)
    tol = best * 1e-12 + 1e-300
    tied = [r for r in runs if r[0] <= best + tol]
    # lower s_c, then s_h, then theta_ideal
    return min(tied, key=lambda r: r[1])


def fit_segment(dataset: HiveDataset, segment: Segment, space: SearchSpace | None = None,
                config: ModelConfig = ModelConfig()) -> FitResult:
    """Least-squares fit of one parameter triple over ``segment`` (whole days).

    Every multistart seed is refined by box-clamped Levenberg-Marquardt and
    the lowest-RMSE end point wins. Near-constant core data gets
    both strengths pinned at the upper bound and flagged; data whose external
    temperature stays on one side of the fitted ideal flags the
    strength that was never exercised.
    """
    space = space or SearchSpace.for_config(config)
    if space.s_c_range[1] > config.s_inf or space.s_h_range[1] > config.s_inf:
        raise ValueError("search space exceeds config.s_inf")
    a, b = _check_whole_days(dataset, segment)
    core = np.ascontiguousarray(dataset.core.values[a:b])
    present = ~np.isnan(core)
    n_present = int(present.sum())
    if n_present < MIN_OBSERVATIONS:
        raise TooFewObservations(
            f"segment [{a}, {b}) has {n_present} core observations, need {MIN_OBSERVATIONS}")
    ext = np.ascontiguousarray(dataset.ext.values[a:b])
    adj = np.ascontiguousarray(adjunct_series(dataset).values[a:b])

    runs = _run_seeds(ext, adj, core, space, config)
    if not runs:
        raise NoConvergence(f"no seed produced a usable reconstruction on [{a}, {b})")
    sse, x, count, iters = _pick(runs)
    params = HiveParams(*x)

    observed = core[present]
    degenerate = Degeneracy.NONE
    unidentified: frozenset = frozenset()
    if observed.max() - observed.min() < CONSTANT_CORE_RANGE:
        degenerate = Degeneracy.CONSTANT_CORE
        unidentified = frozenset(STRENGTHS)
        params = replace(params, s_c=space.s_c_range[1], s_h=space.s_h_range[1])
    else:
        rel_ext = ext[~np.isnan(ext)] - params.theta_ideal
        if rel_ext.size and rel_ext.min() >= 0:
            degenerate, unidentified = Degeneracy.ONE_SIDED_EXT, frozenset({"s_h"})
        elif rel_ext.size and rel_ext.max() < 0:
            degenerate, unidentified = Degeneracy.ONE_SIDED_EXT, frozenset({"s_c"})

    recon = integrate_segment(ext, adj, core, params, config)
    used = present & ~np.isnan(recon)
    resid = recon[used] - core[used]
    n_used = int(used.sum())
    sse = float(resid @ resid)
    rmse = float(np.sqrt(sse / n_used)) if n_used else float("nan")

    if degenerate is not Degeneracy.CONSTANT_CORE:
        baseline = float(np.std(observed))
        if not rmse < 2.0 * baseline:
            raise NoConvergence(
                f"best RMSE {rmse:.4g} on [{a}, {b}) is not below twice the "
                f"constant-predictor RMSE {baseline:.4g}")

    return FitResult((a, b), params, rmse, sse, n_used,
                     np.flatnonzero(used) + a, resid, degenerate, unidentified,
                     iterations=int(iters))


def fill_unidentified(per_day_fits: Sequence[FitResult]) -> list[FitResult]:
    """Replace unidentified strengths by linear interpolation across days.

    Days before the first (after the last) identified value take that value.
    """
    fits = list(per_day_fits)
    if not fits:
        return []
    idx = np.arange(len(fits))
    filled_values = {}
    for name in STRENGTHS:
        known = np.array([name not in f.unidentified for f in fits])
        if not known.any():
            raise AllDegenerate(f"{name} is unidentified on every day")
        values = np.array([getattr(f.params, name) for f in fits])
        filled_values[name] = np.interp(idx, idx[known], values[known])
    out = []
    for i, f in enumerate(fits):
        if not f.unidentified:
            out.append(f)
            continue
        changes = {name: float(filled_values[name][i]) for name in f.unidentified}
        out.append(replace(f, params=replace(f.params, **changes),
                           filled=frozenset(changes)))
    return out


def fit_per_day(dataset: HiveDataset, space: SearchSpace | None = None,
                config: ModelConfig = ModelConfig(), max_workers: int | None = None
                ) -> list[FitResult]:
    """Independent fit of every day followed by ``fill_unidentified``.

    Failed days do not stop the others; if any fail, ``DayFitErrors`` is
    raised afterwards carrying the partial results.
    """
    space = space or SearchSpace.for_config(config)
    spans = [dataset.day_span(d, d + 1) for d in range(dataset.n_days)]

    def one(span):
        try:
            return fit_segment(dataset, span, space, config)
        except HiveThermError as exc:
            return exc

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            outcomes = list(pool.map(one, spans))
    else:
        outcomes = [one(s) for s in spans]

    failures = {d: r for d, r in enumerate(outcomes) if isinstance(r, Exception)}
    if failures:
        for d, exc in failures.items():
            log.warning("day %d: %s", d, exc)
        raise DayFitErrors([None if isinstance(r, Exception) else r for r in outcomes],
                           failures)
    return fill_unidentified(outcomes)


def strength_summary(params: Sequence[HiveParams], weak: float = 10.0) -> dict:
    """Share of fits where heating beats cooling and where both are weak."""
    s_c = np.array([p.s_c for p in params])
    s_h = np.array([p.s_h for p in params])
    if s_c.size == 0:
        raise ValueError("no parameters given")
    return {
        "n": int(s_c.size),
        "heating_easier": float(np.mean(s_h > s_c)),
        "cooling_easier": float(np.mean(s_c > s_h)),
        "weak": float(np.mean((s_c < weak) & (s_h < weak))),
        "median_s_c": float(np.median(s_c)),
        "median_s_h": float(np.median(s_h)),
    }
