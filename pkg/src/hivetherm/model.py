"""Split P-controller model of hive core temperature.

All dynamics work on temperatures relative to the hive's ideal core
temperature. Between two hourly ticks the forcing ``theta_ext + theta_adj``
is held constant and the relative core temperature obeys::

    d(theta)/dt = theta_ext + theta_adj - (2 + s) * theta

where ``s`` is the cooling strength ``s_c`` while ``theta_ext >= 0`` and the
heating strength ``s_h`` otherwise. The default (stabilized) convention uses
``+s_h`` in the decay rate on both branches; ``SignConvention.LITERAL`` keeps
the destabilizing ``-s_h`` form for experiments.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import (
    EmptySegment,
    InvalidDataset,
    InvalidSeries,
    NumericalOverflow,
    TreatedPeriFullyMissing,
)

MISSING = float("nan")
STEP = timedelta(hours=1)
EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

SANITY_LOW = -50.0
SANITY_HIGH = 70.0
THETA_IDEAL_LOW = 31.0
THETA_IDEAL_HIGH = 38.0


def _as_values(values) -> np.ndarray:
    arr = np.array(
        [MISSING if v is None else v for v in values]
        if not isinstance(values, np.ndarray) else values,
        dtype=float,
    )
    if arr.ndim != 1:
        raise InvalidSeries("values must be one-dimensional")
    return arr


@dataclass(frozen=True, eq=False)
class TemperatureSeries:
    """Hourly temperature sequence in degrees C; NaN marks a missing tick."""

    values: np.ndarray
    start_time: datetime = EPOCH
    # model output is exempt from the sensor sanity bound
    sensor: bool = field(default=True, repr=False)

    def __post_init__(self):
        arr = _as_values(self.values).copy()
        if arr.size < 1:
            raise InvalidSeries("a series needs at least one tick")
        if np.isinf(arr).any():
            raise InvalidSeries("temperatures must be finite or missing")
        present = arr[~np.isnan(arr)]
        if self.sensor and present.size and (
                present.min() < SANITY_LOW or present.max() > SANITY_HIGH):
            raise InvalidSeries(
                f"temperature outside sanity bound [{SANITY_LOW}, {SANITY_HIGH}]"
            )
        arr.setflags(write=False)
        start = self.start_time
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "start_time", start.astimezone(timezone.utc))

    @property
    def step(self) -> timedelta:
        return STEP

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TemperatureSeries):
            return NotImplemented
        return (
            self.start_time == other.start_time
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def end_time(self) -> datetime:
        """Timestamp one step past the last tick."""
        return self.start_time + len(self) * STEP

    def times(self) -> list[datetime]:
        return [self.start_time + i * STEP for i in range(len(self))]

    def slice(self, start: int, end: int) -> "TemperatureSeries":
        return TemperatureSeries(self.values[start:end], self.start_time + start * STEP,
                                 self.sensor)

    def to_list(self) -> list:
        return [None if math.isnan(v) else float(v) for v in self.values]


class HiveType(enum.Enum):
    CONTROL = "control"
    TREATED = "treated"


@dataclass(frozen=True, eq=False)
class HiveDataset:
    """Aligned external, peripheral and core series for one hive."""

    hive_id: str
    hive_type: HiveType
    ext: TemperatureSeries
    peri: TemperatureSeries
    core: TemperatureSeries
    day_boundaries: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "hive_type", HiveType(self.hive_type))
        object.__setattr__(self, "day_boundaries", tuple(int(b) for b in self.day_boundaries))
        n = len(self.core)
        for name in ("ext", "peri"):
            s = getattr(self, name)
            if len(s) != n or s.start_time != self.core.start_time:
                raise InvalidDataset(f"{name} is not aligned with core")
        b = self.day_boundaries
        if not b or b[0] != 0:
            raise InvalidDataset("day boundaries must start at 0")
        if any(y <= x for x, y in zip(b, b[1:])) or b[-1] >= n:
            raise InvalidDataset("day boundaries must be strictly increasing and inside the grid")

    @classmethod
    def from_arrays(cls, ext, core, peri=None, *, hive_id: str = "hive",
                    hive_type: HiveType = HiveType.CONTROL,
                    start_time: datetime = EPOCH,
                    day_boundaries: Sequence[int] | None = None) -> "HiveDataset":
        """Build a dataset from plain arrays; days default to 24-tick blocks."""
        core_s = TemperatureSeries(core, start_time)
        n = len(core_s)
        if peri is None:
            peri = np.full(n, MISSING)
        if day_boundaries is None:
            day_boundaries = range(0, n, 24)
        return cls(hive_id, hive_type, TemperatureSeries(ext, start_time),
                   TemperatureSeries(peri, start_time), core_s, tuple(day_boundaries))

    @property
    def n_ticks(self) -> int:
        return len(self.core)

    @property
    def n_days(self) -> int:
        return len(self.day_boundaries)

    def day_edges(self) -> np.ndarray:
        """Day start ticks followed by the grid length."""
        return np.array(self.day_boundaries + (self.n_ticks,), dtype=np.int64)

    def day_span(self, first_day: int, end_day: int) -> tuple[int, int]:
        """Tick range ``[start, end)`` covering days ``first_day .. end_day - 1``."""
        edges = self.day_edges()
        if not 0 <= first_day < end_day <= self.n_days:
            raise IndexError(f"day range [{first_day}, {end_day}) outside 0..{self.n_days}")
        return int(edges[first_day]), int(edges[end_day])

    def day_of_tick(self, tick: int) -> int:
        return int(np.searchsorted(self.day_boundaries, tick, side="right") - 1)

    def slice_days(self, first_day: int, end_day: int) -> "HiveDataset":
        a, b = self.day_span(first_day, end_day)
        bounds = tuple(x - a for x in self.day_boundaries[first_day:end_day])
        return HiveDataset(self.hive_id, self.hive_type, self.ext.slice(a, b),
                           self.peri.slice(a, b), self.core.slice(a, b), bounds)


@dataclass(frozen=True, order=True)
class HiveParams:
    """Cooling strength, heating strength and ideal core temperature."""

    s_c: float
    s_h: float
    theta_ideal: float

    def __post_init__(self):
        for name in ("s_c", "s_h", "theta_ideal"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.s_c < 0 or self.s_h < 0:
            raise ValueError("strengths must be non-negative")
        if not THETA_IDEAL_LOW <= self.theta_ideal <= THETA_IDEAL_HIGH:
            raise ValueError(
                f"theta_ideal {self.theta_ideal} outside [{THETA_IDEAL_LOW}, {THETA_IDEAL_HIGH}]"
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.s_c, self.s_h, self.theta_ideal])


class SignConvention(enum.Enum):
    STABILIZED = "stabilized"
    LITERAL = "literal"


class Integrator(enum.Enum):
    EXACT = "exact"
    EULER = "euler"


@dataclass(frozen=True)
class ModelConfig:
    s_inf: float = 100.0
    sign_convention: SignConvention = SignConvention.STABILIZED
    integrator: Integrator = Integrator.EXACT
    euler_substeps: int = 128
    reseed_gap: int = 6

    def __post_init__(self):
        object.__setattr__(self, "sign_convention", SignConvention(self.sign_convention))
        object.__setattr__(self, "integrator", Integrator(self.integrator))
        if not self.s_inf > 50:
            raise ValueError("s_inf must exceed 50")
        if self.euler_substeps < 1:
            raise ValueError("euler_substeps must be >= 1")
        if self.reseed_gap < 1:
            raise ValueError("reseed_gap must be >= 1")

    def check(self, params: HiveParams) -> None:
        if params.s_c > self.s_inf or params.s_h > self.s_inf:
            raise ValueError(f"strengths must not exceed s_inf={self.s_inf}")

    @property
    def kernel_args(self) -> tuple[bool, int, int, int]:
        integrator = _kernels.EXACT if self.integrator is Integrator.EXACT else _kernels.EULER
        return (self.sign_convention is SignConvention.LITERAL, integrator,
                self.euler_substeps, self.reseed_gap)


def relative(series: TemperatureSeries, theta_ideal: float) -> np.ndarray:
    """Series values as deviations from ``theta_ideal`` (NaN stays NaN).

    Relative values may leave the absolute sanity bound, so a plain array is
    returned rather than a ``TemperatureSeries``.
    """
    if not math.isfinite(theta_ideal):
        raise ValueError("theta_ideal must be finite")
    return series.values - theta_ideal


def adjunct_series(dataset: HiveDataset) -> TemperatureSeries:
    """The second-surface forcing: ext for control hives, peri for treated ones.

    Missing peripheral ticks of a treated hive fall back to ext.
    """
    if dataset.hive_type is HiveType.CONTROL:
        return dataset.ext
    peri = dataset.peri.values
    if not dataset.peri.present.any():
        raise TreatedPeriFullyMissing(f"hive {dataset.hive_id!r} has no peripheral readings")
    filled = np.where(np.isnan(peri), dataset.ext.values, peri)
    return TemperatureSeries(filled, dataset.peri.start_time)


def step(theta: float, theta_ext: float, theta_adj: float, params: HiveParams,
         config: ModelConfig = ModelConfig(), dt: float = 1.0) -> float:
    """Advance the relative core temperature by ``dt`` hours."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    literal, integrator, substeps, _ = config.kernel_args
    k = _kernels.gain(theta_ext, params.s_c, params.s_h, literal)
    out = _kernels.advance(theta, theta_ext + theta_adj, k, dt, integrator, substeps)
    if not abs(out) <= _kernels.OVERFLOW_LIMIT:
        raise NumericalOverflow(f"|theta| exceeded {_kernels.OVERFLOW_LIMIT:g}")
    return out


Segment = tuple[int, int]


def _check_segments(dataset: HiveDataset, segments: Iterable[Segment]) -> list[Segment]:
    segs = [(int(a), int(b)) for a, b in segments]
    edges = set(dataset.day_edges().tolist())
    pos = 0
    for a, b in segs:
        if a != pos or b <= a:
            raise ValueError("segments must tile the grid in order without overlap")
        if a not in edges or b not in edges:
            raise ValueError(f"segment [{a}, {b}) does not start and end on day boundaries")
        pos = b
    if pos != dataset.n_ticks:
        raise ValueError("segments must cover the whole grid")
    return segs


def integrate_segment(ext: np.ndarray, adj: np.ndarray, core: np.ndarray,
                      params: HiveParams, config: ModelConfig) -> np.ndarray:
    """Reconstruct one stretch of absolute core temperature from raw arrays."""
    out = np.empty(core.shape[0])
    literal, integrator, substeps, gap = config.kernel_args
    status = _kernels.integrate(
        np.ascontiguousarray(ext, dtype=float), np.ascontiguousarray(adj, dtype=float),
        np.ascontiguousarray(core, dtype=float), params.theta_ideal, params.s_c,
        params.s_h, literal, integrator, substeps, gap, out)
    if status == _kernels.STATUS_OVERFLOW:
        raise NumericalOverflow(f"|theta| exceeded {_kernels.OVERFLOW_LIMIT:g}")
    return out


def reconstruct(dataset: HiveDataset,
                params_per_segment: Sequence[tuple[Segment, HiveParams]],
                config: ModelConfig = ModelConfig()) -> TemperatureSeries:
    """Model reconstruction of the core series over the whole grid.

    Each segment is seeded from its own first present core value and then runs
    on the observed forcing only.
    """
    segs = _check_segments(dataset, [s for s, _ in params_per_segment])
    adj = adjunct_series(dataset).values
    ext = dataset.ext.values
    core = dataset.core.values
    out = np.full(dataset.n_ticks, MISSING)
    for (a, b), (_, params) in zip(segs, params_per_segment):
        config.check(params)
        if not dataset.core.present[a:b].any():
            raise EmptySegment(f"segment [{a}, {b}) has no core observations")
        out[a:b] = integrate_segment(ext[a:b], adj[a:b], core[a:b], params, config)
    return TemperatureSeries(out, dataset.core.start_time, sensor=False)


def simulate(ext: np.ndarray, adj: np.ndarray, params: HiveParams, initial: float,
             config: ModelConfig = ModelConfig()) -> np.ndarray:
    """Free-running absolute trajectory starting from ``initial`` at tick 0.

    Tick ``i + 1`` is reached from tick ``i`` with the forcing observed at
    tick ``i``. No gaps are allowed in the forcing.
    """
    ext = np.asarray(ext, dtype=float)
    adj = np.asarray(adj, dtype=float)
    if np.isnan(ext).any() or np.isnan(adj).any():
        raise ValueError("simulate needs complete forcing")
    core = np.full(ext.shape[0], MISSING)
    core[0] = initial
    return integrate_segment(ext, adj, core, params, config)
