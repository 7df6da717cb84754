"""Synthetic hive recordings with known regime parameters."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .model import (
    MISSING,
    HiveDataset,
    HiveParams,
    HiveType,
    ModelConfig,
    TemperatureSeries,
    integrate_segment,
)


@dataclass(frozen=True)
class ExtProfile:
    """Daily external temperature shape.

    ``heatwave_days`` maps a day index to the peak temperature reached that
    afternoon. ``day_jitter`` is the spread of a slowly varying offset of
    the daily mean; ``hourly_noise`` is bounded weather noise.
    """

    mean: float = 32.0
    amplitude: float = 7.0
    heatwave_days: tuple[tuple[int, float], ...] = ()
    day_jitter: float = 1.5
    hourly_noise: float = 0.3
    peak_hour: int = 15


@dataclass(frozen=True)
class ScenarioSpec:
    num_days: int
    regimes: tuple[tuple[int, HiveParams], ...]
    hive_type: HiveType = HiveType.CONTROL
    ext_profile: ExtProfile = ExtProfile()
    noise_sigma: float = 0.0
    missing_pattern: tuple[tuple[int, int], ...] = ()
    seed: int = 0
    ice_offset: float = 8.0
    initial_offset: float = 0.0
    hive_id: str = "synthetic"
    start_time: datetime = datetime(2021, 8, 1, tzinfo=timezone.utc)

    def __post_init__(self):
        object.__setattr__(self, "hive_type", HiveType(self.hive_type))
        object.__setattr__(self, "regimes", tuple((int(d), p) for d, p in self.regimes))
        object.__setattr__(self, "missing_pattern",
                           tuple((int(a), int(n)) for a, n in self.missing_pattern))

    def validate(self, config: ModelConfig) -> None:
        if self.num_days < 1:
            raise ValueError("num_days must be positive")
        days = [d for d, _ in self.regimes]
        if not days or days[0] != 0:
            raise ValueError("regimes must start at day 0")
        if any(b <= a for a, b in zip(days, days[1:])) or days[-1] >= self.num_days:
            raise ValueError("regime start days must be strictly increasing and inside the scenario")
        for _, p in self.regimes:
            config.check(p)
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        n = 24 * self.num_days
        for start, length in self.missing_pattern:
            if start < 0 or length < 0 or start + length > n:
                raise ValueError(f"gap ({start}, {length}) outside the {n}-tick grid")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    regimes: tuple[tuple[int, HiveParams], ...]
    cut_days: tuple[int, ...]
    cut_ticks: tuple[int, ...]
    clean_core: np.ndarray
    adj: np.ndarray


def external_temperature(profile: ExtProfile, num_days: int,
                         rng: np.random.Generator) -> np.ndarray:
    n = 24 * num_days
    t = np.arange(n, dtype=float)
    hour = t % 24
    shape = np.cos(2 * np.pi * (hour - profile.peak_hour) / 24)
    # daily offsets pinned at noon, linearly blended in between
    offsets = rng.normal(0.0, profile.day_jitter, num_days) if profile.day_jitter > 0 \
        else np.zeros(num_days)
    offset = np.interp(t, 24 * np.arange(num_days) + 12, offsets)
    noise = np.clip(rng.normal(0.0, profile.hourly_noise, n), -0.45, 0.45) \
        if profile.hourly_noise > 0 else np.zeros(n)
    ext = profile.mean + offset + profile.amplitude * shape + noise
    for day, peak in profile.heatwave_days:
        if not 0 <= day < num_days:
            continue
        sl = slice(24 * day, 24 * day + 24)
        top = profile.mean + offset[sl] + profile.amplitude
        extra = np.maximum(peak - top, 0.0)
        ext[sl] += extra * (0.5 + 0.5 * shape[sl])
    return ext


def generate(spec: ScenarioSpec, config: ModelConfig = ModelConfig()
             ) -> tuple[HiveDataset, GroundTruth]:
    """Simulate one hive under ``spec``; returns the dataset and its truth."""
    spec.validate(config)
    rng = np.random.default_rng(spec.seed)
    n = 24 * spec.num_days
    ext = external_temperature(spec.ext_profile, spec.num_days, rng)

    if spec.hive_type is HiveType.TREATED:
        peri = ext.copy()
        for day, _ in spec.ext_profile.heatwave_days:
            if 0 <= day < spec.num_days:
                peri[24 * day:24 * day + 24] -= spec.ice_offset
        adj = peri
    else:
        peri = np.full(n, MISSING)
        adj = ext

    starts = [24 * d for d, _ in spec.regimes] + [n]
    clean = np.empty(n)
    seed_value = spec.regimes[0][1].theta_ideal + spec.initial_offset
    for (a, b), (_, params) in zip(zip(starts, starts[1:]), spec.regimes):
        # one extra tick carries the end state into the next regime
        stop = min(b + 1, n)
        core = np.full(stop - a, MISSING)
        core[0] = seed_value
        out = integrate_segment(ext[a:stop], adj[a:stop], core, params, config)
        clean[a:b] = out[:b - a]
        if stop > b:
            seed_value = out[b - a]

    observed = clean + rng.normal(0.0, spec.noise_sigma, n) if spec.noise_sigma > 0 \
        else clean.copy()
    for start, length in spec.missing_pattern:
        observed[start:start + length] = MISSING

    t0 = spec.start_time
    dataset = HiveDataset(
        spec.hive_id, spec.hive_type,
        TemperatureSeries(ext, t0), TemperatureSeries(peri, t0),
        TemperatureSeries(observed, t0), tuple(range(0, n, 24)),
    )
    cut_days = tuple(d for d, _ in spec.regimes[1:])
    truth = GroundTruth(spec.regimes, cut_days, tuple(24 * d for d in cut_days),
                        clean, adj.copy())
    return dataset, truth
