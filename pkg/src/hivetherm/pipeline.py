"""Run configuration and the end-to-end pipelines behind the command line."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .baselines import BaselineId
from .errors import InvalidDataset
from .fitting import SearchSpace, fit_per_day
from .forecasting import ForecastRequest, forecast, rolling_evaluation
from .ingest import ingest, write_sensor_csv
from .model import STEP, HiveDataset, HiveParams, HiveType, ModelConfig, reconstruct
from .segmentation import LikelihoodSpec, segment
from .synthgen import ExtProfile, ScenarioSpec, generate

log = logging.getLogger(__name__)

COMMANDS = ("simulate", "fit", "segment", "forecast", "evaluate")


def _params(d) -> HiveParams:
    if isinstance(d, HiveParams):
        return d
    if isinstance(d, (list, tuple)):
        return HiveParams(*d)
    return HiveParams(d["s_c"], d["s_h"], d["theta_ideal"])


def scenario_from_dict(d: dict) -> ScenarioSpec:
    prof = dict(d.get("ext_profile", {}))
    if "heatwave_days" in prof:
        prof["heatwave_days"] = tuple(
            (int(x["day"]), float(x["peak"])) if isinstance(x, dict) else (int(x[0]), float(x[1]))
            for x in prof["heatwave_days"])
    regimes = tuple((int(r["start_day"]), _params(r)) for r in d["regimes"])
    kw = {k: d[k] for k in ("noise_sigma", "seed", "ice_offset", "initial_offset", "hive_id")
          if k in d}
    if "start_time" in d:
        kw["start_time"] = datetime.fromisoformat(d["start_time"].replace("Z", "+00:00"))
    return ScenarioSpec(
        num_days=int(d["num_days"]), regimes=regimes,
        hive_type=HiveType(d.get("hive_type", "control")),
        ext_profile=ExtProfile(**prof),
        missing_pattern=tuple(tuple(g) for g in d.get("missing_pattern", ())), **kw)


def scenario_to_dict(s: ScenarioSpec) -> dict:
    prof = asdict(s.ext_profile)
    prof["heatwave_days"] = [{"day": d, "peak": p} for d, p in s.ext_profile.heatwave_days]
    return {
        "hive_id": s.hive_id, "num_days": s.num_days, "hive_type": s.hive_type.value,
        "regimes": [{"start_day": d, **asdict(p)} for d, p in s.regimes],
        "ext_profile": prof, "noise_sigma": s.noise_sigma,
        "missing_pattern": [list(g) for g in s.missing_pattern], "seed": s.seed,
        "ice_offset": s.ice_offset, "initial_offset": s.initial_offset,
        "start_time": s.start_time.isoformat().replace("+00:00", "Z"),
    }


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = ModelConfig()
    search: SearchSpace = SearchSpace()
    likelihood: LikelihoodSpec = LikelihoodSpec()
    relaxation: float = 1.10
    screen_top: int | None = 3
    fit_days: int = 3
    horizon_days: int = 7
    baselines: tuple[BaselineId, ...] = tuple(BaselineId)
    output_dir: str = "out"
    timezone: str = "UTC"
    hive_types: dict = field(default_factory=dict)
    scenarios: tuple[ScenarioSpec, ...] = ()

    def __post_init__(self):
        if self.search.s_c_range[1] > self.model.s_inf or self.search.s_h_range[1] > self.model.s_inf:
            raise ValueError("search space exceeds model.s_inf")
        if self.fit_days < 1 or self.horizon_days < 1:
            raise ValueError("fit_days and horizon_days must be positive")
        for s in self.scenarios:
            s.validate(self.model)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        model = ModelConfig(**d.get("model", {}))
        sd = dict(d.get("search", {}))
        sd.setdefault("s_c_range", (0.0, model.s_inf))
        sd.setdefault("s_h_range", (0.0, model.s_inf))
        if "multistart_grid" in sd:
            sd["multistart_grid"] = tuple(_params(p) for p in sd["multistart_grid"])
        seg = d.get("segmentation", {})
        fc = d.get("forecasting", {})
        return cls(
            model=model, search=SearchSpace(**sd),
            likelihood=LikelihoodSpec(**d.get("likelihood", {})),
            relaxation=float(seg.get("relaxation", 1.10)),
            screen_top=seg.get("screen_top", 3),
            fit_days=int(fc.get("fit_days", 3)), horizon_days=int(fc.get("horizon_days", 7)),
            baselines=tuple(BaselineId(b) for b in d.get("baselines", [b.value for b in BaselineId])),
            output_dir=str(d.get("output_dir", "out")), timezone=d.get("timezone", "UTC"),
            hive_types={k: HiveType(v) for k, v in d.get("hive_types", {}).items()},
            scenarios=tuple(scenario_from_dict(s) for s in d.get("scenarios", ())),
        )

    def to_dict(self) -> dict:
        m = self.model
        return {
            "model": {"s_inf": m.s_inf, "sign_convention": m.sign_convention.value,
                      "integrator": m.integrator.value, "euler_substeps": m.euler_substeps,
                      "reseed_gap": m.reseed_gap},
            "search": {"s_c_range": list(self.search.s_c_range),
                       "s_h_range": list(self.search.s_h_range),
                       "theta_ideal_range": list(self.search.theta_ideal_range),
                       "multistart_grid": [list(asdict(p).values())
                                           for p in self.search.multistart_grid]},
            "likelihood": {"sigma": self.likelihood.sigma},
            "segmentation": {"relaxation": self.relaxation, "screen_top": self.screen_top},
            "forecasting": {"fit_days": self.fit_days, "horizon_days": self.horizon_days},
            "baselines": [b.value for b in self.baselines],
            "output_dir": self.output_dir,
            "timezone": self.timezone,
            "hive_types": {k: v.value for k, v in sorted(self.hive_types.items())},
            "scenarios": [scenario_to_dict(s) for s in self.scenarios],
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def hive_type(self, hive_id: str) -> HiveType | None:
        if hive_id in self.hive_types:
            return self.hive_types[hive_id]
        for s in self.scenarios:
            if s.hive_id == hive_id:
                return s.hive_type
        return None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_dict(json.load(fh))


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n",
                    encoding="utf-8")
    return path


def _iso(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _series_csv(path: Path, times, columns: dict, config_hash: str) -> Path:
    df = pd.DataFrame({"timestamp": [_iso(t) for t in times], **columns})
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash: {config_hash}\n")
        df.to_csv(fh, index=False, na_rep="")
    return path


def _plot(path: Path, ds: HiveDataset, fitted: np.ndarray | None, label: str,
          cut_ticks: Sequence[int] = (), forecast_start: int | None = None) -> Path:
    # the object API avoids pyplot's global state, so hives can plot in parallel
    from matplotlib.figure import Figure

    t = np.arange(ds.n_ticks) / 24.0
    fig = Figure(figsize=(10, 3.5))
    ax = fig.subplots()
    ax.plot(t, ds.ext.values, color="0.6", lw=0.8, label="external")
    ax.plot(t, ds.core.values, color="tab:blue", lw=1.0, label="core")
    if fitted is not None:
        tt = t if forecast_start is None else t[forecast_start:forecast_start + fitted.size]
        ax.plot(tt, fitted, color="tab:red", lw=1.0, ls="--" if forecast_start else "-",
                label=label)
    for c in cut_ticks:
        ax.axvline(c / 24.0, color="saddlebrown", lw=1.2)
    ax.set_xlabel("day")
    ax.set_ylabel("temperature (C)")
    ax.set_title(ds.hive_id)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    return path


def _params_dict(p: HiveParams) -> dict:
    return {"s_c": p.s_c, "s_h": p.s_h, "theta_ideal": p.theta_ideal}


def _tick_time(ds: HiveDataset, tick: int) -> str:
    return _iso(ds.core.start_time + tick * STEP)


def _load_inputs(config: RunConfig, inputs: Sequence[str], hives: Sequence[str] | None):
    datasets = ingest(inputs, None, config.timezone)
    out = []
    for ds in datasets:
        if hives and ds.hive_id not in hives:
            continue
        t = config.hive_type(ds.hive_id)
        if t is not None and t is not ds.hive_type:
            ds = replace(ds, hive_type=t)
        out.append(ds)
    if not out:
        raise InvalidDataset("no hive matched the inputs and --hive filter")
    return out


def _per_hive(fn, datasets):
    """Apply ``fn`` to every hive concurrently; results keep the input order."""
    workers = min(len(datasets), os.cpu_count() or 1)
    if workers <= 1:
        return [fn(ds) for ds in datasets]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, datasets))


def _run_simulate(config, out, chash, seed, plots):
    if not config.scenarios:
        raise InvalidDataset("config has no scenarios to simulate")
    datasets, truths = [], []
    for i, spec in enumerate(config.scenarios):
        if seed is not None:
            spec = replace(spec, seed=seed + i)
        ds, truth = generate(spec, config.model)
        datasets.append(ds)
        truths.append({
            "hive_id": ds.hive_id, "hive_type": ds.hive_type.value, "seed": spec.seed,
            "regimes": [{"start_day": d, **_params_dict(p)} for d, p in truth.regimes],
            "cut_days": list(truth.cut_days),
            "cut_points": list(truth.cut_ticks),
            "cut_times": [_tick_time(ds, t) for t in truth.cut_ticks],
        })
        if plots:
            _plot(out / f"simulate_{ds.hive_id}.svg", ds, None, "", truth.cut_ticks)
    csv_path = write_sensor_csv(datasets, out / "sensors.csv", f"config_hash: {chash}")
    write_json(out / "truth.json", {"config_hash": chash, "hives": truths})
    return {"sensors": csv_path.name, "truth": "truth.json"}


def _run_fit(config, datasets, out, chash, plots):
    def one(ds):
        fits = fit_per_day(ds, config.search, config.model)
        segs = [(f.segment, f.params) for f in fits]
        recon = reconstruct(ds, segs, config.model).values
        days = [{
            "day": i, "start": _tick_time(ds, f.segment[0]), **_params_dict(f.params),
            "rmse": f.rmse, "n_used": f.n_used, "degenerate": f.degenerate.value,
            "unidentified": sorted(f.unidentified), "filled": sorted(f.filled),
        } for i, f in enumerate(fits)]
        write_json(out / f"fit_{ds.hive_id}.json", {
            "config_hash": chash, "hive_id": ds.hive_id, "hive_type": ds.hive_type.value,
            "mode": "per_day", "days": days})
        _series_csv(out / f"fit_{ds.hive_id}.csv", ds.core.times(),
                    {"core": ds.core.values, "reconstruction": recon}, chash)
        if plots:
            _plot(out / f"fit_{ds.hive_id}.svg", ds, recon, "reconstruction")
        return f"fit_{ds.hive_id}.json"
    names = _per_hive(one, datasets)
    return {ds.hive_id: n for ds, n in zip(datasets, names)}


def _run_segment(config, datasets, out, chash, plots):
    def one(ds):
        res = segment(ds, config.search, config.model, config.likelihood,
                      relaxation=config.relaxation, screen_top=config.screen_top)
        write_json(out / f"segment_{ds.hive_id}.json", {
            "config_hash": chash, "hive_id": ds.hive_id, "hive_type": ds.hive_type.value,
            "cut_points": list(res.cut_points), "cut_days": list(res.cut_days),
            "cut_times": [_tick_time(ds, t) for t in res.cut_points],
            "segments": [{"start": a, "end": b, "start_time": _tick_time(ds, a),
                          **_params_dict(p), "rmse": f.rmse}
                         for (a, b), p, f in zip(res.segments, res.params, res.fits)],
            "aic": res.aic, "sigma_mle": res.sigma_mle,
            "aic_trace": [{"num_cuts": m, "aic": a} for m, a in res.aic_trace],
        })
        _series_csv(out / f"segment_{ds.hive_id}.csv", ds.core.times(),
                    {"core": ds.core.values, "reconstruction": res.reconstruction.values}, chash)
        if plots:
            _plot(out / f"segment_{ds.hive_id}.svg", ds, res.reconstruction.values,
                  "reconstruction", res.cut_points)
        return f"segment_{ds.hive_id}.json"
    names = _per_hive(one, datasets)
    return {ds.hive_id: n for ds, n in zip(datasets, names)}


def _run_forecast(config, datasets, out, chash, plots):
    span = config.fit_days + config.horizon_days

    def one(ds):
        if ds.n_days < span:
            raise InvalidDataset(f"hive {ds.hive_id!r} has {ds.n_days} days, forecasting needs {span}")
        origin = ds.n_days - span
        request, actual = ForecastRequest.from_dataset(ds, origin, config.fit_days,
                                                       config.horizon_days)
        res = forecast(request, config.search, config.model, actual)
        write_json(out / f"forecast_{ds.hive_id}.json", {
            "config_hash": chash, "hive_id": ds.hive_id, "fit_start_day": origin,
            "forecast_start": _iso(res.forecast.start_time), "params": _params_dict(res.params_used),
            "rmse": res.rmse, "per_day_rmse": list(res.per_day_rmse),
            "degraded_adj": res.degraded_adj})
        _series_csv(out / f"forecast_{ds.hive_id}.csv", res.forecast.times(),
                    {"actual": actual.values, "forecast": res.forecast.values}, chash)
        if plots:
            _plot(out / f"forecast_{ds.hive_id}.svg", ds, res.forecast.values, "forecast",
                  forecast_start=request.fit_window[1])
        return f"forecast_{ds.hive_id}.json"
    names = _per_hive(one, datasets)
    return {ds.hive_id: n for ds, n in zip(datasets, names)}


def _run_evaluate(config, datasets, out, chash):
    tables, summaries, skipped = [], {}, {}
    evaluations = _per_hive(
        lambda ds: rolling_evaluation(ds, config.search, config.model, config.baselines,
                                      config.fit_days, config.horizon_days), datasets)
    for ds, ev in zip(datasets, evaluations):
        tables.append(ev.table)
        s = ev.summary()
        summaries[ds.hive_id] = [{"method": m, **row} for m, row in s.to_dict("index").items()]
        skipped[ds.hive_id] = [{"origin": o, "reason": r} for o, r in ev.skipped]
    table = pd.concat(tables, ignore_index=True)
    with (out / "evaluation.csv").open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash: {chash}\n")
        table.to_csv(fh, index=False)
    write_json(out / "evaluation.json", {
        "config_hash": chash, "fit_days": config.fit_days, "horizon_days": config.horizon_days,
        "rows": table.to_dict("records"), "summary": summaries, "skipped": skipped})
    return {"table": "evaluation.csv", "results": "evaluation.json"}


def run_pipeline(command: str, config: RunConfig, inputs: Sequence[str] = (),
                 out_dir: str | Path | None = None, hives: Sequence[str] | None = None,
                 seed: int | None = None, plots: bool = True) -> dict:
    """Run one command and write its artifacts; returns the summary index."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    out = Path(out_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = config.config_hash()
    if command == "simulate":
        artifacts = _run_simulate(config, out, chash, seed, plots)
    else:
        if not inputs:
            raise InvalidDataset(f"{command} needs at least one --input file")
        datasets = _load_inputs(config, inputs, hives)
        if command == "fit":
            artifacts = _run_fit(config, datasets, out, chash, plots)
        elif command == "segment":
            artifacts = _run_segment(config, datasets, out, chash, plots)
        elif command == "forecast":
            artifacts = _run_forecast(config, datasets, out, chash, plots)
        else:
            artifacts = _run_evaluate(config, datasets, out, chash)
    index = {"command": command, "config_hash": chash, "artifacts": artifacts}
    write_json(out / f"index_{command}.json", index)
    return index
