import json
import logging
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from hivetherm import HiveType, RunConfig, ingest, load_config, run_pipeline, write_sensor_csv
from hivetherm.cli import main
from hivetherm.errors import MisalignedSensors, ParseError
from hivetherm.pipeline import scenario_from_dict

import schemas

HEADER = "timestamp,hive_id,sensor_location,temperature_c\n"


def write(tmp_path, rows, name="s.csv"):
    p = tmp_path / name
    p.write_text(HEADER + "".join(r + "\n" for r in rows))
    return p


def both(ts, hive, core, ext):
    return [f"{ts},{hive},Core,{core}", f"{ts},{hive},External,{ext}"]


class TestIngest:
    def test_hourly_average_and_empty_hour(self, tmp_path):
        rows = [
            "2021-08-01T00:00:00Z,h1,Core,33.0",
            "2021-08-01T00:20:00Z,h1,Core,33.5",
            "2021-08-01T00:40:00Z,h1,Core,34.0",
            "2021-08-01T00:00:00Z,h1,External,30.0",
            "2021-08-01T02:10:00Z,h1,Core,34.0",
            "2021-08-01T02:10:00Z,h1,External,31.0",
        ]
        (ds,) = ingest(write(tmp_path, rows))
        assert ds.core.values[0] == pytest.approx(33.5)
        assert np.isnan(ds.core.values[1]) and np.isnan(ds.ext.values[1])
        assert ds.n_ticks == 3
        assert np.isnan(ds.peri.values).all()
        assert ds.hive_type is HiveType.CONTROL

    def test_duplicates_are_averaged(self, tmp_path, caplog):
        rows = both("2021-08-01T00:00:00Z", "h", 34.0, 30.0) + [
            "2021-08-01T00:00:00Z,h,Core,35.0",
            "2021-08-01T00:00:00Z,h,Core,36.0",
            "2021-08-01T01:00:00Z,h,External,31.0",
            "2021-08-01T01:00:00Z,h,External,31.0",
        ]
        with caplog.at_level(logging.WARNING, logger="hivetherm.ingest"):
            (ds,) = ingest(write(tmp_path, rows))
        assert ds.core.values[0] == pytest.approx(35.0)
        assert "3 duplicate reading(s) averaged" in caplog.text

    def test_parse_error_row_number(self, tmp_path):
        rows = both("2021-08-01T00:00:00Z", "h", 34.0, 30.0) + ["2021-08-01T01:00:00Z,h,Core,warm"]
        with pytest.raises(ParseError, match="row 3"):
            ingest(write(tmp_path, rows))
        with pytest.raises(ParseError, match="row 1"):
            ingest(write(tmp_path, ["yesterday,h,Core,34"]))
        with pytest.raises(ParseError, match="sensor_location"):
            ingest(write(tmp_path, ["2021-08-01T00:00:00Z,h,Roof,34"]))
        (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
        with pytest.raises(ParseError, match="missing column"):
            ingest(tmp_path / "bad.csv")

    def test_missing_stream(self, tmp_path):
        with pytest.raises(MisalignedSensors):
            ingest(write(tmp_path, ["2021-08-01T00:00:00Z,h,Core,34"]))

    def test_out_of_range_reading_dropped(self, tmp_path):
        rows = both("2021-08-01T00:00:00Z", "h", 34.0, 30.0) + both("2021-08-01T01:00:00Z", "h", 99.0, 30.0)
        (ds,) = ingest(write(tmp_path, rows))
        assert np.isnan(ds.core.values[1])

    def test_local_midnight_boundaries(self, tmp_path):
        rows = []
        for h in range(48):
            rows += both(f"2021-08-01T{h % 24:02d}:00:00Z".replace("2021-08-01", f"2021-08-0{1 + h // 24}"),
                         "h", 34.0, 30.0)
        (utc,) = ingest(write(tmp_path, rows))
        (berlin,) = ingest(write(tmp_path, rows), tz="Europe/Berlin")
        assert utc.day_boundaries == (0, 24)
        # local midnight is 22:00 UTC in summer
        assert berlin.day_boundaries == (0, 22, 46)

    def test_idempotent_round_trip(self, make, tmp_path):
        ds, _ = make(days=3, noise_sigma=0.3, seed=2, missing_pattern=((10, 4),), hive_id="a")
        write_sensor_csv([ds], tmp_path / "one.csv")
        (first,) = ingest(tmp_path / "one.csv")
        write_sensor_csv([first], tmp_path / "two.csv")
        (second,) = ingest(tmp_path / "two.csv")
        assert first.core == ds.core and first.ext == ds.ext
        assert second.core == first.core and second.ext == first.ext
        assert second.day_boundaries == first.day_boundaries == ds.day_boundaries
        assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()

    def test_treated_type_from_mapping(self, make, tmp_path):
        from hivetherm import ExtProfile
        ds, _ = make(days=2, hive_type=HiveType.TREATED, hive_id="t",
                     ext_profile=ExtProfile(heatwave_days=((1, 43.0),)))
        write_sensor_csv([ds], tmp_path / "t.csv")
        (back,) = ingest(tmp_path / "t.csv", {"t": "treated"})
        assert back.hive_type is HiveType.TREATED and back.peri == ds.peri


CONFIG = {
    "baselines": ["persistence", "arx"],
    "scenarios": [{
        "hive_id": "h1", "num_days": 12,
        "regimes": [{"start_day": 0, "s_c": 20, "s_h": 10, "theta_ideal": 34.5},
                    {"start_day": 6, "s_c": 5, "s_h": 10, "theta_ideal": 34.5}],
        "ext_profile": {"amplitude": 10},
        "noise_sigma": 0.3, "seed": 3,
    }],
}


@pytest.fixture
def config_file(tmp_path):
    p = tmp_path / "config.json"
    p.write_text(json.dumps(CONFIG))
    return p


class TestConfig:
    def test_hash_is_stable_and_sensitive(self, config_file):
        a = load_config(config_file)
        b = RunConfig.from_dict(json.loads(config_file.read_text()))
        assert a.config_hash() == b.config_hash()
        changed = dict(CONFIG, baselines=["persistence"])
        assert RunConfig.from_dict(changed).config_hash() != a.config_hash()

    def test_round_trip(self, config_file):
        cfg = load_config(config_file)
        assert RunConfig.from_dict(cfg.to_dict()).config_hash() == cfg.config_hash()
        assert cfg.scenarios[0] == scenario_from_dict(CONFIG["scenarios"][0])

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            RunConfig.from_dict({"baselines": ["magic"]})
        with pytest.raises(ValueError):
            RunConfig.from_dict({"model": {"s_inf": 100}, "search": {"s_c_range": [0, 200]}})


def validate(path, schema):
    doc = json.loads(Path(path).read_text())
    jsonschema.validate(doc, schema)
    return doc


class TestCli:
    def test_simulate_segment_evaluate(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(config_file), "--out", str(out)]) == 0
        truth = validate(out / "truth.json", schemas.TRUTH)
        assert truth["hives"][0]["cut_days"] == [6]
        sensors = str(out / "sensors.csv")
        before = Path(sensors).read_bytes()
        for cmd in ("segment", "evaluate"):
            assert main([cmd, "--config", str(config_file), "--input", sensors, "--out", str(out)]) == 0
            validate(out / f"index_{cmd}.json", schemas.INDEX)
        seg = validate(out / "segment_h1.json", schemas.SEGMENT)
        assert seg["cut_days"] == [6]
        ev = validate(out / "evaluation.json", schemas.EVALUATION)
        assert {r["method"] for r in ev["rows"]} == {"ebv", "persistence", "arx"}
        assert len(ev["rows"]) == 3 * 3
        schemas.check_csv(out / "segment_h1.csv", ["timestamp", "core", "reconstruction"])
        schemas.check_csv(out / "evaluation.csv",
                          ["hive_id", "origin", "fit_start_day", "forecast_start_day", "method", "rmse"])
        schemas.check_svg(out / "segment_h1.svg")
        assert Path(sensors).read_bytes() == before

    def test_evaluate_table_shape(self, make, tmp_path):
        ds, _ = make(days=10, noise_sigma=0.3, seed=1, hive_id="ten")
        write_sensor_csv([ds], tmp_path / "ten.csv")
        cfg = RunConfig.from_dict({"baselines": ["persistence"]})
        run_pipeline("evaluate", cfg, [str(tmp_path / "ten.csv")], tmp_path)
        ev = json.loads((tmp_path / "evaluation.json").read_text())
        assert [s["method"] for s in ev["summary"]["ten"]] == ["ebv", "persistence"]

    def test_hives_run_concurrently_and_keep_order(self, make, tmp_path):
        sets = [make(days=3, noise_sigma=0.2, seed=i, hive_id=f"h{i}")[0] for i in range(4)]
        write_sensor_csv(sets, tmp_path / "many.csv")
        index = run_pipeline("segment", RunConfig(), [str(tmp_path / "many.csv")], tmp_path)
        assert list(index["artifacts"]) == ["h0", "h1", "h2", "h3"]
        for i in range(4):
            schemas.check_svg(tmp_path / f"segment_h{i}.svg")

    def test_fit_and_forecast(self, config_file, tmp_path):
        out = tmp_path / "o"
        run_pipeline("simulate", load_config(config_file), out_dir=out, plots=False)
        cfg = load_config(config_file)
        run_pipeline("fit", cfg, [str(out / "sensors.csv")], out)
        run_pipeline("forecast", cfg, [str(out / "sensors.csv")], out)
        fit = validate(out / "fit_h1.json", schemas.FIT)
        assert len(fit["days"]) == 12
        late = [d["s_c"] for d in fit["days"][6:]]
        assert abs(np.median(late) - 5) / 5 < 0.10
        validate(out / "forecast_h1.json", schemas.FORECAST)
        schemas.check_svg(out / "forecast_h1.svg")
        schemas.check_svg(out / "fit_h1.svg")

    def test_error_json(self, tmp_path, capsys):
        out = tmp_path / "e"
        code = main(["segment", "--input", str(tmp_path / "nope.csv"), "--out", str(out)])
        assert code == 1
        err = validate(out / "error.json", schemas.ERROR)
        assert json.loads(capsys.readouterr().err) == err

    def test_hive_filter(self, config_file, tmp_path):
        out = tmp_path / "f"
        run_pipeline("simulate", load_config(config_file), out_dir=out, plots=False)
        code = main(["segment", "--input", str(out / "sensors.csv"), "--hive", "other",
                     "--out", str(out)])
        assert code == 1
        assert "no hive matched" in json.loads((out / "error.json").read_text())["message"]
