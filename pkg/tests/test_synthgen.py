import numpy as np
import pytest

from hivetherm import ExtProfile, HiveParams, HiveType, ModelConfig, ScenarioSpec, generate
from hivetherm.synthgen import external_temperature

P = HiveParams(10.0, 4.0, 34.5)


def test_gap_mask(make):
    ds, truth = make(days=10, missing_pattern=((100, 12),))
    missing = np.flatnonzero(np.isnan(ds.core.values))
    assert missing.tolist() == list(range(100, 112))
    assert not np.isnan(truth.clean_core).any()


def test_deterministic(make):
    a, ta = make(days=5, noise_sigma=0.3, seed=42)
    b, tb = make(days=5, noise_sigma=0.3, seed=42)
    c, _ = make(days=5, noise_sigma=0.3, seed=43)
    for x, y in ((a.ext, b.ext), (a.core, b.core), (a.peri, b.peri)):
        assert x.values.tobytes() == y.values.tobytes()
    assert ta.clean_core.tobytes() == tb.clean_core.tobytes()
    assert a.core != c.core


def test_truth_and_grid(make):
    regimes = ((0, P), (3, HiveParams(5.0, 4.0, 34.5)), (6, P))
    ds, truth = make(regimes=regimes, days=8)
    assert truth.cut_days == (3, 6) and truth.cut_ticks == (72, 144)
    assert ds.n_days == 8 and ds.day_boundaries == tuple(range(0, 192, 24))
    assert ds.hive_type is HiveType.CONTROL
    assert np.isnan(ds.peri.values).all()


def test_state_carries_across_regimes(make):
    ds, truth = make(regimes=((0, P), (2, HiveParams(5.0, 8.0, 34.0))), days=4)
    jump = np.abs(np.diff(truth.clean_core))
    assert jump[47] < 3 * np.median(jump) + 1.0


def test_heatwave_and_treated_peri(make):
    prof = ExtProfile(amplitude=8.0, heatwave_days=((2, 44.0),), day_jitter=0.0, hourly_noise=0.0)
    ds, truth = make(days=4, hive_type=HiveType.TREATED, ext_profile=prof, ice_offset=8.0)
    assert ds.ext.values[48:72].max() == pytest.approx(44.0)
    assert np.allclose(ds.peri.values[48:72], ds.ext.values[48:72] - 8.0)
    assert np.array_equal(ds.peri.values[:48], ds.ext.values[:48])
    assert np.array_equal(truth.adj, ds.peri.values)


def test_ext_profile_shape():
    rng = np.random.default_rng(0)
    ext = external_temperature(ExtProfile(mean=30, amplitude=5, day_jitter=0, hourly_noise=0), 2, rng)
    assert ext.argmax() % 24 == 15
    assert ext.max() == pytest.approx(35) and ext.min() == pytest.approx(25)


@pytest.mark.parametrize("bad", [
    dict(num_days=0, regimes=((0, P),)),
    dict(num_days=3, regimes=((1, P),)),
    dict(num_days=3, regimes=((0, P), (0, P))),
    dict(num_days=3, regimes=((0, P),), noise_sigma=-1.0),
    dict(num_days=3, regimes=((0, P),), missing_pattern=((70, 5),)),
])
def test_invalid_specs(bad):
    with pytest.raises(ValueError):
        generate(ScenarioSpec(**bad))


def test_strength_above_s_inf():
    spec = ScenarioSpec(3, ((0, HiveParams(120.0, 4.0, 34.5)),))
    with pytest.raises(ValueError):
        generate(spec, ModelConfig(s_inf=100))
