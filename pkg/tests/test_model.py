import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hivetherm import (
    MISSING,
    HiveDataset,
    HiveParams,
    HiveType,
    Integrator,
    ModelConfig,
    SignConvention,
    TemperatureSeries,
    adjunct_series,
    reconstruct,
    relative,
    step,
)
from hivetherm.errors import (
    EmptySegment,
    InvalidSeries,
    NumericalOverflow,
    TreatedPeriFullyMissing,
)
from hivetherm.model import integrate_segment, simulate

EULER_FINE = ModelConfig(integrator=Integrator.EULER, euler_substeps=10_000)


def series(values):
    return TemperatureSeries(values)


class TestSeries:
    def test_missing_and_bounds(self):
        s = series([35.0, MISSING, 33.0])
        assert s.present.tolist() == [True, False, True]
        with pytest.raises(InvalidSeries):
            series([80.0])
        with pytest.raises(InvalidSeries):
            series([math.inf])

    def test_model_output_may_leave_sensor_bound(self):
        assert TemperatureSeries([80.0], sensor=False).values[0] == 80.0

    def test_values_are_read_only(self):
        s = series([30.0, 31.0])
        with pytest.raises(ValueError):
            s.values[0] = 1.0

    def test_equality_treats_missing_as_equal(self):
        assert series([1.0, MISSING]) == series([1.0, MISSING])
        assert series([1.0, MISSING]) != series([1.0, 2.0])


class TestRelative:
    def test_examples(self):
        out = relative(series([35.0, MISSING, 33.0]), 34.0)
        assert out[0] == 1.0 and math.isnan(out[1]) and out[2] == -1.0
        assert relative(series([34.0]), 34.0).tolist() == [0.0]
        assert relative(series([40.0, 30.0]), 35.0).tolist() == [5.0, -5.0]

    def test_non_finite_ideal(self):
        with pytest.raises(ValueError):
            relative(series([34.0]), math.nan)


def dataset(hive_type, ext, peri, core=None):
    core = core if core is not None else [34.0] * len(ext)
    return HiveDataset.from_arrays(ext, core, peri, hive_type=hive_type)


class TestAdjunct:
    def test_control_uses_ext(self):
        ds = dataset(HiveType.CONTROL, [30.0, 31.0], [33.0, 33.0])
        assert adjunct_series(ds).to_list() == [30.0, 31.0]

    def test_treated_uses_peri(self):
        ds = dataset(HiveType.TREATED, [30.0, 31.0], [25.0, 26.0])
        assert adjunct_series(ds).to_list() == [25.0, 26.0]

    def test_treated_falls_back_to_ext(self):
        ds = dataset(HiveType.TREATED, [30.0, 31.0], [25.0, MISSING])
        adj = adjunct_series(ds)
        assert adj.to_list() == [25.0, 31.0]
        # the filled forcing drives the exact and the fine Euler integrator alike
        p = HiveParams(5.0, 5.0, 34.0)
        exact = simulate(ds.ext.values, adj.values, p, 34.0)
        euler = simulate(ds.ext.values, adj.values, p, 34.0, EULER_FINE)
        assert np.max(np.abs(exact - euler)) < 1e-3

    def test_treated_without_peri(self):
        ds = dataset(HiveType.TREATED, [30.0, 31.0], [MISSING, MISSING])
        with pytest.raises(TreatedPeriFullyMissing):
            adjunct_series(ds)


class TestStep:
    def test_equilibrium(self):
        for s in (0.0, 3.0, 100.0):
            assert step(0.0, 0.0, 0.0, HiveParams(s, s, 34.0)) == 0.0

    def test_pure_diffusion_fixed_point(self):
        assert step(0.0, 2.0, 2.0, HiveParams(0.0, 0.0, 34.0), dt=50.0) == pytest.approx(2.0, abs=1e-12)

    def test_exact_value_and_euler_agreement(self):
        p = HiveParams(8.0, 8.0, 34.0)
        want = (10 / 10) * (1 - math.exp(-10))
        got = step(0.0, 5.0, 5.0, p)
        assert got == pytest.approx(want, abs=1e-12)
        assert got == pytest.approx(0.9999546, abs=1e-7)
        assert abs(step(0.0, 5.0, 5.0, p, EULER_FINE) - got) <= 1e-6

    def test_branch_selection(self):
        p = HiveParams(8.0, 2.0, 34.0)
        cool = step(0.0, 1.0, 1.0, p, dt=100.0)
        heat = step(0.0, -1.0, -1.0, p, dt=100.0)
        assert cool == pytest.approx(2 / 10)
        assert heat == pytest.approx(-2 / 4)

    def test_literal_heating_branch_can_diverge(self):
        literal = ModelConfig(sign_convention=SignConvention.LITERAL)
        p = HiveParams(5.0, 20.0, 34.0)
        with pytest.raises(NumericalOverflow):
            step(1.0, -1.0, -1.0, p, literal, dt=2.0)

    def test_bad_dt(self):
        with pytest.raises(ValueError):
            step(0.0, 0.0, 0.0, HiveParams(1, 1, 34), dt=0.0)


strength = st.floats(0.0, 100.0)
temp = st.floats(-15.0, 15.0)


@settings(max_examples=60, deadline=None)
@given(theta=temp, ext=temp, adj=temp, s_c=strength, s_h=strength)
def test_exact_matches_fine_euler(theta, ext, adj, s_c, s_h):
    p = HiveParams(s_c, s_h, 34.0)
    assert abs(step(theta, ext, adj, p) - step(theta, ext, adj, p, EULER_FINE)) < 1e-3


@settings(max_examples=100, deadline=None)
@given(theta=temp, forcing=temp, s=strength, dt=st.floats(0.01, 10.0))
def test_step_moves_towards_steady_state(theta, forcing, s, dt):
    p = HiveParams(s, s, 34.0)
    target = 2 * forcing / (2 + s)
    out = step(theta, forcing, forcing, p, dt=dt)
    assert abs(out - target) <= abs(theta - target) + 1e-12
    # never overshoots the steady state
    assert (out - target) * (theta - target) >= -1e-12


class TestReconstruct:
    def test_zero_relative_forcing(self):
        n = 48
        ds = HiveDataset.from_arrays([34.5] * n, [34.5] + [35.0] * (n - 1))
        out = reconstruct(ds, [((0, n), HiveParams(7.0, 3.0, 34.5))])
        assert np.allclose(out.values, 34.5)

    def test_stiff_bound(self, rng):
        n = 72
        ext = 34.0 + 8 * np.sin(np.arange(n) / 4) + rng.normal(0, 1, n)
        ds = HiveDataset.from_arrays(ext, [34.0] * n)
        out = reconstruct(ds, [((0, n), HiveParams(100.0, 100.0, 34.0))])
        max_f = np.max(np.abs(2 * (ext - 34.0)))
        assert np.max(np.abs(out.values - 34.0)) < 0.1 * max_f

    def test_matches_generator(self, make):
        p = HiveParams(12.0, 5.0, 34.8)
        ds, _ = make(p, days=4, noise_sigma=0.3, seed=3)
        out = reconstruct(ds, [((0, ds.n_ticks), p)])
        # seeded from a noisy first tick, then pure dynamics
        resid = out.values - ds.core.values
        assert np.sqrt(np.mean(resid ** 2)) <= 1.1 * 0.3
        clean, truth = make(p, days=4, seed=3)
        exact = reconstruct(clean, [((0, clean.n_ticks), p)])
        assert np.max(np.abs(exact.values - truth.clean_core)) <= 1e-9

    def test_segments_are_seeded_independently(self, make):
        p1, p2 = HiveParams(20.0, 10.0, 34.5), HiveParams(6.0, 10.0, 34.0)
        ds, truth = make(regimes=((0, p1), (2, p2)), days=4)
        out = reconstruct(ds, [((0, 48), p1), ((48, 96), p2)])
        assert np.max(np.abs(out.values - truth.clean_core)) <= 1e-9

    def test_rejects_bad_tiling(self, make):
        ds, _ = make(days=2)
        p = HiveParams(5, 5, 34)
        with pytest.raises(ValueError):
            reconstruct(ds, [((0, 24), p)])
        with pytest.raises(ValueError):
            reconstruct(ds, [((0, 30), p), ((30, 48), p)])

    def test_empty_segment(self):
        core = [34.0] * 24 + [MISSING] * 24
        ds = HiveDataset.from_arrays([33.0] * 48, core)
        p = HiveParams(5, 5, 34)
        with pytest.raises(EmptySegment):
            reconstruct(ds, [((0, 24), p), ((24, 48), p)])


class TestGapPolicy:
    p = HiveParams(5.0, 5.0, 34.0)

    def run(self, ext_gap, core_at=()):
        n = 30
        ext = np.full(n, 36.0)
        ext[ext_gap] = MISSING
        core = np.full(n, MISSING)
        core[0] = 34.0
        for i, v in core_at:
            core[i] = v
        return integrate_segment(ext, ext, core, self.p, ModelConfig())

    def test_short_gap_is_bridged(self):
        out = self.run(slice(5, 10))
        assert not np.isnan(out).any()
        assert out[-1] == pytest.approx(34.0 + 4 / 7)

    def test_long_gap_reseeds_at_next_core(self):
        out = self.run(slice(5, 11), core_at=[(20, 35.5)])
        assert not np.isnan(out[:6]).any()
        assert np.isnan(out[6:20]).all()
        assert out[20] == 35.5
        assert not np.isnan(out[21:]).any()

    def test_reseed_gap_is_configurable(self):
        n = 20
        ext = np.full(n, 36.0)
        ext[5:8] = MISSING
        core = np.full(n, MISSING)
        core[0] = 34.0
        out = integrate_segment(ext, ext, core, self.p, ModelConfig(reseed_gap=3))
        assert np.isnan(out[6:]).all()
