from datetime import datetime

import numpy as np
import pytest

from rollstab import GridSpec, detect_blowup, detect_seasonality_loss
from rollstab.climatology import ClimatologyEnvelope
from rollstab.detectors import (
    SeriesTooShortError,
    StabilityReport,
    BlowupResult,
    SeasonalityResult,
    SmallScaleResult,
    aggregate_runs,
    seasonal_cycle_rmse,
    small_scale_ratios,
)
from rollstab.gridio import DailySeries
from rollstab.spectra import SpectrumSeries
from conftest import make_series


def ramp_exp(rate, onset_day, n_days, steps_per_day=4):
    t = np.arange(n_days * steps_per_day) / steps_per_day
    return np.exp(rate * np.clip(t - onset_day, 0.0, None))


class TestDetectBlowup:
    def test_constructed_exponential(self):
        s = ramp_exp(0.2, 100, 300)
        res = detect_blowup(s, s)
        assert res.day is not None
        assert abs(res.day - 100) <= 1  # within one stride
        assert res.slope_sign == 1
        assert res.r2 > 0.9

    def test_constant_series_none(self):
        s = np.full(400 * 4, 3.0)
        res = detect_blowup(s, s)
        assert res.day is None

    def test_pure_sinusoid_none(self):
        t = np.arange(730 * 4) / 4.0
        s = 280.0 + 10.0 * np.sin(2 * np.pi * t / 365.25)
        res = detect_blowup(s, s)
        assert res.day is None

    def test_earliest_series_wins(self):
        early = ramp_exp(0.3, 80, 300)
        late = ramp_exp(0.3, 200, 300)
        res = detect_blowup(early, late)
        assert res.triggered_by == "min"
        assert abs(res.day - 80) <= 1
        res = detect_blowup(late, early)
        assert res.triggered_by == "max"

    def test_min_series_diving_detected(self):
        # blow-up downward: min dives to large negative values
        s = -ramp_exp(0.2, 150, 400)
        res = detect_blowup(s, np.zeros_like(s))
        assert res.day is not None and abs(res.day - 150) <= 1

    def test_affine_invariance(self):
        rng = np.random.default_rng(8)
        t = np.arange(300 * 4) / 4.0
        base = np.exp(0.05 * np.clip(t - 120, 0, None)) + 0.1 * rng.standard_normal(t.size)
        r1 = detect_blowup(base, base)
        for a, b in ((3.7, 11.0), (0.2, -40.0), (1e3, 1e6)):
            r2 = detect_blowup(a * base + b, a * base + b)
            assert r2.day == r1.day

    def test_short_series_rejected(self):
        with pytest.raises(SeriesTooShortError):
            detect_blowup(np.zeros(50), np.zeros(50))

    def test_nan_rejected(self):
        s = np.ones(200 * 4)
        s[5] = np.nan
        with pytest.raises(ValueError):
            detect_blowup(s, s)

    def test_decaying_exponential_not_flagged(self):
        t = np.arange(200 * 4) / 4.0
        s = 5.0 + np.exp(-0.2 * t)
        res = detect_blowup(s, s)
        assert res.day is None

    def test_ten_day_window(self):
        # fast saturating blow-up only visible with a reduced window
        t = np.arange(60 * 4) / 4.0
        s = np.minimum(np.exp(1.0 * np.clip(t - 8.0, 0, None)), 1e6)
        res = detect_blowup(s, s, window_days=10)
        assert res.day is not None
        assert res.day <= 12


def flat_envelope(mean, rng_width):
    n = np.full(365, float(mean))
    return ClimatologyEnvelope(statistic="test", mean=n, min=n - rng_width / 2,
                               max=n + rng_width / 2, year_span=(2000, 2005))


def daily(values, start="2021-01-01"):
    dates = np.datetime64(start, "D") + np.arange(len(values))
    return DailySeries(dates, np.asarray(values, dtype=float))


class TestDetectSeasonalityLoss:
    def test_series_on_mean_never_flags(self):
        env = flat_envelope(5.0, 1.0)
        res = detect_seasonality_loss(daily(np.full(400, 5.0)), env)
        assert res.day is None

    def test_violation_run_from_day_200(self):
        env = flat_envelope(5.0, 1.0)
        vals = np.full(400, 5.0)
        vals[200:] = 5.0 + 3.0 * 1.0  # mean + 3x range > mean + 2x range
        res = detect_seasonality_loss(daily(vals), env)
        assert res.day == 200
        assert res.run_length == 200

    def test_run_shorter_than_threshold_ignored(self):
        env = flat_envelope(0.0, 1.0)
        vals = np.zeros(400)
        vals[100:140] = 10.0  # 40 consecutive days < 45
        res = detect_seasonality_loss(daily(vals), env)
        assert res.day is None

    def test_zero_range_any_deviation_violates(self):
        env = flat_envelope(2.0, 0.0)
        vals = np.full(100, 2.0)
        vals[10:70] = 2.0001
        res = detect_seasonality_loss(daily(vals), env)
        assert res.day == 10

    def test_zero_range_zero_deviation_ok(self):
        env = flat_envelope(2.0, 0.0)
        res = detect_seasonality_loss(daily(np.full(100, 2.0)), env)
        assert res.day is None

    def test_monotone_in_multiplier(self):
        rng = np.random.default_rng(3)
        env = flat_envelope(0.0, 1.0)
        vals = np.cumsum(rng.standard_normal(500)) * 0.2
        days = []
        for mult in (0.5, 1.0, 2.0, 4.0):
            res = detect_seasonality_loss(daily(vals), env, multiplier=mult)
            days.append(np.inf if res.day is None else res.day)
        assert all(a <= b for a, b in zip(days, days[1:]))


def spectrum_from_bands(grid, timestamps, small_values):
    n_k = grid.n_lon // 2 + 1
    energy = np.zeros((len(timestamps), n_k))
    from rollstab.spectra import band_members, band_average

    idx = band_members(grid, "small")
    energy[:, idx] = np.asarray(small_values)[:, None]
    return SpectrumSeries(
        timestamps=np.asarray(timestamps, dtype="datetime64[s]"),
        wavenumbers=np.arange(n_k),
        energy=energy,
        band_large=band_average(energy, grid, "large"),
        band_medium=band_average(energy, grid, "medium"),
        band_small=band_average(energy, grid, "small"),
        grid=grid,
    )


def hourly6(start, n):
    return np.datetime64(start, "s") + np.arange(n) * np.timedelta64(21600, "s")


class TestSmallScaleRatios:
    def test_identical_spectra_ratio_one(self, fine_grid):
        ts = hourly6("2021-01-01", 50 * 4)
        vals = np.linspace(1.0, 2.0, ts.size)
        spec = spectrum_from_bands(fine_grid, ts, vals)
        res = small_scale_ratios(spec, spec)
        assert res.ratio_vs_reference == pytest.approx(1.0, abs=1e-12)

    def test_uniform_doubling(self, fine_grid):
        ts = hourly6("2021-01-01", 50 * 4)
        base = np.full(ts.size, 3.0)
        pred = spectrum_from_bands(fine_grid, ts, 2.0 * base)
        ref = spectrum_from_bands(fine_grid, ts, base)
        res = small_scale_ratios(pred, ref)
        assert res.ratio_vs_reference == pytest.approx(2.0, abs=1e-9)
        assert res.ratio_vs_self == pytest.approx(1.0, abs=1e-9)

    def test_blowup_day_shifts_window(self, fine_grid):
        ts = hourly6("2021-01-01", 100 * 4)
        vals = np.ones(ts.size)
        vals[60 * 4:] = 100.0  # junk after the blow-up at day 60
        pred = spectrum_from_bands(fine_grid, ts, vals)
        ref = spectrum_from_bands(fine_grid, ts, np.ones(ts.size))
        res = small_scale_ratios(pred, ref, blowup_day=60.0)
        assert res.ratio_vs_reference == pytest.approx(1.0)
        assert res.truncated is False

    def test_short_rollout_truncates_and_flags(self, fine_grid):
        ts = hourly6("2021-01-01", 20 * 4)
        spec = spectrum_from_bands(fine_grid, ts, np.ones(ts.size))
        res = small_scale_ratios(spec, spec)
        assert res.truncated is True
        assert res.window_days == pytest.approx(20.0, abs=0.3)

    def test_zero_reference_rejected(self, fine_grid):
        ts = hourly6("2021-01-01", 40 * 4)
        pred = spectrum_from_bands(fine_grid, ts, np.ones(ts.size))
        ref = spectrum_from_bands(fine_grid, ts, np.zeros(ts.size))
        with pytest.raises(ValueError, match="zero"):
            small_scale_ratios(pred, ref)

    def test_unresolved_band_rejected(self):
        g = GridSpec.from_resolution(1.5)
        ts = hourly6("2021-01-01", 40 * 4)
        n_k = g.n_lon // 2 + 1
        spec = SpectrumSeries(
            timestamps=ts, wavenumbers=np.arange(n_k),
            energy=np.ones((ts.size, n_k)), band_large=np.ones(ts.size),
            band_medium=np.ones(ts.size), band_small=None, grid=g,
        )
        from rollstab.spectra import BandUnresolvedError

        with pytest.raises(BandUnresolvedError):
            small_scale_ratios(spec, spec)


class TestSeasonalCycleRmse:
    def test_identical_zero(self, small_grid):
        start = datetime(2021, 1, 1)
        rng = np.random.default_rng(0)
        base = rng.standard_normal((365 * 4, 1, 8, 16)).astype(np.float32)
        a = make_series(small_grid, base, start=start)
        b = make_series(small_grid, base.copy(), start=start)
        assert seasonal_cycle_rmse(a, b, "T2m") == pytest.approx(0.0, abs=1e-7)

    def test_constant_bias(self, small_grid):
        start = datetime(2021, 1, 1)
        rng = np.random.default_rng(1)
        base = rng.standard_normal((365 * 4, 1, 8, 16)).astype(np.float32)
        a = make_series(small_grid, base + np.float32(2.5), start=start)
        b = make_series(small_grid, base, start=start)
        assert seasonal_cycle_rmse(a, b, "T2m") == pytest.approx(2.5, abs=1e-5)

    def test_month_dependent_bias(self, small_grid):
        start = datetime(2021, 1, 1)
        base = np.zeros((365 * 4, 1, 8, 16), dtype=np.float32)
        a = make_series(small_grid, base, start=start)
        months = a.timestamps.astype("datetime64[M]").astype(int) % 12
        biases = np.linspace(-1.0, 1.2, 12)
        biased = base + biases[months][:, None, None, None].astype(np.float32)
        b = make_series(small_grid, biased, start=start)
        expected = np.sqrt(np.mean(biases**2))
        assert seasonal_cycle_rmse(b, a, "T2m") == pytest.approx(expected, abs=1e-6)

    def test_incomplete_month_rejected(self, small_grid):
        start = datetime(2021, 1, 1)
        base = np.zeros((364 * 4, 1, 8, 16), dtype=np.float32)  # ends mid-December
        a = make_series(small_grid, base, start=start)
        b = make_series(small_grid, base.copy(), start=start)
        with pytest.raises(ValueError, match="month"):
            seasonal_cycle_rmse(a, b, "T2m")

    def test_mismatched_timestamps_rejected(self, small_grid):
        base = np.zeros((365 * 4, 1, 8, 16), dtype=np.float32)
        a = make_series(small_grid, base, start=datetime(2021, 1, 1))
        b = make_series(small_grid, base.copy(), start=datetime(2022, 1, 1))
        with pytest.raises(ValueError, match="timestamps"):
            seasonal_cycle_rmse(a, b, "T2m")


def report_with(blowup_days, seasonality_days=None, horizon=730.0,
                variables=("T2m",), name="r"):
    seasonality_days = seasonality_days or {v: None for v in variables}
    rep = StabilityReport(name=name, horizon_days=horizon, variables=tuple(variables))
    for v in variables:
        rep.blowup[v] = BlowupResult(day=blowup_days[v], triggered_by="min",
                                     r2=0.95, slope_sign=1)
        rep.seasonality[v] = SeasonalityResult(day=seasonality_days[v],
                                               multiplier=2.0, run_length=None)
        rep.small_scale[v] = SmallScaleResult(
            ratio_vs_reference=1.0, ratio_vs_self=1.0, window_days=30.0,
            window_end=np.datetime64("2021-01-01"), truncated=False)
    return rep


class TestAggregateRuns:
    def test_identical_reports_zero_std(self):
        reports = [report_with({"T2m": 100.0}, name=f"r{i}") for i in range(5)]
        agg = aggregate_runs(reports)
        entry = agg["metrics"]["blowup_day"]["T2m"]
        assert entry["mean"] == 100.0 and entry["std"] == 0.0

    def test_two_reports_sample_std(self):
        reports = [report_with({"T2m": 10.0}), report_with({"T2m": 20.0})]
        agg = aggregate_runs(reports)
        entry = agg["metrics"]["blowup_day"]["T2m"]
        assert entry["mean"] == pytest.approx(15.0)
        assert entry["std"] == pytest.approx(7.0710678, abs=1e-6)

    def test_censored_entries_use_horizon(self):
        reports = [report_with({"T2m": 41.0})] + [
            report_with({"T2m": None}) for _ in range(4)
        ]
        agg = aggregate_runs(reports)
        entry = agg["metrics"]["blowup_day"]["T2m"]
        vals = np.array([41.0, 730.0, 730.0, 730.0, 730.0])
        assert entry["mean"] == pytest.approx(vals.mean())
        assert entry["std"] == pytest.approx(vals.std(ddof=1))

    def test_mismatched_variables_rejected(self):
        a = report_with({"T2m": 1.0}, variables=("T2m",))
        b = report_with({"Z500": 1.0}, variables=("Z500",))
        with pytest.raises(ValueError):
            aggregate_runs([a, b])

    def test_single_report_rejected(self):
        with pytest.raises(ValueError):
            aggregate_runs([report_with({"T2m": 1.0})])

    def test_report_json_round_trip(self):
        rep = report_with({"T2m": 50.0}, seasonality_days={"T2m": 200.0})
        back = StabilityReport.from_dict(rep.to_dict())
        assert back.blowup["T2m"].day == 50.0
        assert back.seasonality["T2m"].day == 200.0
        assert back.small_scale["T2m"].ratio_vs_reference == 1.0
