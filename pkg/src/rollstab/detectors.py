"""Rollout stability detectors: blow-up, loss of seasonality, small-scale
energy ratios, seasonal-cycle RMSE, and multi-run aggregation.

Blow-up is the onset of exponential growth in the global spatial extremes:
the first sliding window whose log-deviation regresses onto time with high
determination, positive slope, and at least a tenfold fitted growth. Loss
of seasonality is a sustained departure of the large-band spectral energy
from its climatological day-of-year envelope. Small-scale ratios compare
end-of-rollout small-band energy against a reference and against the
rollout's own first two days.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import uniform_filter1d

from .climatology import ClimatologyEnvelope, build_envelope, band_statistic
from .gridio import (
    DailySeries,
    PreconditionError,
    RolloutSeries,
    cell_weights,
    require_finite,
    spatial_extremes,
)
from .spectra import BandUnresolvedError, SpectrumSeries, spectrum_series, thread_count


class SeriesTooShortError(PreconditionError):
    """Input series shorter than one detection window."""


# ---------------------------------------------------------------------------
# blow-up


@dataclass(frozen=True)
class BlowupResult:
    """Blow-up day (days from rollout start) or None within the horizon."""

    day: float | None
    triggered_by: str | None  # "min" or "max"
    r2: float | None
    slope_sign: int | None


def _scan_windows(series, steps_per_day, smoothing_days, window_days, r2_threshold,
                  stride_days, growth_factor):
    """First qualifying window start (in days) of one extremes series."""
    series = np.asarray(series, dtype=np.float64)
    n = series.size
    wsteps = int(round(window_days * steps_per_day))
    if n < wsteps:
        raise SeriesTooShortError(
            f"series has {n} steps, shorter than one {window_days}-day window"
        )
    if not np.isfinite(series).all():
        raise ValueError("extremes series contains non-finite values")

    base = series[:wsteps].mean()
    eps = 1e-9 * max(series[:wsteps].std(), 1e-12)
    dev = np.maximum(np.abs(series - base), eps)
    sm = uniform_filter1d(dev, size=max(1, int(round(smoothing_days * steps_per_day))),
                          mode="nearest")
    logd = np.log(sm)

    stride = max(1, int(round(stride_days * steps_per_day)))
    wins = sliding_window_view(logd, wsteps)[::stride]
    t = np.arange(wsteps, dtype=np.float64) / steps_per_day
    tc = t - t.mean()
    stt = float(tc @ tc)
    span = t[-1] - t[0]

    cov = wins @ tc
    slope = cov / stt
    ssy = ((wins - wins.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(ssy > 0, cov**2 / (stt * ssy), 0.0)
    growth = slope * span
    hits = (r2 > r2_threshold) & (slope > 0) & (growth >= math.log(growth_factor))
    if not hits.any():
        return None
    i = int(np.argmax(hits))
    day = i * stride / steps_per_day
    return day, float(r2[i]), int(np.sign(slope[i]))


def detect_blowup(
    min_series,
    max_series,
    steps_per_day: float = 4,
    smoothing_days: float = 4,
    window_days: float = 30,
    r2_threshold: float = 0.9,
    stride_days: float = 1,
    growth_factor: float = 10.0,
) -> BlowupResult:
    """Detect exponential blow-up from global min/max series at 6-h steps.

    Each series is centered on its first-window mean, folded to absolute
    deviations (floored to avoid log of zero), smoothed with a rolling mean,
    and scanned with sliding windows of ``window_days``. A window flags when
    the log-deviation regression has R^2 above the threshold, positive
    slope, and fitted growth of at least ``growth_factor`` across the
    window. The earliest flagged window over the two series wins.
    """
    candidates = []
    for name, series in (("min", min_series), ("max", max_series)):
        hit = _scan_windows(series, steps_per_day, smoothing_days, window_days,
                            r2_threshold, stride_days, growth_factor)
        if hit is not None:
            candidates.append((hit[0], name, hit[1], hit[2]))
    if not candidates:
        return BlowupResult(day=None, triggered_by=None, r2=None, slope_sign=None)
    day, name, r2, sign = min(candidates, key=lambda c: c[0])
    return BlowupResult(day=day, triggered_by=name, r2=r2, slope_sign=sign)


# ---------------------------------------------------------------------------
# seasonality


@dataclass(frozen=True)
class SeasonalityResult:
    """First day starting >= run_days consecutive envelope violations."""

    day: float | None
    multiplier: float
    run_length: int | None


def detect_seasonality_loss(
    series: DailySeries,
    envelope: ClimatologyEnvelope,
    multiplier: float = 2.0,
    run_days: int = 45,
) -> SeasonalityResult:
    """Flag sustained departure of a daily band series from its envelope.

    Day t violates when |value(t) - envelope.mean(doy)| exceeds
    ``multiplier`` times the envelope range for that day of year. A zero
    range makes any nonzero deviation a violation. The loss day is the
    offset (in days from the start of the series) of the first run of at
    least ``run_days`` consecutive violations.
    """
    if not np.isfinite(series.values).all():
        raise ValueError("daily series contains non-finite values")
    dev = np.abs(series.values - envelope.mean_for(series.dates))
    thr = multiplier * envelope.range_for(series.dates)
    viol = dev > thr

    padded = np.concatenate(([False], viol, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, ends = edges[::2], edges[1::2]
    for s, e in zip(starts, ends):
        if e - s >= run_days:
            return SeasonalityResult(day=float(s), multiplier=multiplier,
                                     run_length=int(e - s))
    return SeasonalityResult(day=None, multiplier=multiplier, run_length=None)


# ---------------------------------------------------------------------------
# small scales


@dataclass(frozen=True)
class SmallScaleResult:
    """Small-band energy ratios over a trailing window."""

    ratio_vs_reference: float
    ratio_vs_self: float
    window_days: float
    window_end: np.datetime64
    truncated: bool


def small_scale_ratios(
    spec: SpectrumSeries,
    ref_spec: SpectrumSeries,
    blowup_day: float | None = None,
    window_days: float = 30.0,
    lead_days: float = 2.0,
) -> SmallScaleResult:
    """Ratios of mean small-band energy: prediction/reference and end/start.

    The window is the last ``window_days`` of the prediction, or the
    ``window_days`` ending at ``blowup_day`` when a blow-up was detected.
    The reference is averaged over the same calendar window. The self ratio
    divides by the prediction's first ``lead_days``.
    """
    pred_small = spec.band("small")
    ref_small = ref_spec.band("small")
    t = spec.timestamps
    if blowup_day is not None:
        # the 30 days strictly before the blow-up time
        end = t[0] + np.timedelta64(int(round(blowup_day * 86400)), "s")
        start = end - np.timedelta64(int(round(window_days * 86400)), "s")
        win = (t >= start) & (t < end)
    else:
        end = t[-1]
        start = end - np.timedelta64(int(round(window_days * 86400)), "s")
        win = (t > start) & (t <= end)
    truncated = bool(start < t[0])
    if not win.any():
        raise ValueError("ratio window selects no prediction timesteps")
    used_days = min(window_days, (end - t[0]) / np.timedelta64(1, "D"))

    rt = ref_spec.timestamps
    if blowup_day is not None:
        ref_win = (rt >= start) & (rt < end)
    else:
        ref_win = (rt > start) & (rt <= end)
    if not ref_win.any():
        raise ValueError("reference spectra do not cover the ratio window")
    ref_mean = float(ref_small[ref_win].mean())
    if ref_mean == 0.0:
        raise ValueError("reference small-band mean is zero over the window")

    lead = t < t[0] + np.timedelta64(int(round(lead_days * 86400)), "s")
    pred_mean = float(pred_small[win].mean())
    lead_mean = float(pred_small[lead].mean())
    if lead_mean == 0.0:
        raise ValueError("prediction small-band mean over the first days is zero")
    return SmallScaleResult(
        ratio_vs_reference=pred_mean / ref_mean,
        ratio_vs_self=pred_mean / lead_mean,
        window_days=float(used_days),
        window_end=end,
        truncated=truncated,
    )


# ---------------------------------------------------------------------------
# seasonal-cycle RMSE


def seasonal_cycle_rmse(rollout: RolloutSeries, reference: RolloutSeries, v: str) -> float:
    """Latitude-weighted RMSE between monthly seasonal cycles.

    Both series must cover the same whole calendar months, with every
    calendar month appearing the same number of times (N whole years). The
    per-cell cycle is the mean over all steps falling in each calendar
    month; the RMSE averages squared differences over the 12 months with
    area weights.
    """
    if not rollout.grid.same_geometry(reference.grid):
        raise ValueError("rollout and reference grids differ")
    ts_a, ts_b = rollout.timestamps, reference.timestamps
    if ts_a.size != ts_b.size or np.any(ts_a != ts_b):
        raise ValueError("rollout and reference must share identical timestamps")
    months = ts_a.astype("datetime64[M]")
    month_num = (months.astype(int) % 12) + 1

    # whole-month coverage: every present (year, month) must be fully sampled
    uniq_months, inverse = np.unique(months, return_inverse=True)
    counts = np.bincount(inverse)
    days_in = ((uniq_months + 1).astype("datetime64[D]") - uniq_months.astype("datetime64[D]"))
    expected = days_in.astype(int) * 86400 // rollout.step_seconds
    if np.any(counts != expected):
        raise ValueError("incomplete calendar months in the input series")
    instances = np.bincount(uniq_months.astype(int) % 12, minlength=12)
    if np.any(instances == 0) or np.unique(instances).size != 1:
        raise ValueError("series must span whole years: every calendar month N times")

    a = require_finite(rollout, v).astype(np.float64)
    b = require_finite(reference, v).astype(np.float64)
    w = cell_weights(rollout.grid)
    sq = 0.0
    for m in range(1, 13):
        sel = month_num == m
        diff = a[sel].mean(axis=0) - b[sel].mean(axis=0)
        sq += float((w * diff**2).sum())
    return math.sqrt(sq / 12.0)


# ---------------------------------------------------------------------------
# per-rollout report and aggregation


@dataclass
class StabilityReport:
    """Per-variable stability metrics of one rollout, mirroring the three
    headline tables (blow-up day, seasonality-loss day, small-scale ratios)."""

    name: str
    horizon_days: float
    variables: tuple[str, ...]
    blowup: dict[str, BlowupResult] = field(default_factory=dict)
    seasonality: dict[str, SeasonalityResult] = field(default_factory=dict)
    small_scale: dict[str, SmallScaleResult | None] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def day_entry(day):
            if day is None:
                return {"censored": True, "horizon": self.horizon_days}
            return {"censored": False, "day": day}

        out = {
            "name": self.name,
            "horizon_days": self.horizon_days,
            "variables": list(self.variables),
            "blowup": {},
            "seasonality": {},
            "small_scale": {},
        }
        for v in self.variables:
            b = self.blowup[v]
            out["blowup"][v] = day_entry(b.day) | {
                "triggered_by": b.triggered_by, "r2": b.r2, "slope_sign": b.slope_sign,
            }
            s = self.seasonality[v]
            out["seasonality"][v] = day_entry(s.day) | {
                "multiplier": s.multiplier, "run_length": s.run_length,
            }
            ss = self.small_scale.get(v)
            if ss is None:
                out["small_scale"][v] = None
            else:
                out["small_scale"][v] = {
                    "ratio_vs_reference": ss.ratio_vs_reference,
                    "ratio_vs_self": ss.ratio_vs_self,
                    "window_days": ss.window_days,
                    "truncated": ss.truncated,
                }
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "StabilityReport":
        variables = tuple(d["variables"])
        rep = cls(name=d["name"], horizon_days=d["horizon_days"], variables=variables)
        for v in variables:
            b = d["blowup"][v]
            rep.blowup[v] = BlowupResult(
                day=None if b["censored"] else b["day"],
                triggered_by=b.get("triggered_by"),
                r2=b.get("r2"),
                slope_sign=b.get("slope_sign"),
            )
            s = d["seasonality"][v]
            rep.seasonality[v] = SeasonalityResult(
                day=None if s["censored"] else s["day"],
                multiplier=s.get("multiplier", 2.0),
                run_length=s.get("run_length"),
            )
            ss = d["small_scale"].get(v)
            if ss is None:
                rep.small_scale[v] = None
            else:
                rep.small_scale[v] = SmallScaleResult(
                    ratio_vs_reference=ss["ratio_vs_reference"],
                    ratio_vs_self=ss["ratio_vs_self"],
                    window_days=ss.get("window_days", 30.0),
                    window_end=np.datetime64("NaT"),
                    truncated=ss.get("truncated", False),
                )
        return rep


def build_report(
    prediction: RolloutSeries,
    reference: RolloutSeries,
    name: str = "rollout",
    multiplier: float = 2.0,
    run_days: int = 45,
    window_days: float = 30,
    smoothing_days: float = 4,
    r2_threshold: float = 0.9,
) -> StabilityReport:
    """Run all three detectors for every variable shared by both series."""
    shared = tuple(v for v in prediction.variables if v in reference.variables)
    if not shared:
        raise ValueError("prediction and reference share no variables")
    steps_per_day = 86400.0 / prediction.step_seconds
    rep = StabilityReport(name=name, horizon_days=prediction.horizon_days, variables=shared)

    def one(v: str):
        ext = spatial_extremes(prediction, v)
        require_finite(prediction, v)
        blow = detect_blowup(
            ext.min, ext.max, steps_per_day=steps_per_day, window_days=window_days,
            smoothing_days=smoothing_days, r2_threshold=r2_threshold,
        )
        envelope = build_envelope(reference, band_statistic(v, "large"), name=f"band_large[{v}]")
        spec = spectrum_series(prediction, v, daily=True)
        daily = DailySeries(spec.timestamps.astype("datetime64[D]"), spec.band_large)
        season = detect_seasonality_loss(daily, envelope, multiplier=multiplier, run_days=run_days)
        try:
            ref_spec = spectrum_series(reference, v, daily=True)
            small = small_scale_ratios(spec, ref_spec, blowup_day=blow.day)
        except BandUnresolvedError:
            small = None
        return v, blow, season, small

    workers = min(thread_count(), len(shared))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, shared))
    else:
        results = [one(v) for v in shared]
    for v, blow, season, small in results:
        rep.blowup[v] = blow
        rep.seasonality[v] = season
        rep.small_scale[v] = small
    return rep


METRICS = ("blowup_day", "seasonality_day", "ratio_vs_reference", "ratio_vs_self")


def aggregate_runs(reports: list[StabilityReport]) -> dict:
    """Mean and sample std of each metric across rollouts.

    Censored day entries ("none within horizon") contribute the horizon
    length, matching the convention of reporting stable cells as the full
    horizon with zero spread.
    """
    if len(reports) < 2:
        raise ValueError("aggregation requires at least two reports")
    variables = reports[0].variables
    for r in reports[1:]:
        if r.variables != variables:
            raise ValueError("reports have mismatched variable sets")

    def collect(metric, v):
        vals = []
        for r in reports:
            if metric == "blowup_day":
                d = r.blowup[v].day
                vals.append(r.horizon_days if d is None else d)
            elif metric == "seasonality_day":
                d = r.seasonality[v].day
                vals.append(r.horizon_days if d is None else d)
            else:
                ss = r.small_scale.get(v)
                if ss is None:
                    return None
                vals.append(getattr(ss, metric))
        return np.array(vals, dtype=np.float64)

    out = {"n_runs": len(reports), "variables": list(variables), "metrics": {}}
    for metric in METRICS:
        per_var = {}
        for v in variables:
            vals = collect(metric, v)
            if vals is None:
                per_var[v] = None
            else:
                per_var[v] = {"mean": float(vals.mean()), "std": float(vals.std(ddof=1))}
        out["metrics"][metric] = per_var
    return out
