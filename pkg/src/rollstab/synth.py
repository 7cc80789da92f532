"""Synthetic spectral rollout generator with controllable failure regimes.

Each step transforms the field row-wise to zonal Fourier space, applies
per-band gains, injects band-limited white noise, transforms back, and adds
a seasonal forcing (a wavenumber-1 zonal wave tapered by cos(lat), with a
sinusoidal annual cycle). The system is linear, so the expected response of
every detector is analytically derivable: the generator doubles as the
ground-truth oracle for validating the detectors.

Regimes: STABLE (all gains <= 1), BLOWUP (one band's gain switches to
1 + delta after an onset day, with a small mode planted at onset), DRIFT
(seasonal amplitude decays with time constant tau), SHARPEN (small-band
gain > 1 with a hard amplitude clamp), BLUR (small-band gain < 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .gridio import GridSpec, RolloutSeries, latitude_weights, spatial_extremes
from .spectra import BandUnresolvedError, band_members
from .climatology import ClimatologyEnvelope

REGIMES = ("STABLE", "BLOWUP", "DRIFT", "SHARPEN", "BLUR")

_DEFAULT_EPOCH = datetime(2021, 1, 1)
_YEAR_DAYS = 365.25
_SATURATION = 1e30


def _default_grid() -> GridSpec:
    return GridSpec.regular(16, 240)


@dataclass(frozen=True)
class RegimeConfig:
    """Parameters of the synthetic generator; doubles as ground-truth label."""

    regime: str
    grid: GridSpec = field(default_factory=_default_grid)
    variables: tuple[str, ...] = ("T2m",)
    g_large: float = 0.95
    g_medium: float = 0.95
    g_small: float = 0.95
    seasonal_amplitude: float = 5.0
    tau_days: float | None = None  # DRIFT: seasonal decay time
    onset_day: float | None = None  # BLOWUP: t0
    growth_rate: float | None = None  # BLOWUP: delta, per-step gain excess
    blowup_band: str = "medium"
    seed_amplitude: float = 0.05  # BLOWUP: planted mode coefficient amplitude
    noise_large: float = 0.02
    noise_medium: float = 0.02
    noise_small: float = 0.02
    cap: float | None = None  # SHARPEN: hard amplitude clamp
    init_std: float = 1.0
    year_jitter: float = 0.0  # seasonal amplitude spread across calendar years
    jitter_cycle_years: int = 5
    epoch: datetime = _DEFAULT_EPOCH
    seed: int = 0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        gains = (self.g_large, self.g_medium, self.g_small)
        if self.regime in ("STABLE", "BLUR", "DRIFT"):
            if any(g > 1.0 for g in gains):
                raise ValueError(f"{self.regime} requires all per-band gains <= 1")
        if self.regime == "DRIFT":
            if self.tau_days is None or self.tau_days <= 0:
                raise ValueError("DRIFT requires a positive tau_days")
        if self.regime == "BLOWUP":
            if self.growth_rate is None or self.growth_rate <= 0:
                raise ValueError("BLOWUP requires growth_rate (delta) > 0")
            if self.onset_day is None or self.onset_day < 0:
                raise ValueError("BLOWUP requires onset_day >= 0")
            if self.blowup_band not in ("large", "medium", "small"):
                raise ValueError("blowup_band must be large, medium, or small")
            if any(g > 1.0 for g in gains):
                raise ValueError("BLOWUP base gains must be <= 1 before onset")
        if self.regime == "SHARPEN":
            if not self.g_small > 1.0:
                raise ValueError("SHARPEN requires g_small > 1")
            if self.cap is None or self.cap <= 0:
                raise ValueError("SHARPEN requires a positive amplitude cap")
        if min(self.noise_large, self.noise_medium, self.noise_small) < 0:
            raise ValueError("noise levels must be >= 0")
        if self.init_std < 0 or self.year_jitter < 0:
            raise ValueError("init_std and year_jitter must be >= 0")
        if self.year_jitter > 0 and self.jitter_cycle_years < 2:
            raise ValueError("year_jitter needs a jitter cycle of >= 2 years")


def config_to_dict(cfg: RegimeConfig) -> dict:
    return {
        "regime": cfg.regime,
        "grid": {
            "lats": [float(x) for x in cfg.grid.lats],
            "lons": [float(x) for x in cfg.grid.lons],
            "earth_radius_km": float(cfg.grid.earth_radius_km),
        },
        "variables": list(cfg.variables),
        "g_large": cfg.g_large,
        "g_medium": cfg.g_medium,
        "g_small": cfg.g_small,
        "seasonal_amplitude": cfg.seasonal_amplitude,
        "tau_days": cfg.tau_days,
        "onset_day": cfg.onset_day,
        "growth_rate": cfg.growth_rate,
        "blowup_band": cfg.blowup_band,
        "seed_amplitude": cfg.seed_amplitude,
        "noise_large": cfg.noise_large,
        "noise_medium": cfg.noise_medium,
        "noise_small": cfg.noise_small,
        "cap": cfg.cap,
        "init_std": cfg.init_std,
        "year_jitter": cfg.year_jitter,
        "jitter_cycle_years": cfg.jitter_cycle_years,
        "epoch": cfg.epoch.isoformat(),
        "seed": cfg.seed,
    }


def config_from_dict(d: dict) -> RegimeConfig:
    """Build a config from JSON; the grid accepts either explicit lat/lon
    arrays or an {n_lat, n_lon} shorthand for a regular grid."""
    d = dict(d)
    g = d.pop("grid", None)
    if g is None:
        grid = _default_grid()
    elif "lats" in g:
        grid = GridSpec(
            lats=np.array(g["lats"]),
            lons=np.array(g["lons"]),
            earth_radius_km=float(g.get("earth_radius_km", 6371.0)),
        )
    else:
        grid = GridSpec.regular(int(g["n_lat"]), int(g["n_lon"]))
    epoch = d.pop("epoch", None)
    kwargs = {
        "grid": grid,
        "epoch": _DEFAULT_EPOCH if epoch is None else datetime.fromisoformat(epoch),
    }
    if "variables" in d:
        d["variables"] = tuple(d["variables"])
    valid = RegimeConfig.__dataclass_fields__
    for key, val in d.items():
        if key not in valid:
            raise ValueError(f"unknown regime config field {key!r}")
        kwargs[key] = val
    return RegimeConfig(**kwargs)


def load_config(path) -> RegimeConfig:
    import json

    with open(path) as f:
        return config_from_dict(json.load(f))


class _Stepper:
    """Precomputed spectral machinery for one config."""

    def __init__(self, cfg: RegimeConfig):
        self.cfg = cfg
        grid = cfg.grid
        n = grid.n_lon
        n_k = n // 2 + 1
        self.gain = np.ones(n_k)
        self.band_k: dict[str, np.ndarray] = {}
        for band, g in (("large", cfg.g_large), ("medium", cfg.g_medium), ("small", cfg.g_small)):
            try:
                idx = band_members(grid, band)
            except BandUnresolvedError:
                if cfg.regime == "SHARPEN" and band == "small":
                    raise
                continue
            self.band_k[band] = idx
            self.gain[idx] = g
        self.gain_after_onset = self.gain.copy()
        if cfg.regime == "BLOWUP":
            if cfg.blowup_band not in self.band_k:
                raise BandUnresolvedError(
                    f"blow-up band {cfg.blowup_band!r} unresolved on this grid"
                )
            self.gain_after_onset[self.band_k[cfg.blowup_band]] = 1.0 + cfg.growth_rate

        # band-limited noise: complex coefficient sigma per wavenumber, chosen
        # so the injected field has the configured std per band; k=0 and the
        # Nyquist column stay noise-free
        self.noise_sigma = np.zeros(n_k)
        interior = np.arange(1, (n + 1) // 2)
        for band, sigma in (("large", cfg.noise_large), ("medium", cfg.noise_medium),
                            ("small", cfg.noise_small)):
            if sigma <= 0 or band not in self.band_k:
                continue
            idx = np.intersect1d(self.band_k[band], interior)
            if idx.size == 0:
                continue
            self.noise_sigma[idx] = sigma * n / (2.0 * math.sqrt(idx.size))
        self.noisy_k = np.flatnonzero(self.noise_sigma > 0)

        lat_rad = np.radians(grid.lats)
        lon_rad = np.radians(grid.lons)
        self.pattern = np.cos(lat_rad)[:, None] * np.cos(lon_rad)[None, :]
        if cfg.regime == "BLOWUP":
            k_band = self.band_k[cfg.blowup_band]
            k0 = int(k_band[len(k_band) // 2])
            if k0 == 0:
                k0 = int(k_band[-1])
            self.planted = 2.0 * cfg.seed_amplitude * (
                np.cos(lat_rad)[:, None] * np.cos(k0 * lon_rad)[None, :]
            )
            self.planted_k = k0

    def seasonal_amplitude(self, clock_out: datetime, t_out_days: float) -> float:
        cfg = self.cfg
        a = cfg.seasonal_amplitude
        if cfg.regime == "DRIFT":
            a *= math.exp(-t_out_days / cfg.tau_days)
        if cfg.year_jitter > 0:
            # deterministic evenly spaced per-year factors spanning +-jitter,
            # so a reference covering one cycle has an exactly known range
            pos = (clock_out.year - cfg.epoch.year) % cfg.jitter_cycle_years
            frac = pos / (cfg.jitter_cycle_years - 1)
            a *= 1.0 + cfg.year_jitter * (2.0 * frac - 1.0)
        return a

    def forcing(self, clock_out: datetime, t_out_days: float) -> np.ndarray:
        a = self.seasonal_amplitude(clock_out, t_out_days)
        if a == 0.0:
            return np.zeros_like(self.pattern)
        year_start = datetime(clock_out.year, 1, 1)
        doy = (clock_out - year_start).total_seconds() / 86400.0 + 1.0
        return a * math.sin(2.0 * math.pi * doy / _YEAR_DAYS) * self.pattern


def _step_core(stepper: _Stepper, state: np.ndarray, clock: datetime,
               step_seconds: int, var_index: int) -> np.ndarray:
    cfg = stepper.cfg
    grid = cfg.grid
    clock_out = clock + timedelta(seconds=step_seconds)
    out_seconds = (clock_out - cfg.epoch).total_seconds()
    t_out_days = out_seconds / 86400.0
    step_index = int(round(out_seconds / step_seconds))

    coeffs = np.fft.rfft(state, axis=-1)
    if cfg.regime == "BLOWUP" and t_out_days >= cfg.onset_day:
        coeffs *= stepper.gain_after_onset
    else:
        coeffs *= stepper.gain
    if stepper.noisy_k.size:
        rng = np.random.default_rng([cfg.seed, var_index, step_index])
        shape = (grid.n_lat, stepper.noisy_k.size)
        sig = stepper.noise_sigma[stepper.noisy_k]
        coeffs[:, stepper.noisy_k] += sig * (
            rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        )
    nxt = np.fft.irfft(coeffs, n=grid.n_lon, axis=-1)
    nxt += stepper.forcing(clock_out, t_out_days)
    if cfg.regime == "BLOWUP" and cfg.onset_day is not None:
        prev_days = t_out_days - step_seconds / 86400.0
        if prev_days < cfg.onset_day <= t_out_days:
            nxt += stepper.planted
    if cfg.regime == "SHARPEN":
        np.clip(nxt, -cfg.cap, cfg.cap, out=nxt)
    # keep blown-up fields finite in float32; diverging models saturate the
    # same way once they leave the physical range
    np.clip(nxt, -_SATURATION, _SATURATION, out=nxt)
    return nxt


def synth_step(state: np.ndarray, clock: datetime, cfg: RegimeConfig,
               step_seconds: int = 21600, var_index: int = 0) -> np.ndarray:
    """Advance one 2-D field from ``clock`` to ``clock + step_seconds``."""
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (cfg.grid.n_lat, cfg.grid.n_lon):
        raise ValueError(
            f"state shape {state.shape} does not match grid "
            f"({cfg.grid.n_lat}, {cfg.grid.n_lon})"
        )
    return _step_core(_Stepper(cfg), state, clock, step_seconds, var_index)


def initial_state(cfg: RegimeConfig, var_index: int = 0) -> np.ndarray:
    """Seeded white-noise initial field."""
    rng = np.random.default_rng([cfg.seed, var_index, 999999937])
    return cfg.init_std * rng.standard_normal((cfg.grid.n_lat, cfg.grid.n_lon))


@dataclass
class GroundTruthLabels:
    """Analytic expectations for the detectors on one generated rollout."""

    regime: str
    horizon_days: float
    blowup_window: tuple[float, float] | None = None  # (earliest, latest) day
    emergence_days: float | None = None
    noise_floor: float | None = None
    seasonal_band_amplitude: float | None = None  # band_large units
    tau_days: float | None = None
    small_scale_direction: str = "eq1"  # "lt1", "gt1", or "eq1"
    ratio_vs_self_estimate: float | None = None

    def expected_seasonality_window(
        self, envelope: ClimatologyEnvelope, multiplier: float = 2.0,
        slack_days: float = 60.0,
    ) -> tuple[float, float] | None:
        """DRIFT oracle: solve a * exp(-t/tau) = multiplier * mean range."""
        if self.regime != "DRIFT":
            return None
        rbar = float(envelope.range.mean())
        a = self.seasonal_band_amplitude
        if rbar <= 0 or a <= multiplier * rbar:
            return None
        t_star = self.tau_days * math.log(a / (multiplier * rbar))
        return (t_star, t_star + slack_days)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "horizon_days": self.horizon_days,
            "blowup_window": None if self.blowup_window is None else list(self.blowup_window),
            "emergence_days": self.emergence_days,
            "noise_floor": self.noise_floor,
            "seasonal_band_amplitude": self.seasonal_band_amplitude,
            "tau_days": self.tau_days,
            "small_scale_direction": self.small_scale_direction,
            "ratio_vs_self_estimate": self.ratio_vs_self_estimate,
        }


def _band_response_amplitude(cfg: RegimeConfig) -> float:
    """Steady-state band_large amplitude of the seasonal forcing at its peak."""
    w = latitude_weights(cfg.grid)
    taper = float(w @ np.cos(np.radians(cfg.grid.lats)))
    n_large = band_members(cfg.grid, "large").size
    return cfg.seasonal_amplitude * taper / (2.0 * (1.0 - cfg.g_large) * n_large)


def _blowup_labels(cfg: RegimeConfig, series: RolloutSeries, steps_per_day: float,
                   growth_factor: float = 10.0, slack_days: float = 5.0):
    ext = spatial_extremes(series, series.variables[0])
    t_days = np.arange(series.n_time) / steps_per_day
    pre = t_days < cfg.onset_day
    base_steps = min(int(round(30 * steps_per_day)), series.n_time)
    floors = []
    for s in (ext.min, ext.max):
        s = np.asarray(s, dtype=np.float64)
        baseline = s[:base_steps].mean()
        floors.append(np.abs(s[pre] - baseline).max())
    nf = float(max(floors))
    peak = 2.0 * cfg.seed_amplitude * float(np.cos(np.radians(cfg.grid.lats)).max())
    ratio = growth_factor * nf / peak
    emergence_steps = 0.0 if ratio <= 1.0 else math.ceil(
        math.log(ratio) / math.log1p(cfg.growth_rate)
    )
    emergence_days = emergence_steps / steps_per_day
    window = (float(cfg.onset_day), float(cfg.onset_day) + emergence_days + slack_days)
    return window, emergence_days, nf


def generate(
    cfg: RegimeConfig,
    horizon_days: float,
    step_seconds: int = 21600,
    start_time: datetime | None = None,
) -> tuple[RolloutSeries, GroundTruthLabels]:
    """Iterate the configured regime from a seeded random initial field.

    Returns the rollout (initial state at index 0) and analytic ground-truth
    labels for the detectors. ``horizon_days`` must be at least 60.
    """
    if horizon_days < 60:
        raise ValueError("horizon must be at least 60 days")
    if cfg.regime == "DRIFT" and cfg.tau_days >= horizon_days:
        raise ValueError("DRIFT requires tau_days < horizon")
    if cfg.regime == "BLOWUP" and cfg.onset_day >= horizon_days:
        raise ValueError("BLOWUP onset must fall inside the horizon")
    start = start_time or cfg.epoch
    n_steps = int(round(horizon_days * 86400 / step_seconds))
    stepper = _Stepper(cfg)

    data = np.empty((n_steps + 1, len(cfg.variables), cfg.grid.n_lat, cfg.grid.n_lon),
                    dtype=np.float32)
    for vi in range(len(cfg.variables)):
        state = initial_state(cfg, vi)
        data[0, vi] = state
        clock = start
        for i in range(n_steps):
            state = _step_core(stepper, state, clock, step_seconds, vi)
            clock = clock + timedelta(seconds=step_seconds)
            data[i + 1, vi] = state

    series = RolloutSeries(
        grid=cfg.grid,
        variables=cfg.variables,
        start_time=start,
        data=data,
        step_seconds=step_seconds,
        attrs={"regime": cfg.regime, "seed": cfg.seed},
    )

    steps_per_day = 86400.0 / step_seconds
    labels = GroundTruthLabels(regime=cfg.regime, horizon_days=horizon_days)
    if cfg.regime == "BLOWUP":
        labels.blowup_window, labels.emergence_days, labels.noise_floor = _blowup_labels(
            cfg, series, steps_per_day
        )
        labels.small_scale_direction = "gt1"
    if cfg.regime in ("STABLE", "DRIFT", "BLUR", "SHARPEN"):
        labels.seasonal_band_amplitude = _band_response_amplitude(cfg)
    if cfg.regime == "DRIFT":
        labels.tau_days = cfg.tau_days
    if cfg.regime == "BLUR":
        labels.small_scale_direction = "lt1"
        if cfg.noise_small > 0 and cfg.init_std > 0 and "small" in stepper.band_k:
            m = np.intersect1d(stepper.band_k["small"],
                               np.arange(1, (cfg.grid.n_lon + 1) // 2)).size
            s_raw = cfg.noise_small * cfg.grid.n_lon / (2.0 * math.sqrt(m))
            steady = s_raw / math.sqrt(1.0 - cfg.g_small**2)
            init_coeff = cfg.init_std * math.sqrt(cfg.grid.n_lon / 2.0)
            labels.ratio_vs_self_estimate = steady / init_coeff
    if cfg.regime == "SHARPEN":
        labels.small_scale_direction = "gt1"
    return series, labels
