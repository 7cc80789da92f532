"""Day-of-year climatological envelopes and pooled percentile thresholds.

Envelopes hold the per-day mean/min/max of a daily statistic across the
years of a reference period (365 buckets, Feb 29 folded into Feb 28).
Thresholds are empirical percentiles of all region pixels pooled over all
timesteps, using linear interpolation between order statistics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gridio import (
    DailySeries,
    PreconditionError,
    RegionSpec,
    RolloutSeries,
    folded_doy,
    region_mask,
)
from . import spectra as _spectra


class EnvelopeCoverageError(PreconditionError):
    """Reference period does not cover every day of year with >= 2 years."""


@dataclass(frozen=True)
class ClimatologyEnvelope:
    """Per-day-of-year mean and min/max range of a statistic."""

    statistic: str
    mean: np.ndarray  # (365,)
    min: np.ndarray
    max: np.ndarray
    year_span: tuple[int, int]

    def __post_init__(self):
        for name in ("mean", "min", "max"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (365,):
                raise ValueError(f"envelope {name} must have exactly 365 entries")
            object.__setattr__(self, name, arr)
        if np.any(self.min > self.mean) or np.any(self.mean > self.max):
            raise ValueError("envelope must satisfy min <= mean <= max per day")

    @property
    def range(self) -> np.ndarray:
        return self.max - self.min

    def mean_for(self, dates) -> np.ndarray:
        return self.mean[folded_doy(dates) - 1]

    def range_for(self, dates) -> np.ndarray:
        return self.range[folded_doy(dates) - 1]

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "mean": self.mean.tolist(),
            "min": self.min.tolist(),
            "max": self.max.tolist(),
            "year_span": list(self.year_span),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClimatologyEnvelope":
        return cls(
            statistic=d["statistic"],
            mean=np.array(d["mean"]),
            min=np.array(d["min"]),
            max=np.array(d["max"]),
            year_span=tuple(d["year_span"]),
        )

    def save(self, path, extra: dict | None = None) -> None:
        doc = self.to_dict()
        if extra:
            doc.update(extra)
        with open(path, "w") as f:
            json.dump(doc, f, sort_keys=True, indent=1)

    @classmethod
    def load(cls, path) -> "ClimatologyEnvelope":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def build_envelope(
    reference: RolloutSeries,
    statistic: Callable[[RolloutSeries], DailySeries],
    name: str = "statistic",
) -> ClimatologyEnvelope:
    """Envelope of a daily statistic over the reference years.

    ``statistic`` extracts a DailySeries from the reference series. Every
    day of year must be covered by at least two distinct years.
    """
    daily = statistic(reference)
    doys = folded_doy(daily.dates)
    years = daily.dates.astype("datetime64[Y]").astype(int) + 1970
    mean = np.full(365, np.nan)
    lo = np.full(365, np.nan)
    hi = np.full(365, np.nan)
    for d in range(1, 366):
        sel = doys == d
        if np.unique(years[sel]).size < 2:
            raise EnvelopeCoverageError(
                f"day of year {d} covered by fewer than 2 reference years"
            )
        vals = daily.values[sel]
        mean[d - 1] = vals.mean()
        lo[d - 1] = vals.min()
        hi[d - 1] = vals.max()
    return ClimatologyEnvelope(
        statistic=name,
        mean=mean,
        min=lo,
        max=hi,
        year_span=(int(years.min()), int(years.max())),
    )


def band_statistic(v: str, band: str = "large") -> Callable[[RolloutSeries], DailySeries]:
    """Statistic extractor: daily mean of one spectral band of variable v."""

    def stat(r: RolloutSeries) -> DailySeries:
        spec = _spectra.spectrum_series(r, v, daily=True)
        return DailySeries(spec.timestamps.astype("datetime64[D]"), spec.band(band))

    return stat


@dataclass(frozen=True)
class ThresholdSet:
    """Percentile thresholds of a pooled sample, monotone in level."""

    region: str
    levels: tuple[float, ...]
    values: tuple[float, ...]
    pooling: str

    def __post_init__(self):
        if len(self.levels) != len(self.values):
            raise ValueError("levels and values must have equal length")
        order = np.argsort(self.levels)
        lv = np.array(self.levels)[order]
        vv = np.array(self.values)[order]
        if np.any(np.diff(vv) < 0):
            raise ValueError("threshold values must be monotone in percentile level")
        object.__setattr__(self, "levels", tuple(float(x) for x in lv))
        object.__setattr__(self, "values", tuple(float(x) for x in vv))

    def value_for(self, level: float) -> float:
        for lv, val in zip(self.levels, self.values):
            if lv == level:
                return val
        raise KeyError(f"level {level} not present in threshold set {self.region!r}")

    def to_dict(self) -> dict:
        return {
            "region": self.region,
            "levels": list(self.levels),
            "values": list(self.values),
            "pooling": self.pooling,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdSet":
        return cls(
            region=d["region"],
            levels=tuple(d["levels"]),
            values=tuple(d["values"]),
            pooling=d["pooling"],
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True, indent=1)

    @classmethod
    def load(cls, path) -> "ThresholdSet":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def pooled_percentiles(
    reference: RolloutSeries,
    v: str,
    region: RegionSpec,
    levels,
) -> ThresholdSet:
    """Empirical percentiles over all region pixels pooled across all timesteps."""
    levels = [float(x) for x in np.atleast_1d(levels)]
    for lv in levels:
        if not 0.0 < lv < 100.0:
            raise ValueError(f"percentile level {lv} outside the open interval (0, 100)")
    mask, _ = region_mask(reference.grid, region)
    pool = reference.values(v)[:, mask]
    if not np.isfinite(pool).all():
        raise ValueError("pooled sample contains fill/NaN values")
    values = np.percentile(pool, levels, method="linear")
    span = (
        f"{v}: all pixels of {region.name}, all {reference.n_time} timesteps "
        f"from {reference.start_time.isoformat()}, linear order-statistic interpolation"
    )
    return ThresholdSet(
        region=region.name,
        levels=tuple(levels),
        values=tuple(float(x) for x in values),
        pooling=span,
    )
