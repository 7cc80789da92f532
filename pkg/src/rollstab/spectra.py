"""Zonal Fourier energy spectra with latitude weighting and wavelength bands.

The energy at wavenumber k is the amplitude |c_k| of the discrete Fourier
coefficient taken along longitude with 1/n_lon normalization, combined
across latitude rows with area weights. Wavelengths map to wavenumbers via
the equatorial circumference, lambda_k = 2*pi*R / k; k = 0 counts as
infinite wavelength. Bands: large >= 5000 km (including k = 0), medium
250..1000 km, small < 250 km. Wavelengths between 1000 and 5000 km belong
to no band.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .gridio import (
    DailySeries,
    GridSpec,
    PreconditionError,
    RolloutSeries,
    daily_mean,
    latitude_weights,
    require_finite,
)

LARGE_MIN_KM = 5000.0
MEDIUM_MIN_KM = 250.0
MEDIUM_MAX_KM = 1000.0
SMALL_MAX_KM = 250.0

BANDS = ("large", "medium", "small")


class BandUnresolvedError(PreconditionError):
    """The requested wavelength band contains no wavenumbers on this grid."""


def thread_count() -> int:
    """Worker cap for parallel loops; ROLLOUT_STAB_THREADS overrides."""
    env = os.environ.get("ROLLOUT_STAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def wavelength_of(k: int, grid: GridSpec) -> float:
    """Wavelength in km of zonal wavenumber k; k = 0 maps to +inf."""
    if k < 0:
        raise ValueError("wavenumber must be >= 0")
    if k == 0:
        return float("inf")
    return 2.0 * np.pi * grid.earth_radius_km / k


def wavelengths(grid: GridSpec) -> np.ndarray:
    """Wavelengths for the half-spectrum k = 0..n_lon//2, inf at k = 0."""
    k = np.arange(grid.n_lon // 2 + 1, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(k == 0, np.inf, 2.0 * np.pi * grid.earth_radius_km / k)


def band_members(grid: GridSpec, band: str) -> np.ndarray:
    """Wavenumber indices belonging to a band; raises if the band is empty."""
    lam = wavelengths(grid)
    if band == "large":
        sel = lam >= LARGE_MIN_KM
    elif band == "medium":
        sel = (lam >= MEDIUM_MIN_KM) & (lam <= MEDIUM_MAX_KM)
    elif band == "small":
        sel = lam < SMALL_MAX_KM
    else:
        raise ValueError(f"unknown band {band!r}; expected one of {BANDS}")
    idx = np.flatnonzero(sel)
    if idx.size == 0:
        raise BandUnresolvedError(
            f"band {band!r} unresolved: no wavenumbers on a grid with n_lon={grid.n_lon}"
        )
    return idx


def zonal_spectrum(field: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Latitude-weighted zonal amplitude spectrum of a (lat, lon) field.

    Returns one value per wavenumber k = 0..n_lon//2.
    """
    if grid.n_lon < 4:
        raise ValueError("zonal spectra need at least 4 longitude points")
    field = np.asarray(field, dtype=np.float64)
    if field.shape != (grid.n_lat, grid.n_lon):
        raise ValueError(
            f"field shape {field.shape} does not match grid ({grid.n_lat}, {grid.n_lon})"
        )
    amp = np.abs(np.fft.rfft(field, axis=-1)) / grid.n_lon
    return latitude_weights(grid) @ amp


def band_average(energy: np.ndarray, grid: GridSpec, band: str) -> np.ndarray:
    """Unweighted mean of energy over the wavenumbers of one band.

    ``energy`` may be a single spectrum (n_k,) or a stack (..., n_k).
    """
    idx = band_members(grid, band)
    energy = np.asarray(energy)
    if energy.shape[-1] != grid.n_lon // 2 + 1:
        raise ValueError("energy last axis does not match the grid half-spectrum")
    return energy[..., idx].mean(axis=-1)


@dataclass(frozen=True)
class SpectrumSeries:
    """Per-timestep zonal spectra plus band-averaged series.

    A band entry is None when that band contains no wavenumbers on the grid
    (the small band on coarse grids); consumers that need it get an explicit
    error from :meth:`band`, never a silent zero.
    """

    timestamps: np.ndarray  # datetime64[s]
    wavenumbers: np.ndarray
    energy: np.ndarray  # (time, n_k)
    band_large: np.ndarray
    band_medium: np.ndarray | None
    band_small: np.ndarray | None
    grid: GridSpec

    @property
    def n_time(self) -> int:
        return self.energy.shape[0]

    def band(self, name: str) -> np.ndarray:
        vals = {"large": self.band_large, "medium": self.band_medium, "small": self.band_small}[name]
        if vals is None:
            raise BandUnresolvedError(
                f"band {name!r} unresolved on a grid with n_lon={self.grid.n_lon}"
            )
        return vals


def _spectra_stack(fields: np.ndarray, grid: GridSpec) -> np.ndarray:
    amp = np.abs(np.fft.rfft(fields, axis=-1)) / grid.n_lon
    w = latitude_weights(grid)
    return np.einsum("j,tjk->tk", w, amp)


def spectrum_series(r: RolloutSeries, v: str, daily: bool = False) -> SpectrumSeries:
    """Zonal spectra of variable ``v`` at every timestep.

    With ``daily=True`` the spectra are averaged into one per UTC day (the
    mean of the sub-daily spectra, typically 4 six-hourly ones).
    """
    if r.grid.n_lon < 4:
        raise ValueError("zonal spectra need at least 4 longitude points")
    fields = require_finite(r, v).astype(np.float64)
    workers = thread_count()
    if workers > 1 and r.n_time >= 64:
        chunks = np.array_split(np.arange(r.n_time), workers)
        energy = np.empty((r.n_time, r.grid.n_lon // 2 + 1))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for idx, res in zip(chunks, pool.map(lambda i: _spectra_stack(fields[i], r.grid), chunks)):
                energy[idx] = res
    else:
        energy = _spectra_stack(fields, r.grid)
    timestamps = r.timestamps
    if daily:
        days = timestamps.astype("datetime64[D]")
        uniq, inverse = np.unique(days, return_inverse=True)
        counts = np.bincount(inverse).astype(np.float64)
        summed = np.zeros((uniq.size, energy.shape[1]))
        np.add.at(summed, inverse, energy)
        energy = summed / counts[:, None]
        timestamps = uniq.astype("datetime64[s]")
    band_large = band_average(energy, r.grid, "large")
    bands = {}
    for name in ("medium", "small"):
        try:
            bands[name] = band_average(energy, r.grid, name)
        except BandUnresolvedError:
            bands[name] = None
    return SpectrumSeries(
        timestamps=timestamps,
        wavenumbers=np.arange(r.grid.n_lon // 2 + 1),
        energy=energy,
        band_large=band_large,
        band_medium=bands["medium"],
        band_small=bands["small"],
        grid=r.grid,
    )


def band_daily_series(spec: SpectrumSeries, band: str) -> DailySeries:
    """Daily means of one band series, for envelope and seasonality work."""
    vals = spec.band(band)
    return daily_mean(spec.timestamps, vals)
