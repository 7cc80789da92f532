"""Zonal energy spectra and the three wavelength bands.

The spectrum of a field is the DFT amplitude along each latitude circle,
averaged across rows with area weights. Wavenumbers map to wavelengths via
the equatorial circumference and fall into three bands: large (>= 5000 km),
medium (250..1000 km), small (< 250 km); 1000..5000 km is a deliberate gap.
"""

import numpy as np

import rollstab as rs
from rollstab.spectra import BandUnresolvedError, band_members

grid = rs.GridSpec.regular(33, 384)

# a pure zonal wave puts all its energy in one wavenumber
lon = np.radians(grid.lons)
field = 2.0 * np.cos(6 * lon)[None, :] * np.ones((grid.n_lat, 1))
energy = rs.zonal_spectrum(field, grid)
print(f"cos(6*lon): energy[6]={energy[6]:.3f} (amplitude/2), "
      f"everything else < {np.delete(energy, 6).max():.1e}")

# wavenumber -> wavelength, and the band boundaries
for k in (1, 8, 9, 40, 41, 160, 161):
    print(f"  k={k:4d}  lambda={rs.wavelength_of(k, grid):9.1f} km")
for band in ("large", "medium", "small"):
    ks = band_members(grid, band)
    print(f"  {band:7s} band: k {ks[0]}..{ks[-1]} ({ks.size} wavenumbers)")

# band averages of a white-noise field are flat across bands
rng = np.random.default_rng(1)
noise = rng.standard_normal((grid.n_lat, grid.n_lon))
spec = rs.zonal_spectrum(noise, grid)
for band in ("large", "medium", "small"):
    print(f"  white noise {band:7s}: {rs.band_average(spec, grid, band):.4f}")

# coarse grids cannot resolve the small band; asking errs out loudly
coarse = rs.GridSpec.from_resolution(1.5)
try:
    rs.band_average(np.ones(coarse.n_lon // 2 + 1), coarse, "small")
except BandUnresolvedError as e:
    print(f"1.5-degree grid: {e}")
