"""Grid geometry, latitude weighting, region masks, and the RGF rollout container.

The RGF1 container is self-describing binary: 4-byte magic ``RGF1``, an
8-byte little-endian header length, a UTF-8 JSON header (dims, variable
names, lat/lon arrays, start time, step length, optional fill value), then
the payload as little-endian IEEE-754 float32 in (time, variable, lat, lon)
row-major order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

EARTH_RADIUS_KM = 6371.0

_MAGIC = b"RGF1"


class RGFError(Exception):
    """Base error for the RGF container format."""


class FormatError(RGFError):
    """Not an RGF file: bad magic bytes or unparseable header."""


class HeaderMismatchError(RGFError):
    """Header fields disagree with each other or with the payload size."""


class TruncatedPayloadError(RGFError):
    """Payload ends before the header-declared array is complete."""


class UnknownVariableError(ValueError):
    """Requested variable is not present in the series."""


class EmptyRegionError(ValueError):
    """Region selects no grid cells on this grid."""


class PreconditionError(ValueError):
    """A detector precondition is not met (distinct from bad input files)."""


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class GridSpec:
    """Regular lat/lon grid. Longitudes are uniform in [0, 360)."""

    lats: np.ndarray
    lons: np.ndarray
    earth_radius_km: float = EARTH_RADIUS_KM

    def __post_init__(self):
        lats = np.asarray(self.lats, dtype=np.float64)
        lons = np.asarray(self.lons, dtype=np.float64)
        object.__setattr__(self, "lats", lats)
        object.__setattr__(self, "lons", lons)
        if lats.ndim != 1 or lats.size < 1:
            raise ValueError("lats must be a non-empty 1-D array")
        if lons.ndim != 1 or lons.size < 1:
            raise ValueError("lons must be a non-empty 1-D array")
        if np.any(np.abs(lats) > 90.0):
            raise ValueError("latitudes must lie within [-90, 90] degrees")
        if lats.size > 1:
            d = np.diff(lats)
            if not (np.all(d > 0) or np.all(d < 0)):
                raise ValueError("latitudes must be strictly monotone")
        spacing = 360.0 / lons.size
        if not np.allclose(np.diff(lons), spacing, rtol=0, atol=1e-8):
            raise ValueError("longitudes must be uniformly spaced with spacing*n_lon = 360")
        if np.any(lons < 0.0) or np.any(lons >= 360.0):
            raise ValueError("longitudes must lie within [0, 360)")
        if self.earth_radius_km <= 0:
            raise ValueError("earth_radius_km must be positive")

    @property
    def n_lat(self) -> int:
        return self.lats.size

    @property
    def n_lon(self) -> int:
        return self.lons.size

    @classmethod
    def regular(cls, n_lat: int, n_lon: int, earth_radius_km: float = EARTH_RADIUS_KM) -> "GridSpec":
        """Equiangular grid including both poles, longitudes starting at 0."""
        lats = np.linspace(90.0, -90.0, n_lat)
        lons = np.arange(n_lon) * (360.0 / n_lon)
        return cls(lats=lats, lons=lons, earth_radius_km=earth_radius_km)

    @classmethod
    def from_resolution(cls, degrees: float) -> "GridSpec":
        """Grid at the given spacing, e.g. 0.25 -> 721 x 1440, 1.5 -> 121 x 240."""
        n_lat = int(round(180.0 / degrees)) + 1
        n_lon = int(round(360.0 / degrees))
        return cls.regular(n_lat, n_lon)

    def same_geometry(self, other: "GridSpec") -> bool:
        return (
            self.n_lat == other.n_lat
            and self.n_lon == other.n_lon
            and np.allclose(self.lats, other.lats)
            and np.allclose(self.lons, other.lons)
        )


def latitude_weights(grid: GridSpec) -> np.ndarray:
    """Per-latitude-row area weights: cos(lat) clipped at zero, summing to 1."""
    w = np.cos(np.radians(grid.lats))
    w[np.abs(grid.lats) >= 90.0] = 0.0  # exact zero at the poles
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise ValueError("grid has no positive-area latitude rows")
    return w / total


def cell_weights(grid: GridSpec) -> np.ndarray:
    """(n_lat, n_lon) cell weights summing to 1 over the whole grid."""
    w = latitude_weights(grid) / grid.n_lon
    return np.repeat(w[:, None], grid.n_lon, axis=1)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class RegionSpec:
    """Lat/lon box. Longitudes may be given in -180..360 and may wrap across 0."""

    name: str
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not self.lat_min < self.lat_max:
            raise ValueError(f"region {self.name!r}: lat_min must be < lat_max")
        if not self.lon_max > self.lon_min:
            raise ValueError(f"region {self.name!r}: lon_max must be > lon_min")


def _norm_lon(lon: float) -> float:
    return float(np.mod(lon, 360.0))


def region_mask(grid: GridSpec, region: RegionSpec) -> tuple[np.ndarray, int]:
    """Boolean (n_lat, n_lon) mask of cells inside the region, plus pixel count.

    Cells are included when lat is in [lat_min, lat_max] and lon falls in the
    region's longitude interval, with wraparound across 0 degrees.
    """
    lat_ok = (grid.lats >= region.lat_min) & (grid.lats <= region.lat_max)
    span = region.lon_max - region.lon_min
    if span >= 360.0:
        lon_ok = np.ones(grid.n_lon, dtype=bool)
    else:
        lo, hi = _norm_lon(region.lon_min), _norm_lon(region.lon_max)
        if lo <= hi:
            lon_ok = (grid.lons >= lo) & (grid.lons <= hi)
        else:
            lon_ok = (grid.lons >= lo) | (grid.lons <= hi)
    mask = lat_ok[:, None] & lon_ok[None, :]
    count = int(mask.sum())
    if count == 0:
        raise EmptyRegionError(f"region {region.name!r} selects no cells on this grid")
    return mask, count


def builtin_regions() -> dict[str, RegionSpec]:
    """Five literature temperature-extreme regions plus the polar caps."""
    regs = [
        RegionSpec("central_europe", 45.0, 55.0, 5.0, 20.0),
        RegionSpec("western_us", 30.0, 50.0, -125.0, -105.0),
        RegionSpec("east_asia", 25.0, 45.0, 110.0, 135.0),
        RegionSpec("se_australia", -40.0, -25.0, 140.0, 155.0),
        RegionSpec("amazon", -15.0, 5.0, -70.0, -45.0),
        RegionSpec("arctic", 66.5, 90.0, 0.0, 360.0),
        RegionSpec("antarctic", -90.0, -66.5, 0.0, 360.0),
    ]
    return {r.name: r for r in regs}


def load_regions(path) -> dict[str, RegionSpec]:
    """Load region specs from a JSON file: a list of objects with the
    RegionSpec field names."""
    with open(path) as f:
        raw = json.load(f)
    regs = {}
    for entry in raw:
        r = RegionSpec(
            name=entry["name"],
            lat_min=float(entry["lat_min"]),
            lat_max=float(entry["lat_max"]),
            lon_min=float(entry["lon_min"]),
            lon_max=float(entry["lon_max"]),
        )
        regs[r.name] = r
    return regs


# ---------------------------------------------------------------------------
# rollout series


@dataclass
class RolloutSeries:
    """A (time, variable, lat, lon) gridded field sequence.

    ``data`` is float32. NaN is only allowed when ``fill_value`` is set; cells
    equal to the fill value are read back as NaN and rejected by detectors.
    """

    grid: GridSpec
    variables: tuple[str, ...]
    start_time: datetime
    data: np.ndarray
    step_seconds: int = 21600
    fill_value: float | None = None
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.variables = tuple(self.variables)
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 4:
            raise ValueError("data must be 4-D (time, variable, lat, lon)")
        if data.shape[0] < 1:
            raise ValueError("series must contain at least one timestep")
        if data.shape[1] != len(self.variables):
            raise ValueError("data variable axis does not match variable names")
        if data.shape[2:] != (self.grid.n_lat, self.grid.n_lon):
            raise ValueError("spatial slices do not match grid dimensions")
        if self.step_seconds <= 0:
            raise ValueError("step_seconds must be positive")
        if self.fill_value is None and not np.isfinite(data).all():
            raise ValueError("non-finite values present but no fill value declared")
        self.data = data

    @property
    def n_time(self) -> int:
        return self.data.shape[0]

    @property
    def horizon_days(self) -> float:
        """Days elapsed from the first to the last timestamp."""
        return (self.n_time - 1) * self.step_seconds / 86400.0

    @property
    def timestamps(self) -> np.ndarray:
        """datetime64[s] timestamps, start_time + i * step."""
        t0 = np.datetime64(self.start_time.replace(tzinfo=None), "s")
        return t0 + np.arange(self.n_time) * np.timedelta64(self.step_seconds, "s")

    def index_of(self, v: str) -> int:
        try:
            return self.variables.index(v)
        except ValueError:
            raise UnknownVariableError(
                f"unknown variable {v!r}; available: {', '.join(self.variables)}"
            ) from None

    def values(self, v: str) -> np.ndarray:
        """(time, lat, lon) float32 view of one variable."""
        return self.data[:, self.index_of(v)]


def require_finite(r: RolloutSeries, v: str) -> np.ndarray:
    """Return values(v) after rejecting fill values, as detectors must."""
    vals = r.values(v)
    if not np.isfinite(vals).all():
        raise ValueError(
            f"variable {v!r} contains fill/NaN values; detectors require complete fields"
        )
    return vals


class SpatialExtremes(tuple):
    """(min_series, max_series) per-timestep global extremes."""

    __slots__ = ()

    def __new__(cls, min_series, max_series):
        return super().__new__(cls, (min_series, max_series))

    @property
    def min(self):
        return self[0]

    @property
    def max(self):
        return self[1]


def spatial_extremes(r: RolloutSeries, v: str) -> SpatialExtremes:
    """Per-timestep minimum and maximum of variable ``v`` over the globe."""
    vals = r.values(v)
    return SpatialExtremes(vals.min(axis=(1, 2)), vals.max(axis=(1, 2)))


# ---------------------------------------------------------------------------
# daily series helpers


@dataclass(frozen=True)
class DailySeries:
    """A scalar statistic at daily resolution with calendar dates."""

    dates: np.ndarray  # datetime64[D]
    values: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=np.float64)
        if dates.shape != values.shape or dates.ndim != 1:
            raise ValueError("dates and values must be matching 1-D arrays")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.dates.size


def daily_mean(timestamps: np.ndarray, values: np.ndarray) -> DailySeries:
    """Average sub-daily samples into one value per UTC day."""
    days = np.asarray(timestamps, dtype="datetime64[s]").astype("datetime64[D]")
    uniq, inverse = np.unique(days, return_inverse=True)
    sums = np.bincount(inverse, weights=np.asarray(values, dtype=np.float64))
    counts = np.bincount(inverse)
    return DailySeries(uniq, sums / counts)


def day_of_year(dates: np.ndarray) -> np.ndarray:
    """1-based day of year for datetime64 dates."""
    d = np.asarray(dates, dtype="datetime64[D]")
    return (d - d.astype("datetime64[Y]")).astype(int) + 1


def folded_doy(dates: np.ndarray) -> np.ndarray:
    """Day of year in 1..365; Feb 29 folds into the Feb 28 bucket."""
    d = np.asarray(dates, dtype="datetime64[D]")
    doy = day_of_year(d)
    years = d.astype("datetime64[Y]").astype(int) + 1970
    leap = ((years % 4 == 0) & (years % 100 != 0)) | (years % 400 == 0)
    return doy - (leap & (doy >= 60)).astype(int)


# ---------------------------------------------------------------------------
# RGF container


def write_rollout(r: RolloutSeries, path) -> None:
    """Write the series as an RGF1 file. Round-trip is bit-exact on the payload."""
    data = r.data
    if r.fill_value is not None:
        data = np.where(np.isfinite(data), data, np.float32(r.fill_value))
    header = {
        "n_time": int(r.n_time),
        "n_var": len(r.variables),
        "n_lat": int(r.grid.n_lat),
        "n_lon": int(r.grid.n_lon),
        "variables": list(r.variables),
        "lats": [float(x) for x in r.grid.lats],
        "lons": [float(x) for x in r.grid.lons],
        "earth_radius_km": float(r.grid.earth_radius_km),
        "start_time": r.start_time.replace(tzinfo=None).isoformat(),
        "step_seconds": int(r.step_seconds),
        "fill_value": None if r.fill_value is None else float(r.fill_value),
        "attrs": r.attrs,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_rollout(path) -> RolloutSeries:
    """Read an RGF1 file written by :func:`write_rollout`."""
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic bytes, not an RGF1 file")
    if len(raw) < 12:
        raise FormatError(f"{path}: file too short for an RGF1 header")
    (hlen,) = struct.unpack("<Q", raw[4:12])
    if len(raw) < 12 + hlen:
        raise FormatError(f"{path}: declared header extends past end of file")
    try:
        header = json.loads(raw[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: header is not valid UTF-8 JSON: {e}") from None
    try:
        n_time = int(header["n_time"])
        n_var = int(header["n_var"])
        n_lat = int(header["n_lat"])
        n_lon = int(header["n_lon"])
        variables = tuple(header["variables"])
        lats = np.array(header["lats"], dtype=np.float64)
        lons = np.array(header["lons"], dtype=np.float64)
        start_time = datetime.fromisoformat(header["start_time"])
        step_seconds = int(header["step_seconds"])
        fill_value = header.get("fill_value")
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: missing or malformed header field: {e}") from None
    if len(variables) != n_var or lats.size != n_lat or lons.size != n_lon:
        raise HeaderMismatchError(f"{path}: header dims disagree with name/axis arrays")
    expected = n_time * n_var * n_lat * n_lon * 4
    payload = raw[12 + hlen :]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload holds {len(payload)} bytes, header declares {expected}"
        )
    if len(payload) > expected:
        raise HeaderMismatchError(
            f"{path}: payload holds {len(payload)} bytes, header declares only {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(n_time, n_var, n_lat, n_lon).copy()
    if fill_value is not None:
        data[data == np.float32(fill_value)] = np.nan
    grid = GridSpec(lats=lats, lons=lons, earth_radius_km=float(header.get("earth_radius_km", EARTH_RADIUS_KM)))
    return RolloutSeries(
        grid=grid,
        variables=variables,
        start_time=start_time,
        data=data,
        step_seconds=step_seconds,
        fill_value=None if fill_value is None else float(fill_value),
        attrs=header.get("attrs", {}),
    )


# ---------------------------------------------------------------------------
# 1-D series CSV

def read_series_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a (timestamp, value) CSV. Lines starting with '#' are skipped."""
    times, values = [], []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            first, _, rest = line.partition(",")
            if first == "timestamp":
                continue
            times.append(np.datetime64(first, "s"))
            values.append(float(rest.split(",")[0]))
    if not times:
        raise ValueError(f"{path}: no data rows")
    return np.array(times, dtype="datetime64[s]"), np.array(values, dtype=np.float64)


def write_series_csv(path, timestamps, values, comments: list[str] | None = None) -> None:
    with open(path, "w") as f:
        for c in comments or []:
            f.write(f"# {c}\n")
        f.write("timestamp,value\n")
        for t, v in zip(np.asarray(timestamps, dtype="datetime64[s]"), values):
            f.write(f"{t},{float(v)!r}\n")
