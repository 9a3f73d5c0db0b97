"""Synthetic orbit propagation, visibility and forecast-horizon scheduling.

Orbits are circular Keplerian ellipses rotated into an Earth-fixed frame by
the sidereal rotation rate; positions are exact functions of time, so the
forecast-horizon link schedule is available to arbitrary lead times. Real
orbit replay is supported through tabulated Earth-fixed positions with
linear interpolation (``TabulatedEphemeris``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geo import (
    EARTH_RADIUS_KM,
    SHELL_HEIGHT_KM,
    GeoPoint,
    MagneticPole,
    DEFAULT_POLE,
    dipole_mag_coords,
    ipp_from_los,
    local_solar_time_h,
)

MU_EARTH_KM3_S2 = 398600.4418
SIDEREAL_ROT_RAD_S = 7.2921150e-5

DEFAULT_ELEVATION_MASK_DEG = 30.0
FORECAST_STEP_S = 300
FORECAST_HORIZON_STEPS = 24


@dataclass(frozen=True)
class OrbitElements:
    """Circular-orbit elements; the period follows from the semi-major axis."""

    semi_major_axis_km: float
    inclination_deg: float
    raan_deg: float
    arg_lat_at_epoch_deg: float
    constellation_tag: str
    satellite_id: str

    def __post_init__(self):
        if self.semi_major_axis_km <= EARTH_RADIUS_KM:
            raise ValueError("semi-major axis must exceed the Earth radius")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ValueError("inclination must lie in [0, 180]")

    @property
    def period_s(self) -> float:
        return 2.0 * math.pi * math.sqrt(self.semi_major_axis_km ** 3 / MU_EARTH_KM3_S2)

    @property
    def mean_motion_rad_s(self) -> float:
        return math.sqrt(MU_EARTH_KM3_S2 / self.semi_major_axis_km ** 3)


@dataclass(frozen=True)
class Station:
    station_id: str
    location: GeoPoint
    height_km: float = 0.0

    def ecef_km(self) -> np.ndarray:
        r = EARTH_RADIUS_KM + self.height_km
        lat = math.radians(self.location.lat_deg)
        lon = math.radians(self.location.lon_deg)
        return np.array(
            [r * math.cos(lat) * math.cos(lon), r * math.cos(lat) * math.sin(lon), r * math.sin(lat)]
        )


@dataclass(frozen=True)
class LosLink:
    """One visible satellite-receiver line of sight with its derived geometry."""

    station_id: str
    satellite_id: str
    constellation_tag: str
    elevation_deg: float
    azimuth_deg: float
    ipp: GeoPoint
    mag_lat_deg: float
    mag_lon_deg: float
    local_solar_time_h: float


def propagate(e: OrbitElements, epoch_s: int | float) -> np.ndarray:
    """Earth-fixed position (km) of a circular orbit at the given epoch."""
    return propagate_many([e], np.asarray([epoch_s], dtype=float))[0, 0]


def propagate_many(orbits: Sequence[OrbitElements], epochs_s: np.ndarray) -> np.ndarray:
    """Vectorized propagation: returns positions [n_epochs, n_orbits, 3] in km."""
    t = np.asarray(epochs_s, dtype=float)[:, None]
    a = np.array([o.semi_major_axis_km for o in orbits])
    inc = np.radians([o.inclination_deg for o in orbits])
    raan = np.radians([o.raan_deg for o in orbits])
    u0 = np.radians([o.arg_lat_at_epoch_deg for o in orbits])
    n = np.sqrt(MU_EARTH_KM3_S2 / a ** 3)

    u = u0 + n * t  # argument of latitude, [n_t, n_orb]
    cu, su = np.cos(u), np.sin(u)
    ci, si = np.cos(inc), np.sin(inc)
    co, so = np.cos(raan), np.sin(raan)
    # in-plane position rotated by Rz(raan) @ Rx(inc)
    xi = a * (cu * co - su * ci * so)
    yi = a * (cu * so + su * ci * co)
    zi = a * su * si
    # inertial -> Earth-fixed: rotate by -theta about z
    theta = SIDEREAL_ROT_RAD_S * t
    ct, st = np.cos(theta), np.sin(theta)
    x = ct * xi + st * yi
    y = -st * xi + ct * yi
    return np.stack([x, y, np.broadcast_to(zi, x.shape)], axis=-1)


def elevation_azimuth_deg(station: Station, sat_ecef_km: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Elevation/azimuth (deg) of satellite positions [..., 3] seen from a station."""
    rec = station.ecef_km()
    up = rec / np.linalg.norm(rec)
    east = np.cross([0.0, 0.0, 1.0], up)
    east = east / np.linalg.norm(east)
    north = np.cross(up, east)
    rho = np.asarray(sat_ecef_km, dtype=float) - rec
    rho = rho / np.linalg.norm(rho, axis=-1, keepdims=True)
    el = np.degrees(np.arcsin(np.clip(rho @ up, -1.0, 1.0)))
    az = np.degrees(np.arctan2(rho @ east, rho @ north)) % 360.0
    return el, az


def _make_link(
    station: Station,
    sat_id: str,
    tag: str,
    el: float,
    az: float,
    epoch_s: int | float,
    shell_height_km: float,
    pole: MagneticPole,
) -> LosLink:
    ipp, _ = ipp_from_los(station.location, az, el, shell_height_km, station.height_km)
    mlat, mlon = dipole_mag_coords(ipp, pole)
    return LosLink(
        station_id=station.station_id,
        satellite_id=sat_id,
        constellation_tag=tag,
        elevation_deg=el,
        azimuth_deg=az,
        ipp=ipp,
        mag_lat_deg=mlat,
        mag_lon_deg=mlon,
        local_solar_time_h=local_solar_time_h(ipp.lon_deg, epoch_s),
    )


def visible_links(
    stations: Sequence[Station],
    orbits: Sequence[OrbitElements] | "TabulatedEphemeris",
    epoch_s: int | float,
    elevation_mask_deg: float = DEFAULT_ELEVATION_MASK_DEG,
    shell_height_km: float = SHELL_HEIGHT_KM,
    pole: MagneticPole = DEFAULT_POLE,
) -> list[LosLink]:
    """All station-satellite links above the elevation mask at one epoch.

    Output order is deterministic: stations in the given order, satellites in
    the given (or tabulated, sorted) order.
    """
    if not stations:
        raise ValueError("station list must be non-empty")
    if isinstance(orbits, TabulatedEphemeris):
        ids_tags_pos = orbits.positions_at(epoch_s)
    else:
        pos = propagate_many(orbits, np.asarray([epoch_s], dtype=float))[0]
        ids_tags_pos = [(o.satellite_id, o.constellation_tag, pos[i]) for i, o in enumerate(orbits)]
    links: list[LosLink] = []
    for st in stations:
        if not ids_tags_pos:
            continue
        xyz = np.stack([p for _, _, p in ids_tags_pos])
        el, az = elevation_azimuth_deg(st, xyz)
        for (sat_id, tag, _), e, a in zip(ids_tags_pos, el, az):
            if e >= elevation_mask_deg:
                links.append(_make_link(st, sat_id, tag, float(e), float(a), epoch_s, shell_height_km, pole))
    return links


def forecast_schedule(
    stations: Sequence[Station],
    orbits: Sequence[OrbitElements] | "TabulatedEphemeris",
    epoch_s: int,
    horizon_steps: int = FORECAST_HORIZON_STEPS,
    step_s: int = FORECAST_STEP_S,
    elevation_mask_deg: float = DEFAULT_ELEVATION_MASK_DEG,
    shell_height_km: float = SHELL_HEIGHT_KM,
    pole: MagneticPole = DEFAULT_POLE,
) -> list[list[LosLink]]:
    """Per-step link sets for epochs t+1 .. t+horizon, all from ephemeris alone."""
    return [
        visible_links(stations, orbits, epoch_s + k * step_s, elevation_mask_deg, shell_height_km, pole)
        for k in range(1, horizon_steps + 1)
    ]


@dataclass
class TabulatedEphemeris:
    """Earth-fixed satellite positions tabulated over time, linearly interpolated.

    File format: CSV with header ``t_s,sat_id,x_km,y_km,z_km``; rows strictly
    increasing in ``t_s`` per satellite. Constellation tags are taken from the
    leading letter of the satellite id.
    """

    tables: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    @classmethod
    def from_csv(cls, path) -> "TabulatedEphemeris":
        import pandas as pd

        df = pd.read_csv(path)
        expected = ["t_s", "sat_id", "x_km", "y_km", "z_km"]
        if list(df.columns) != expected:
            raise ValueError(f"tabulated orbit file must have columns {expected}")
        tables = {}
        for sat_id, grp in df.groupby("sat_id", sort=True):
            t = grp["t_s"].to_numpy(dtype=float)
            if not np.all(np.diff(t) > 0):
                raise ValueError(f"t_s must be strictly increasing for satellite {sat_id}")
            tables[str(sat_id)] = (t, grp[["x_km", "y_km", "z_km"]].to_numpy(dtype=float))
        return cls(tables)

    def positions_at(self, epoch_s: int | float) -> list[tuple[str, str, np.ndarray]]:
        out = []
        for sat_id in sorted(self.tables):
            t, xyz = self.tables[sat_id]
            if epoch_s < t[0] or epoch_s > t[-1]:
                continue
            i = int(np.searchsorted(t, epoch_s, side="right") - 1)
            i = min(i, len(t) - 2) if len(t) > 1 else 0
            if len(t) == 1:
                p = xyz[0]
            else:
                w = (epoch_s - t[i]) / (t[i + 1] - t[i])
                p = (1.0 - w) * xyz[i] + w * xyz[i + 1]
            out.append((sat_id, sat_id[:1], p))
        return out


def geosynchronous_axis_km() -> float:
    """Semi-major axis whose mean motion equals the sidereal rotation rate."""
    return (MU_EARTH_KM3_S2 / SIDEREAL_ROT_RAD_S ** 2) ** (1.0 / 3.0)
