"""Spherical geometry, time encodings and coordinate transforms.

All public interfaces take and return degrees; radians are used internally.
The Earth is treated as a sphere of radius ``EARTH_RADIUS_KM`` and the
ionospheric thin shell sits ``SHELL_HEIGHT_KM`` above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0
SHELL_HEIGHT_KM = 450.0

# Centered-dipole north pole for a recent geomagnetic epoch (IGRF-13, 2020.0).
# Used as a stand-in for quasi-dipole magnetic coordinates.
DEFAULT_POLE_LAT_DEG = 80.65
DEFAULT_POLE_LON_DEG = -72.68


def norm_lon_deg(lon_deg: float) -> float:
    """Normalize a longitude to [-180, 180)."""
    lon = math.fmod(lon_deg + 180.0, 360.0)
    if lon < 0:
        lon += 360.0
    return lon - 180.0


@dataclass(frozen=True)
class GeoPoint:
    """Geodetic latitude/longitude pair in degrees, lon normalized to [-180, 180)."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat_deg}")
        object.__setattr__(self, "lon_deg", norm_lon_deg(self.lon_deg))


@dataclass(frozen=True)
class MagneticPole:
    """Centered-dipole north pole location."""

    lat_deg: float = DEFAULT_POLE_LAT_DEG
    lon_deg: float = DEFAULT_POLE_LON_DEG


DEFAULT_POLE = MagneticPole()


def haversine_km(a: GeoPoint, b: GeoPoint, radius_km: float = EARTH_RADIUS_KM) -> float:
    """Great-circle distance between two points on a sphere of the given radius."""
    if radius_km <= 0:
        raise ValueError("radius_km must be positive")
    la, lb = math.radians(a.lat_deg), math.radians(b.lat_deg)
    dlat = lb - la
    dlon = math.radians(b.lon_deg - a.lon_deg)
    s = math.sin(dlat / 2.0) ** 2 + math.cos(la) * math.cos(lb) * math.sin(dlon / 2.0) ** 2
    return 2.0 * radius_km * math.asin(min(1.0, math.sqrt(s)))


def ipp_from_los(
    receiver: GeoPoint,
    azimuth_deg: float,
    elevation_deg: float,
    shell_height_km: float = SHELL_HEIGHT_KM,
    receiver_height_km: float = 0.0,
) -> tuple[GeoPoint, float]:
    """Ionospheric pierce point of a line of sight on the thin shell.

    Returns the pierce point and the (passed-through) elevation angle. The
    Earth-centered angle between receiver and pierce point is

        psi = pi/2 - el - asin(R cos(el) / R_shell)

    with R the receiver radius and R_shell the shell radius.
    """
    if elevation_deg <= 0.0:
        raise ValueError(f"elevation below horizon: {elevation_deg}")
    el = math.radians(elevation_deg)
    az = math.radians(azimuth_deg)
    r_rec = EARTH_RADIUS_KM + receiver_height_km
    r_shell = EARTH_RADIUS_KM + shell_height_km
    psi = math.pi / 2.0 - el - math.asin(r_rec * math.cos(el) / r_shell)
    lat1 = math.radians(receiver.lat_deg)
    lat2 = math.asin(
        math.sin(lat1) * math.cos(psi) + math.cos(lat1) * math.sin(psi) * math.cos(az)
    )
    dlon = math.atan2(
        math.sin(az) * math.sin(psi) * math.cos(lat1),
        math.cos(psi) - math.sin(lat1) * math.sin(lat2),
    )
    return GeoPoint(math.degrees(lat2), receiver.lon_deg + math.degrees(dlon)), elevation_deg


def ipp_arrays(
    rec_lat_deg: float,
    rec_lon_deg: float,
    azimuth_deg,
    elevation_deg,
    shell_height_km: float = SHELL_HEIGHT_KM,
    receiver_height_km: float = 0.0,
):
    """Vectorized :func:`ipp_from_los` for one receiver and many lines of sight.

    Returns (lat_deg, lon_deg) arrays; longitudes normalized to [-180, 180).
    """
    el = np.radians(np.asarray(elevation_deg, dtype=float))
    az = np.radians(np.asarray(azimuth_deg, dtype=float))
    r_rec = EARTH_RADIUS_KM + receiver_height_km
    r_shell = EARTH_RADIUS_KM + shell_height_km
    psi = np.pi / 2.0 - el - np.arcsin(r_rec * np.cos(el) / r_shell)
    lat1 = math.radians(rec_lat_deg)
    lat2 = np.arcsin(np.sin(lat1) * np.cos(psi) + np.cos(lat1) * np.sin(psi) * np.cos(az))
    dlon = np.arctan2(
        np.sin(az) * np.sin(psi) * np.cos(lat1),
        np.cos(psi) - np.sin(lat1) * np.sin(lat2),
    )
    lon = np.degrees(dlon) + rec_lon_deg
    lon = np.mod(lon + 180.0, 360.0) - 180.0
    return np.degrees(lat2), lon


def central_angle_deg(lat1_deg, lon1_deg, lat2_deg, lon2_deg):
    """Vectorized central angle (degrees) between points on the sphere."""
    la = np.radians(np.asarray(lat1_deg, dtype=float))
    lb = np.radians(np.asarray(lat2_deg, dtype=float))
    dlat = lb - la
    dlon = np.radians(np.asarray(lon2_deg, dtype=float) - np.asarray(lon1_deg, dtype=float))
    s = np.sin(dlat / 2.0) ** 2 + np.cos(la) * np.cos(lb) * np.sin(dlon / 2.0) ** 2
    return np.degrees(2.0 * np.arcsin(np.minimum(1.0, np.sqrt(s))))


def local_solar_time_h(lon_deg: float, epoch_s: int | float) -> float:
    """Local solar time in hours [0, 24) from UTC seconds-of-reference and longitude."""
    utc_h = (epoch_s % 86400) / 3600.0
    return (utc_h + lon_deg / 15.0) % 24.0


def lst_angular_sep_deg(lst_a_h: float, lst_b_h: float) -> float:
    """Angular separation of two local solar times, in degrees [0, 180]."""
    d = abs(lst_a_h - lst_b_h) % 24.0
    return min(d, 24.0 - d) * 15.0


def cyc_encode(value: float, period: float) -> tuple[float, float]:
    """Cyclical (sin, cos) encoding of a value with the given period."""
    if period <= 0:
        raise ValueError("period must be positive")
    ang = 2.0 * math.pi * value / period
    return math.sin(ang), math.cos(ang)


def _rotation_to_pole(pole: MagneticPole):
    """Rows of the rotation matrix taking geographic ECEF axes to dipole axes.

    Equivalent to Ry(colatitude) @ Rz(pole longitude): the dipole z-axis
    points at the pole and magnetic longitude is measured in the rotated
    equatorial plane.
    """
    lat0 = math.radians(pole.lat_deg)
    lon0 = math.radians(pole.lon_deg)
    sa, ca = math.sin(lat0), math.cos(lat0)
    sl, cl = math.sin(lon0), math.cos(lon0)
    x_row = (sa * cl, sa * sl, -ca)
    y_row = (-sl, cl, 0.0)
    z_row = (ca * cl, ca * sl, sa)
    return x_row, y_row, z_row


def dipole_mag_coords(p: GeoPoint, pole: MagneticPole = DEFAULT_POLE) -> tuple[float, float]:
    """Magnetic latitude/longitude of a point in the centered-dipole frame."""
    xr, yr, zr = _rotation_to_pole(pole)
    lat = math.radians(p.lat_deg)
    lon = math.radians(p.lon_deg)
    v = (math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat))
    x = xr[0] * v[0] + xr[1] * v[1] + xr[2] * v[2]
    y = yr[0] * v[0] + yr[1] * v[1] + yr[2] * v[2]
    z = zr[0] * v[0] + zr[1] * v[1] + zr[2] * v[2]
    mag_lat = math.degrees(math.asin(max(-1.0, min(1.0, z))))
    mag_lon = math.degrees(math.atan2(y, x))
    return mag_lat, mag_lon


def dipole_geo_coords(mag_lat_deg: float, mag_lon_deg: float, pole: MagneticPole = DEFAULT_POLE) -> GeoPoint:
    """Inverse of :func:`dipole_mag_coords` (dipole frame back to geographic)."""
    xr, yr, zr = _rotation_to_pole(pole)
    lat = math.radians(mag_lat_deg)
    lon = math.radians(mag_lon_deg)
    m = (math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat))
    # transpose of the orthonormal rotation
    v0 = xr[0] * m[0] + yr[0] * m[1] + zr[0] * m[2]
    v1 = xr[1] * m[0] + yr[1] * m[1] + zr[1] * m[2]
    v2 = xr[2] * m[0] + yr[2] * m[1] + zr[2] * m[2]
    glat = math.degrees(math.asin(max(-1.0, min(1.0, v2))))
    glon = math.degrees(math.atan2(v1, v0))
    return GeoPoint(glat, glon)
