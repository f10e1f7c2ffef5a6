"""Local tangent-plane conversions between geodetic and ENU coordinates.

A flat east-north-up frame anchored at the launch point is accurate to well
under a meter over the <=50 km extents simulated here.  A spherical earth is
used in both directions so the conversions round-trip consistently.
"""

from __future__ import annotations

import math

EARTH_RADIUS = 6_371_000.0  # m


def enu_to_geodetic(anchor: tuple[float, float, float], east: float, north: float, up: float):
    """ENU offsets (m) from `anchor` (lon, lat, alt degrees/m) to (lon, lat, alt)."""
    lon0, lat0, alt0 = anchor
    meters_per_deg = EARTH_RADIUS * math.pi / 180.0
    lat = lat0 + north / meters_per_deg
    lon = lon0 + east / (meters_per_deg * math.cos(math.radians(lat0)))
    return lon, lat, alt0 + up


def geodetic_to_enu(anchor: tuple[float, float, float], lon: float, lat: float, alt: float):
    """(lon, lat, alt) to ENU offsets (m) from `anchor`."""
    lon0, lat0, alt0 = anchor
    meters_per_deg = EARTH_RADIUS * math.pi / 180.0
    east = (lon - lon0) * meters_per_deg * math.cos(math.radians(lat0))
    north = (lat - lat0) * meters_per_deg
    return east, north, alt - alt0
