"""Geodetic coordinates and the WGS-84 geodetic-to-ECEF conversion.

All positions elsewhere in the package are Earth-centered Earth-fixed
(ECEF) right-handed Cartesian coordinates in meters. Station locations
are usually supplied as geodetic latitude/longitude and converted here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

SPEED_OF_LIGHT_M_PER_S = 299_792_458.0

# WGS-84 ellipsoid
WGS84_SEMI_MAJOR_AXIS_M = 6_378_137.0
WGS84_FLATTENING = 1.0 / 298.257223563


@dataclass(frozen=True)
class GeodeticCoordinate:
    """Geodetic latitude/longitude in degrees, altitude in meters above
    the WGS-84 ellipsoid."""

    latitude_deg: float
    longitude_deg: float
    altitude_m: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ValidationError(
                f"latitude {self.latitude_deg} deg outside [-90, 90]")
        if not -180.0 <= self.longitude_deg <= 180.0:
            raise ValidationError(
                f"longitude {self.longitude_deg} deg outside [-180, 180]")
        if not math.isfinite(self.altitude_m):
            raise ValidationError("altitude must be finite")


def geodetic_to_ecef(coordinate: GeodeticCoordinate) -> np.ndarray:
    """Convert a geodetic coordinate to an ECEF position vector (meters).

    Closed-form conversion on the WGS-84 ellipsoid using the prime
    vertical radius of curvature.
    """
    lat = math.radians(coordinate.latitude_deg)
    lon = math.radians(coordinate.longitude_deg)
    h = coordinate.altitude_m
    e2 = WGS84_FLATTENING * (2.0 - WGS84_FLATTENING)
    n = WGS84_SEMI_MAJOR_AXIS_M / math.sqrt(1.0 - e2 * math.sin(lat) ** 2)
    return np.array([
        (n + h) * math.cos(lat) * math.cos(lon),
        (n + h) * math.cos(lat) * math.sin(lon),
        (n * (1.0 - e2) + h) * math.sin(lat),
    ])
