"""Shared fixtures: the built-in scenario and a randomized LEO
scenario factory used by property and acceptance tests."""

import numpy as np
import pytest

from multistatic_iod.geodesy import GeodeticCoordinate, geodetic_to_ecef
from multistatic_iod.scenario import (NoiseModel, RadarNetwork, Scenario,
                                      StateVector, Transmitter,
                                      builtin_scenario)


@pytest.fixture(scope="session")
def canonical() -> Scenario:
    return builtin_scenario()


def random_leo_scenario(rng: np.random.Generator,
                        sigma_t_s: float = 0.0) -> Scenario:
    """A randomized, non-degenerate regional network with a low-orbit
    target overhead.

    Three transmitters and five receivers scatter over a patch of the
    globe a few degrees wide; the target flies 300-1200 km above the
    patch center at orbital speed, mostly horizontally. Geometries
    drawn this way keep the target above every station's horizon, which
    is the regime the estimator is designed for.
    """
    lat0 = rng.uniform(-55.0, 55.0)
    lon0 = rng.uniform(-180.0, 180.0)

    def station(spread_deg: float) -> np.ndarray:
        lat = np.clip(lat0 + rng.uniform(-spread_deg, spread_deg), -89.0, 89.0)
        lon = (lon0 + rng.uniform(-spread_deg, spread_deg) + 180.0) % 360.0 - 180.0
        return geodetic_to_ecef(GeodeticCoordinate(lat, lon))

    transmitters = tuple(
        Transmitter(position_m=station(4.0), carrier_hz=rng.uniform(1.1e9, 1.5e9))
        for _ in range(3))
    receivers = np.array([station(5.0) for _ in range(5)])
    network = RadarNetwork(transmitters, receivers)

    tlat = np.clip(lat0 + rng.uniform(-1.5, 1.5), -89.0, 89.0)
    tlon = (lon0 + rng.uniform(-1.5, 1.5) + 180.0) % 360.0 - 180.0
    altitude = rng.uniform(300e3, 1200e3)
    position = geodetic_to_ecef(GeodeticCoordinate(tlat, tlon, altitude))
    radial = position / np.linalg.norm(position)
    tangent = np.cross(radial, rng.standard_normal(3))
    tangent = tangent / np.linalg.norm(tangent)
    velocity = (rng.uniform(6500.0, 8000.0) * tangent +
                rng.uniform(-500.0, 500.0) * radial)
    truth = StateVector(position_m=position, velocity_mps=velocity)
    return Scenario(network, truth,
                    NoiseModel(sigma_t_s=sigma_t_s, seed=int(rng.integers(2 ** 63))))
