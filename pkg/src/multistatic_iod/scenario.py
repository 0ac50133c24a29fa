"""Scenario model: radar network, target truth state, noise description.

A scenario JSON file has sections ``network``, ``target``, ``noise`` and
optionally ``experiment``. Station entries carry either geodetic
coordinates (``lat_deg``/``lon_deg``, optional ``alt_m``) or a tagged
ECEF triple (``ecef``); transmitters additionally carry ``fc_hz``.
``write_scenario`` always emits the tagged ECEF form so numeric fields
round-trip bit-for-bit through load/write cycles.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .geodesy import GeodeticCoordinate, geodetic_to_ecef

DEFAULT_SIGMA_GRID = (1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
DEFAULT_SEED = 1729
ESTIMATOR_NAMES = ("wls", "tri")


def _as_position(value, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} must be 3 finite numbers")
    return arr


@dataclass(frozen=True)
class Transmitter:
    """Illuminator site: ECEF position plus carrier frequency."""

    position_m: np.ndarray
    carrier_hz: float

    def __post_init__(self):
        object.__setattr__(self, "position_m",
                           _as_position(self.position_m, "transmitter position"))
        if not (math.isfinite(self.carrier_hz) and self.carrier_hz > 0):
            raise ValidationError("carrier frequency must be positive")


@dataclass(frozen=True)
class RadarNetwork:
    """Simultaneously observing transmitters and receivers.

    Every transmitter-receiver pair contributes one delay and one
    Doppler measurement, so M transmitters and N receivers yield 2MN
    scalar measurements against 6+2M unknowns in the first estimation
    stage.
    """

    transmitters: tuple[Transmitter, ...]
    receivers_m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "transmitters", tuple(self.transmitters))
        rx = np.atleast_2d(np.asarray(self.receivers_m, dtype=float))
        if rx.ndim != 2 or rx.shape[1] != 3 or not np.all(np.isfinite(rx)):
            raise ValidationError("receivers must be an (N, 3) array of finite numbers")
        object.__setattr__(self, "receivers_m", rx)
        m, n = self.m, self.n
        if m < 1 or n < 1 or 2 * m * n < 6 + 2 * m:
            raise ValidationError(
                f"network too small: {m} transmitters x {n} receivers gives "
                f"{2 * m * n} measurements for {6 + 2 * m} unknowns")

    @property
    def m(self) -> int:
        return len(self.transmitters)

    @property
    def n(self) -> int:
        return self.receivers_m.shape[0]

    @property
    def transmitter_positions_m(self) -> np.ndarray:
        return np.array([t.position_m for t in self.transmitters])

    @property
    def carriers_hz(self) -> np.ndarray:
        return np.array([t.carrier_hz for t in self.transmitters])


@dataclass(frozen=True)
class StateVector:
    """Target position (m) and velocity (m/s) in ECEF."""

    position_m: np.ndarray
    velocity_mps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position_m",
                           _as_position(self.position_m, "position"))
        object.__setattr__(self, "velocity_mps",
                           _as_position(self.velocity_mps, "velocity"))

    def as_vector(self) -> np.ndarray:
        """Stacked (6,) vector: position then velocity."""
        return np.concatenate([self.position_m, self.velocity_mps])


@dataclass(frozen=True)
class NoiseModel:
    """Measurement noise description.

    Delay noise is zero-mean Gaussian with standard deviation
    ``sigma_t_s`` seconds; Doppler noise has variance
    ``doppler_variance_scale`` times the delay variance (in Hz^2 per
    s^2), i.e. standard deviation sqrt(scale)*sigma_t Hz.
    """

    sigma_t_s: float = 1e-9
    doppler_variance_scale: float = 1e11
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not (math.isfinite(self.sigma_t_s) and self.sigma_t_s >= 0):
            raise ValidationError("sigma_t must be finite and >= 0")
        if not (math.isfinite(self.doppler_variance_scale)
                and self.doppler_variance_scale > 0):
            raise ValidationError("doppler variance scale must be positive")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise ValidationError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class ExperimentSpec:
    """Monte Carlo experiment configuration."""

    sigma_grid: tuple[float, ...] = DEFAULT_SIGMA_GRID
    runs: int = 1000
    estimators: tuple[str, ...] = ESTIMATOR_NAMES
    confidence: float = 0.95
    output_dir: str = "."

    def __post_init__(self):
        grid = tuple(float(s) for s in self.sigma_grid)
        if not grid or any(s <= 0 for s in grid) or list(grid) != sorted(grid):
            raise ValidationError("sigma grid must be positive and sorted ascending")
        object.__setattr__(self, "sigma_grid", grid)
        if self.runs < 1:
            raise ValidationError("runs must be >= 1")
        names = tuple(_normalize_estimator(e) for e in self.estimators)
        if not names or len(set(names)) != len(names):
            raise ValidationError("estimators must be a nonempty unique subset of wls, tri")
        object.__setattr__(self, "estimators", names)
        if not 0.0 < self.confidence < 1.0:
            raise ValidationError("confidence must be in (0, 1)")


def _normalize_estimator(name: str) -> str:
    alias = {"wls": "wls", "tri": "tri", "trilateration": "tri"}
    try:
        return alias[str(name).strip().lower()]
    except KeyError:
        raise ValidationError(f"unknown estimator {name!r}; expected wls or tri") from None


class Scenario(NamedTuple):
    """Bundle returned by ``load_scenario``: network, truth, noise."""

    network: RadarNetwork
    target: StateVector
    noise: NoiseModel


def _station_position(entry: dict, what: str) -> np.ndarray:
    if "ecef" in entry:
        if "lat_deg" in entry or "lon_deg" in entry:
            raise ValidationError(f"{what}: give either ecef or lat/lon, not both")
        return _as_position(entry["ecef"], f"{what} ecef")
    try:
        coord = GeodeticCoordinate(
            latitude_deg=float(entry["lat_deg"]),
            longitude_deg=float(entry["lon_deg"]),
            altitude_m=float(entry.get("alt_m", 0.0)),
        )
    except KeyError as missing:
        raise ValidationError(f"{what}: missing key {missing}") from None
    return geodetic_to_ecef(coord)


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("scenario file must contain a JSON object")
    return doc


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a validated Scenario from a parsed JSON document."""
    try:
        net = doc["network"]
        tx_entries = net["transmitters"]
        rx_entries = net["receivers"]
        target = doc["target"]
        noise_doc = doc.get("noise", {})
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"scenario missing required section: {exc}") from None

    transmitters = []
    for k, entry in enumerate(tx_entries):
        if "fc_hz" not in entry:
            raise ValidationError(f"transmitter {k + 1}: missing fc_hz")
        transmitters.append(Transmitter(
            position_m=_station_position(entry, f"transmitter {k + 1}"),
            carrier_hz=float(entry["fc_hz"]),
        ))
    receivers = [
        _station_position(entry, f"receiver {k + 1}")
        for k, entry in enumerate(rx_entries)
    ]
    if not receivers:
        raise ValidationError("network too small: no receivers")
    network = RadarNetwork(tuple(transmitters), np.array(receivers))

    state = StateVector(
        position_m=_as_position(target.get("position_m"), "target position"),
        velocity_mps=_as_position(target.get("velocity_mps"), "target velocity"),
    )
    noise = NoiseModel(
        sigma_t_s=float(noise_doc.get("sigma_t_s", 1e-9)),
        doppler_variance_scale=float(noise_doc.get("doppler_scale", 1e11)),
        seed=int(noise_doc.get("seed", DEFAULT_SEED)),
    )
    return Scenario(network, state, noise)


def load_scenario(path: str) -> Scenario:
    """Load and validate a scenario file; raises ValidationError on any
    structural or numeric problem."""
    return scenario_from_dict(_load_json(path))


def load_experiment_spec(path: str, **overrides) -> ExperimentSpec:
    """Read the optional ``experiment`` section of a scenario file,
    applying keyword overrides on top (override > file > default)."""
    doc = _load_json(path).get("experiment", {})
    return experiment_from_dict(doc, **overrides)


def experiment_from_dict(doc: dict, **overrides) -> ExperimentSpec:
    merged = {}
    if "sigma_grid" in doc:
        merged["sigma_grid"] = tuple(float(s) for s in doc["sigma_grid"])
    if "runs" in doc:
        merged["runs"] = int(doc["runs"])
    if "estimators" in doc:
        merged["estimators"] = tuple(doc["estimators"])
    if "confidence" in doc:
        merged["confidence"] = float(doc["confidence"])
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentSpec(**merged)


def scenario_to_dict(scenario: Scenario,
                     experiment: ExperimentSpec | None = None) -> dict:
    net = scenario.network
    doc = {
        "network": {
            "transmitters": [
                {"ecef": [float(v) for v in t.position_m],
                 "fc_hz": float(t.carrier_hz)}
                for t in net.transmitters
            ],
            "receivers": [
                {"ecef": [float(v) for v in row]} for row in net.receivers_m
            ],
        },
        "target": {
            "position_m": [float(v) for v in scenario.target.position_m],
            "velocity_mps": [float(v) for v in scenario.target.velocity_mps],
        },
        "noise": {
            "sigma_t_s": scenario.noise.sigma_t_s,
            "doppler_scale": scenario.noise.doppler_variance_scale,
            "seed": scenario.noise.seed,
        },
    }
    if experiment is not None:
        doc["experiment"] = {
            "sigma_grid": list(experiment.sigma_grid),
            "runs": experiment.runs,
            "estimators": list(experiment.estimators),
            "confidence": experiment.confidence,
        }
    return doc


def write_scenario(path: str, scenario: Scenario,
                   experiment: ExperimentSpec | None = None) -> None:
    """Write a scenario (and optional experiment section) as JSON.

    Python's JSON encoder emits the shortest decimal that parses back to
    the identical double, so a write/load cycle is numerically lossless.
    """
    doc = scenario_to_dict(scenario, experiment)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


# Bundled demonstration scenario: three L-band transmitters and five
# receivers in western Europe, and a low target directly above the
# network. The target state is a frozen constant so results are
# reproducible to the bit.
_BUILTIN_STATIONS = (
    # (lat_deg, lon_deg, carrier_hz or None)
    (37.182, -5.605, 1215e6),
    (44.335, 7.638, 1280e6),
    (51.616, 7.129, 1330e6),
    (40.000, -3.600, None),
    (42.000, 2.300, None),
    (46.000, 4.300, None),
    (49.300, -1.300, None),
    (42.000, 6.300, None),
)
_BUILTIN_TARGET_POSITION_M = (4362379.104414236, 465878.83013408317, 4901428.8809492)
_BUILTIN_TARGET_VELOCITY_MPS = (-2601.4569324477898, -7135.70949987181, 4665.980697)


def builtin_scenario(sigma_t_s: float = 1e-9,
                     seed: int = DEFAULT_SEED) -> Scenario:
    """The bundled demonstration scenario (M=3, N=5, LEO target)."""
    transmitters = []
    receivers = []
    for lat, lon, fc in _BUILTIN_STATIONS:
        pos = geodetic_to_ecef(GeodeticCoordinate(lat, lon))
        if fc is None:
            receivers.append(pos)
        else:
            transmitters.append(Transmitter(pos, fc))
    return Scenario(
        network=RadarNetwork(tuple(transmitters), np.array(receivers)),
        target=StateVector(np.array(_BUILTIN_TARGET_POSITION_M),
                           np.array(_BUILTIN_TARGET_VELOCITY_MPS)),
        noise=NoiseModel(sigma_t_s=sigma_t_s, seed=seed),
    )
