"""Bistatic delay/Doppler forward model and measurement simulation.

Measurement ordering is fixed throughout the package: the pair
(transmitter i, receiver j), both 1-based, occupies flat index
(i-1)*N + j - 1. Delay vectors come first, Doppler vectors second,
whenever the two are stacked.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geodesy import SPEED_OF_LIGHT_M_PER_S as C
from .scenario import NoiseModel, RadarNetwork, StateVector

# RNG substream tags: one independent stream per (run, purpose).
STREAM_MEASUREMENT = 0
STREAM_RANGES = 1


def substream(seed: int, run_index: int, stream: int) -> np.random.Generator:
    """Counter-keyed generator: independent, reproducible draws for every
    (seed, run_index, stream) triple regardless of scheduling order."""
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(run_index, stream)))


def true_delay(position_m, transmitter_m, receiver_m) -> float:
    """Bistatic propagation delay in seconds: transmitter -> target ->
    receiver path length over the speed of light."""
    x = np.asarray(position_m, dtype=float)
    return (np.linalg.norm(x - transmitter_m)
            + np.linalg.norm(x - receiver_m)) / C


def true_doppler(position_m, velocity_mps, transmitter_m, receiver_m,
                 carrier_hz) -> float:
    """Bistatic Doppler shift in Hz: carrier-scaled sum of the range
    rates along both legs of the path."""
    x = np.asarray(position_m, dtype=float)
    v = np.asarray(velocity_mps, dtype=float)
    dt = x - transmitter_m
    ds = x - receiver_m
    rate = dt @ v / np.linalg.norm(dt) + ds @ v / np.linalg.norm(ds)
    return carrier_hz / C * rate


def forward_model(network: RadarNetwork,
                  state: StateVector) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free delay and Doppler vectors, each of length M*N in the
    canonical pair ordering."""
    tx = network.transmitter_positions_m
    rx = network.receivers_m
    fc = network.carriers_hz
    x = state.position_m
    v = state.velocity_mps
    dt = x - tx                             # (M, 3)
    ds = x - rx                             # (N, 3)
    nt = np.linalg.norm(dt, axis=1)
    ns = np.linalg.norm(ds, axis=1)
    if np.any(nt == 0) or np.any(ns == 0):
        raise ValidationError("target coincides with a station")
    tau = (nt[:, None] + ns[None, :]) / C
    rate = (dt @ v / nt)[:, None] + (ds @ v / ns)[None, :]
    dop = fc[:, None] / C * rate
    return tau.ravel(), dop.ravel()


@dataclass(frozen=True)
class MeasurementSet:
    """One simultaneous snapshot of all M*N delay and Doppler pairs.

    ``q_alpha_diag`` is the diagonal of the measurement covariance for
    the stacked vector (delays then Dopplers): sigma_t^2 for each delay,
    scale*sigma_t^2 for each Doppler. ``doppler_variance_scale`` keeps
    that scale explicitly so exact (zero-noise) sets still know the
    relative delay/Doppler weighting.
    """

    m: int
    n: int
    tau_s: np.ndarray
    doppler_hz: np.ndarray
    q_alpha_diag: np.ndarray
    doppler_variance_scale: float = 1e11

    def __post_init__(self):
        mn = self.m * self.n
        tau = np.asarray(self.tau_s, dtype=float)
        dop = np.asarray(self.doppler_hz, dtype=float)
        q = np.asarray(self.q_alpha_diag, dtype=float)
        if tau.shape != (mn,) or dop.shape != (mn,):
            raise ValidationError(
                f"expected {mn} delay and Doppler values for M={self.m}, N={self.n}")
        if np.any(tau <= 0) or not np.all(np.isfinite(tau)):
            raise ValidationError("delays must be positive and finite")
        if not np.all(np.isfinite(dop)):
            raise ValidationError("Doppler values must be finite")
        if q.shape != (2 * mn,) or np.any(q < 0):
            raise ValidationError("covariance diagonal must be 2*M*N nonnegative values")
        if not self.doppler_variance_scale > 0:
            raise ValidationError("doppler variance scale must be positive")
        object.__setattr__(self, "tau_s", tau)
        object.__setattr__(self, "doppler_hz", dop)
        object.__setattr__(self, "q_alpha_diag", q)


def covariance_diagonal(noise: NoiseModel, mn: int) -> np.ndarray:
    var = noise.sigma_t_s ** 2
    return np.concatenate([
        np.full(mn, var),
        np.full(mn, noise.doppler_variance_scale * var),
    ])


def measurement_set(network: RadarNetwork, tau_s, doppler_hz,
                    noise: NoiseModel) -> MeasurementSet:
    """Assemble a MeasurementSet from raw vectors plus the noise model."""
    return MeasurementSet(
        m=network.m, n=network.n,
        tau_s=tau_s, doppler_hz=doppler_hz,
        q_alpha_diag=covariance_diagonal(noise, network.m * network.n),
        doppler_variance_scale=noise.doppler_variance_scale,
    )


def simulate(network: RadarNetwork, truth: StateVector, noise: NoiseModel,
             run_index: int = 0) -> MeasurementSet:
    """Simulate one noisy snapshot.

    Draw order is fixed (all delay noise, then all Doppler noise) so a
    given (seed, run_index) always yields the identical snapshot.
    """
    tau, dop = forward_model(network, truth)
    mn = tau.size
    if noise.sigma_t_s > 0:
        rng = substream(noise.seed, run_index, STREAM_MEASUREMENT)
        tau = tau + rng.normal(0.0, noise.sigma_t_s, mn)
        dop = dop + rng.normal(
            0.0, np.sqrt(noise.doppler_variance_scale) * noise.sigma_t_s, mn)
    return measurement_set(network, tau, dop, noise)


MEASUREMENT_COLUMNS = ("i", "j", "tau_s", "doppler_hz")


def write_measurements_csv(path: str, measurements: MeasurementSet) -> None:
    """Write the snapshot as CSV with columns i, j, tau_s, doppler_hz
    (i, j 1-based; floats at 17 significant digits)."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MEASUREMENT_COLUMNS)
        n = measurements.n
        for k in range(measurements.m * n):
            writer.writerow([
                k // n + 1, k % n + 1,
                format(measurements.tau_s[k], ".17g"),
                format(measurements.doppler_hz[k], ".17g"),
            ])
    os.replace(tmp, path)


def read_measurements_csv(path: str, network: RadarNetwork,
                          noise: NoiseModel) -> MeasurementSet:
    """Read a measurement CSV back into a MeasurementSet; rows may be in
    any order but must cover every (i, j) pair exactly once."""
    mn = network.m * network.n
    tau = np.full(mn, np.nan)
    dop = np.full(mn, np.nan)
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or \
                    tuple(reader.fieldnames) != MEASUREMENT_COLUMNS:
                raise ValidationError(
                    f"measurement CSV must have columns {MEASUREMENT_COLUMNS}")
            for row in reader:
                i = int(row["i"])
                j = int(row["j"])
                if not (1 <= i <= network.m and 1 <= j <= network.n):
                    raise ValidationError(f"measurement pair ({i}, {j}) outside network")
                k = (i - 1) * network.n + (j - 1)
                if not np.isnan(tau[k]):
                    raise ValidationError(f"duplicate measurement pair ({i}, {j})")
                tau[k] = float(row["tau_s"])
                dop[k] = float(row["doppler_hz"])
    except OSError as exc:
        raise ValidationError(f"cannot read measurements: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"malformed measurement CSV: {exc}") from exc
    if np.any(np.isnan(tau)):
        raise ValidationError("measurement CSV does not cover every pair")
    return measurement_set(network, tau, dop, noise)
