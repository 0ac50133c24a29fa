"""Closed-form three-sphere trilateration baseline.

A reference estimator that ignores the bistatic geometry entirely: it
consumes direct range and range-rate observations from three
transmitters, intersects the three range spheres in closed form,
polishes the root with a few Gauss-Newton steps, and recovers velocity
from the range rates by a single linear solve. Its covariance follows
from first-order propagation of the range noise.

The baseline exists to put the two-stage estimator's accuracy in
context; it uses an idealized monostatic measurement model with range
noise c*sigma_t and range-rate noise scaled by the mean carrier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, ValidationError
from .geodesy import SPEED_OF_LIGHT_M_PER_S as C, WGS84_SEMI_MAJOR_AXIS_M
from .measurement import STREAM_RANGES, substream
from .scenario import NoiseModel, RadarNetwork, StateVector

# number of transmitters the closed form consumes
SPHERE_COUNT = 3

# Gauss-Newton polish of the closed-form root
_MAX_POLISH_STEPS = 10
_POLISH_TOLERANCE_M = 1e-10


@dataclass(frozen=True)
class RangeSet:
    """Direct range observations from the first three transmitters."""

    ranges_m: np.ndarray            # (3,)
    range_rates_mps: np.ndarray     # (3,)
    sigma_range_m: float
    sigma_range_rate_mps: float

    def __post_init__(self):
        ranges = np.asarray(self.ranges_m, dtype=float)
        rates = np.asarray(self.range_rates_mps, dtype=float)
        if ranges.shape != (SPHERE_COUNT,) or rates.shape != (SPHERE_COUNT,):
            raise ValidationError("range set needs exactly three ranges and rates")
        if np.any(ranges <= 0):
            raise ValidationError("ranges must be positive")
        object.__setattr__(self, "ranges_m", ranges)
        object.__setattr__(self, "range_rates_mps", rates)


@dataclass(frozen=True)
class TrilaterationEstimate:
    state: StateVector
    covariance: np.ndarray          # (6, 6), position block first


def derive_ranges(network: RadarNetwork, truth: StateVector,
                  noise: NoiseModel, run_index: int = 0) -> RangeSet:
    """Simulate direct range/range-rate observations for the baseline.

    Ranges get additive Gaussian noise with sigma c*sigma_t; range
    rates use the Doppler variance scale referred through the mean
    carrier of the transmitters used. Draws come from a dedicated RNG
    stream so they are independent of the delay/Doppler draws for the
    same run index.
    """
    if network.m < SPHERE_COUNT:
        raise ValidationError(
            f"trilateration needs {SPHERE_COUNT} transmitters, network has {network.m}")
    tx = network.transmitter_positions_m[:SPHERE_COUNT]
    fc_mean = float(network.carriers_hz[:SPHERE_COUNT].mean())
    diff = truth.position_m - tx
    ranges = np.linalg.norm(diff, axis=1)
    if np.any(ranges == 0):
        raise ValidationError("target coincides with a transmitter")
    rates = diff @ truth.velocity_mps / ranges

    sigma_range = C * noise.sigma_t_s
    sigma_rate = C * np.sqrt(noise.doppler_variance_scale) * noise.sigma_t_s / fc_mean
    if noise.sigma_t_s > 0:
        rng = substream(noise.seed, run_index, STREAM_RANGES)
        ranges = ranges + rng.normal(0.0, sigma_range, SPHERE_COUNT)
        rates = rates + rng.normal(0.0, sigma_rate, SPHERE_COUNT)
    return RangeSet(ranges, rates, sigma_range, sigma_rate)


def _local_frame(tx: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, float, float]:
    """Orthonormal frame with origin at the first sphere center."""
    base12 = tx[1] - tx[0]
    d = np.linalg.norm(base12)
    if d == 0:
        raise EstimationError("first two sphere centers coincide")
    ex = base12 / d
    base13 = tx[2] - tx[0]
    i = float(ex @ base13)
    ey = base13 - i * ex
    ey_norm = np.linalg.norm(ey)
    if ey_norm == 0:
        raise EstimationError("sphere centers are collinear")
    ey = ey / ey_norm
    ez = np.cross(ex, ey)
    j = float(ey @ base13)
    return ex, ey, ez, d, i, j


def trilaterate(network: RadarNetwork, ranges: RangeSet) -> TrilaterationEstimate:
    """Intersect three range spheres and solve for velocity.

    Of the two mirror roots, the one above the reference ellipsoid's
    equatorial radius is the target; if both qualify, the root on the
    same side as the transmitter constellation wins. Raises
    EstimationError when the spheres fail to intersect, both roots sit
    below orbital altitude, or the line-of-sight geometry is singular.
    """
    if network.m < SPHERE_COUNT:
        raise ValidationError(
            f"trilateration needs {SPHERE_COUNT} transmitters, network has {network.m}")
    tx = network.transmitter_positions_m[:SPHERE_COUNT]
    r = ranges.ranges_m
    ex, ey, ez, d, i, j = _local_frame(tx)

    xl = (r[0] ** 2 - r[1] ** 2 + d ** 2) / (2.0 * d)
    yl = (r[0] ** 2 - r[2] ** 2 + i ** 2 + j ** 2) / (2.0 * j) - (i / j) * xl
    z_sq = r[0] ** 2 - xl ** 2 - yl ** 2
    if z_sq < 0:
        raise EstimationError("no sphere intersection (negative height squared)")
    zl = np.sqrt(z_sq)
    base = tx[0] + xl * ex + yl * ey
    candidates = [base + zl * ez, base - zl * ez]

    exterior = [p for p in candidates
                if np.linalg.norm(p) > WGS84_SEMI_MAJOR_AXIS_M]
    if not exterior:
        raise EstimationError("both intersection roots sit inside the reference sphere")
    if len(exterior) == 1:
        position = exterior[0]
    else:
        center_dir = tx.mean(axis=0)
        center_dir = center_dir / np.linalg.norm(center_dir)
        position = max(exterior, key=lambda p: float(p @ center_dir))

    # Gauss-Newton polish; the closed form is exact with exact ranges,
    # this removes the last bit of floating-point drift and tightens
    # the noisy case
    for _ in range(_MAX_POLISH_STEPS):
        diff = position - tx
        dist = np.linalg.norm(diff, axis=1)
        los = diff / dist[:, None]
        try:
            step = np.linalg.solve(los, dist - r)
        except np.linalg.LinAlgError as exc:
            raise EstimationError("line-of-sight directions are coplanar") from exc
        position = position - step
        if np.linalg.norm(step) < _POLISH_TOLERANCE_M:
            break

    diff = position - tx
    dist = np.linalg.norm(diff, axis=1)
    los = diff / dist[:, None]
    try:
        velocity = np.linalg.solve(los, ranges.range_rates_mps)
    except np.linalg.LinAlgError as exc:
        raise EstimationError("line-of-sight directions are coplanar") from exc

    covariance = _propagate_covariance(los, dist, velocity,
                                       ranges.sigma_range_m,
                                       ranges.sigma_range_rate_mps)
    return TrilaterationEstimate(StateVector(position, velocity), covariance)


def _propagate_covariance(los, dist, velocity, sigma_range_m,
                          sigma_range_rate_mps) -> np.ndarray:
    """First-order 6x6 covariance of the trilateration solution.

    Position noise maps through the inverse line-of-sight matrix; the
    velocity solve inherits both the range-rate noise and the position
    error leaking through the geometry sensitivity of the rates.
    """
    los_inv = np.linalg.inv(los)
    cov_pos = np.linalg.inv(los.T @ los) * sigma_range_m ** 2
    eye = np.eye(3)
    sensitivity = np.array([
        velocity @ (eye - np.outer(los[k], los[k])) / dist[k]
        for k in range(SPHERE_COUNT)])
    cov_vel = los_inv @ (sigma_range_rate_mps ** 2 * eye +
                         sensitivity @ cov_pos @ sensitivity.T) @ los_inv.T
    cov_cross = -cov_pos @ sensitivity.T @ los_inv.T
    return np.block([[cov_pos, cov_cross], [cov_cross.T, cov_vel]])
