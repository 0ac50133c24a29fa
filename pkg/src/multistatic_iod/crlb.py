"""Cramer-Rao lower bound for the delay/Doppler measurement model.

Evaluates the measurement Jacobian at a reference state, forms the
Fisher information under the Gaussian noise model, and reports the
bound as root-trace position and velocity errors plus the full 6x6
covariance floor. Delay rows carry no velocity information, which is
what makes the bound block-structured in the zero-noise limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, ValidationError
from .geodesy import SPEED_OF_LIGHT_M_PER_S as C
from .measurement import covariance_diagonal
from .scenario import NoiseModel, RadarNetwork, StateVector


@dataclass(frozen=True)
class CrlbResult:
    position_m: float               # sqrt(trace of position block)
    velocity_mps: float             # sqrt(trace of velocity block)
    covariance: np.ndarray          # (6, 6) lower-bound covariance


def measurement_jacobian(network: RadarNetwork, state: StateVector) -> np.ndarray:
    """Jacobian of all delays then all Dopplers with respect to the
    6-state, evaluated at ``state``. Shape (2*M*N, 6).

    Delay rows depend only on position (sum of the two line-of-sight
    directions over c). Doppler rows pick up velocity through the same
    direction sum and position through the angular rate of both legs.
    """
    m, n = network.m, network.n
    mn = m * n
    x = state.position_m
    v = state.velocity_mps
    jac = np.zeros((2 * mn, 6))
    eye = np.eye(3)
    for i in range(m):
        t = network.transmitter_positions_m[i]
        fc = network.carriers_hz[i]
        for j in range(n):
            s = network.receivers_m[j]
            dt = x - t
            ds = x - s
            nt = np.linalg.norm(dt)
            ns = np.linalg.norm(ds)
            if nt == 0 or ns == 0:
                raise ValidationError("state coincides with a station")
            ut = dt / nt
            us = ds / ns
            k = i * n + j
            jac[k, 0:3] = (ut + us) / C
            kf = mn + k
            jac[kf, 3:6] = fc / C * (ut + us)
            jac[kf, 0:3] = fc / C * (
                v @ (eye - np.outer(ut, ut)) / nt +
                v @ (eye - np.outer(us, us)) / ns)
    return jac


def fisher_information(network: RadarNetwork, state: StateVector,
                       noise: NoiseModel) -> np.ndarray:
    """Fisher information matrix J^T Q^{-1} J for the Gaussian model."""
    if noise.sigma_t_s <= 0:
        raise ValidationError("Fisher information needs a positive noise level")
    jac = measurement_jacobian(network, state)
    q = covariance_diagonal(noise, network.m * network.n)
    jac_w = jac / np.sqrt(q)[:, None]
    return jac_w.T @ jac_w


def crlb_bounds(network: RadarNetwork, state: StateVector,
                noise: NoiseModel) -> CrlbResult:
    """Invert the Fisher information into the bound covariance.

    Raises EstimationError when the information matrix is singular; the
    message names the unobservable direction (the eigenvector of the
    smallest eigenvalue) so degenerate geometries are debuggable.
    """
    info = fisher_information(network, state, noise)
    eigenvalues, eigenvectors = np.linalg.eigh(info)
    if eigenvalues[-1] <= 0 or eigenvalues[0] <= eigenvalues[-1] * 1e-15:
        null_direction = eigenvectors[:, 0]
        raise EstimationError(
            "Fisher information is singular; unobservable state direction "
            f"approximately {np.array2string(null_direction, precision=3)}")
    covariance = np.linalg.inv(info)
    covariance = 0.5 * (covariance + covariance.T)
    return CrlbResult(
        position_m=float(np.sqrt(np.trace(covariance[:3, :3]))),
        velocity_mps=float(np.sqrt(np.trace(covariance[3:, 3:]))),
        covariance=covariance,
    )
