"""Two-stage weighted-least-squares state estimator.

Stage 1 linearizes the squared delay and delay-Doppler products into a
system that is exactly linear in an augmented unknown vector: position,
velocity, plus one range and one range-rate per transmitter. Stage 2
restores the geometric coupling between those auxiliary unknowns and
the state by solving a small correction system. Both stages are plain
weighted least squares, so the whole estimator is non-iterative apart
from one weight refinement pass in stage 1.

Numerical hygiene: every solve whitens the residual (rows scaled to
unit noise), equilibrates columns to unit norm, and uses an SVD-based
least-squares core. Nothing here forms an explicit matrix inverse; the
structured noise-scaling operator is applied as a two-step elementwise
solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import EstimationError
from .geodesy import SPEED_OF_LIGHT_M_PER_S as C
from .measurement import MeasurementSet
from .scenario import RadarNetwork, StateVector

# Condition-number gate for every normal matrix that is solved here.
MAX_NORMAL_CONDITION = 1e12


@dataclass(frozen=True)
class WlsSolution:
    """Result of one weighted least-squares solve."""

    solution: np.ndarray
    covariance: np.ndarray          # (A^T W A)^{-1}
    condition_number: float         # of the equilibrated normal matrix
    normal_residual: float          # relative normal-equation residual


def _equilibrated_lstsq(design_w: np.ndarray, rhs_w: np.ndarray) -> WlsSolution:
    """Solve min ||design_w y - rhs_w||_2 after scaling columns to unit
    norm; covariance comes from the same SVD factors."""
    scale = np.linalg.norm(design_w, axis=0)
    if not np.all(np.isfinite(design_w)) or np.any(scale == 0):
        raise EstimationError("degenerate design matrix (zero or nonfinite column)")
    normalized = design_w / scale
    u, sv, vt = np.linalg.svd(normalized, full_matrices=False)
    if sv[-1] == 0:
        raise EstimationError("rank-deficient design matrix")
    cond = (sv[0] / sv[-1]) ** 2
    if cond > MAX_NORMAL_CONDITION:
        raise EstimationError(
            f"normal matrix condition {cond:.3e} exceeds {MAX_NORMAL_CONDITION:.0e}")
    y_scaled = vt.T @ ((u.T @ rhs_w) / sv)
    solution = y_scaled / scale
    v_over_s = vt.T / sv
    covariance = (v_over_s @ v_over_s.T) / np.outer(scale, scale)
    # normal-equation residual of the equilibrated system, relative
    gradient = normalized.T @ (rhs_w - normalized @ y_scaled)
    reference = np.linalg.norm(normalized.T @ rhs_w)
    residual = float(np.linalg.norm(gradient) / reference) if reference > 0 else 0.0
    return WlsSolution(solution, covariance, float(cond), residual)


def wls_solve(design: np.ndarray, rhs: np.ndarray, weights) -> WlsSolution:
    """Weighted least squares: minimize (rhs - design y)^T W (rhs - design y).

    ``weights`` is either the diagonal of W (1-D, nonnegative) or a full
    symmetric positive-definite W (2-D). The design is whitened with a
    square root of W, equilibrated, and solved by SVD; the returned
    covariance is (design^T W design)^{-1}.
    """
    design = np.asarray(design, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1:
        if np.any(w < 0):
            raise EstimationError("weight diagonal must be nonnegative")
        root = np.sqrt(w)
        return _equilibrated_lstsq(design * root[:, None], rhs * root)
    try:
        low = np.linalg.cholesky(w)
    except np.linalg.LinAlgError as exc:
        raise EstimationError("weight matrix is not positive definite") from exc
    # W = L L^T  =>  ||L^T r||^2 = r^T W r
    return _equilibrated_lstsq(low.T @ design, low.T @ rhs)


def build_stage1(network: RadarNetwork,
                 measurements: MeasurementSet) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the stage-1 linear system (design, rhs).

    Unknown layout: [position (3), velocity (3), per-transmitter range
    (M), per-transmitter range rate (M)]. Rows: all M*N delay equations,
    then all M*N Doppler equations, in pair order.
    """
    m, n = network.m, network.n
    mn = m * n
    tx = network.transmitter_positions_m
    rx = network.receivers_m
    fc = network.carriers_hz
    tau = measurements.tau_s
    dop = measurements.doppler_hz

    design = np.zeros((2 * mn, 6 + 2 * m))
    rhs = np.empty(2 * mn)
    tx_sq = np.einsum("ij,ij->i", tx, tx)
    rx_sq = np.einsum("ij,ij->i", rx, rx)
    for i in range(m):
        rows = slice(i * n, (i + 1) * n)
        tau_i = tau[rows]
        dop_i = dop[rows]
        diff = tx[i] - rx                                  # (N, 3)
        # delay rows: squared-path expansion, linear in position and range
        rhs[rows] = C ** 2 * tau_i ** 2 + tx_sq[i] - rx_sq
        design[rows, 0:3] = 2.0 * diff
        design[rows, 6 + i] = 2.0 * C * tau_i
        # Doppler rows: delay-Doppler product expansion, linear in
        # velocity, range, and range rate
        frows = slice(mn + i * n, mn + (i + 1) * n)
        rhs[frows] = 2.0 * C ** 2 * tau_i * dop_i
        design[frows, 3:6] = 2.0 * fc[i] * diff
        design[frows, 6 + i] = 2.0 * C * dop_i
        design[frows, 6 + m + i] = 2.0 * C * fc[i] * tau_i
    return design, rhs


@dataclass(frozen=True)
class NoiseScaling:
    """Structured map from raw measurement noise to stage-1 equation
    noise, evaluated at a state guess.

    Block structure (2MN x 2MN, every block diagonal):

        [[delay_diag,      0        ],
         [cross_diag,  delay_diag   ]] * 2c

    where delay_diag holds the receiver ranges tiled per transmitter and
    cross_diag holds carrier-scaled receiver range rates.
    """

    delay_diag: np.ndarray
    cross_diag: np.ndarray

    def matrix(self) -> np.ndarray:
        """Dense form; test and diagnostic use only."""
        mn = self.delay_diag.size
        out = np.zeros((2 * mn, 2 * mn))
        idx = np.arange(mn)
        out[idx, idx] = self.delay_diag
        out[mn + idx, idx] = self.cross_diag
        out[mn + idx, mn + idx] = self.delay_diag
        return out

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Apply the inverse via the block-triangular structure."""
        mn = self.delay_diag.size
        d = self.delay_diag if rhs.ndim == 1 else self.delay_diag[:, None]
        g = self.cross_diag if rhs.ndim == 1 else self.cross_diag[:, None]
        top = rhs[:mn] / d
        bottom = (rhs[mn:] - g * top) / d
        return np.concatenate([top, bottom])


def noise_scaling(network: RadarNetwork, position_m,
                  velocity_mps) -> NoiseScaling:
    """Evaluate the noise-scaling operator at a state guess."""
    x = np.asarray(position_m, dtype=float)
    v = np.asarray(velocity_mps, dtype=float)
    ds = x - network.receivers_m
    ranges = np.linalg.norm(ds, axis=1)
    if np.any(ranges == 0):
        raise EstimationError("state guess coincides with a receiver")
    rates = ds @ v / ranges
    m = network.m
    return NoiseScaling(
        delay_diag=2.0 * C * np.tile(ranges, m),
        cross_diag=2.0 * C * np.repeat(network.carriers_hz, ranges.size) *
        np.tile(rates, m),
    )


@dataclass(frozen=True)
class AugmentedState:
    """Stage-1 estimate: state plus per-transmitter range/range-rate
    unknowns and their joint covariance.

    ``range_residuals_m``/``range_rate_residuals_mps`` report the
    internal consistency gap between the auxiliary unknowns and the
    state estimate; stage 1 leaves that coupling unenforced.
    """

    position_m: np.ndarray
    velocity_mps: np.ndarray
    ranges_m: np.ndarray
    range_rates_mps: np.ndarray
    covariance: np.ndarray
    range_residuals_m: np.ndarray
    range_rate_residuals_mps: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position_m, self.velocity_mps,
                               self.ranges_m, self.range_rates_mps])


@dataclass(frozen=True)
class Stage1Result:
    augmented: AugmentedState
    condition_numbers: tuple[float, ...]    # one per weighting pass
    normal_residual: float                  # final pass, relative


def _stage1_weights(measurements: MeasurementSet) -> np.ndarray:
    q = measurements.q_alpha_diag
    if np.all(q == 0):
        # exact measurements: weights matter only up to a scalar, so use
        # the noise model's relative delay/Doppler variance ratio; this
        # keeps the two row blocks balanced, which unit weights do not
        mn = q.size // 2
        return np.concatenate([
            np.ones(mn), np.full(mn, measurements.doppler_variance_scale)])
    if np.any(q == 0):
        raise EstimationError("mixed zero/nonzero measurement variances")
    return q


def estimate_stage1(network: RadarNetwork, measurements: MeasurementSet,
                    passes: int = 2) -> Stage1Result:
    """Solve the augmented linear system.

    Pass 1 weights by the inverse measurement covariance alone; each
    further pass rebuilds the equation-noise scaling at the latest state
    guess and solves with the refined weights. Two passes are the
    default and match the estimator's published behavior.
    """
    if passes < 1:
        raise EstimationError("stage 1 needs at least one pass")
    design, rhs = build_stage1(network, measurements)
    q = _stage1_weights(measurements)
    inv_sqrt_q = 1.0 / np.sqrt(q)

    sol = wls_solve(design, rhs, 1.0 / q)
    conds = [sol.condition_number]
    for _ in range(passes - 1):
        scaling = noise_scaling(network, sol.solution[:3], sol.solution[3:6])
        # weight (B Q B^T)^{-1} applied as whitening Q^{-1/2} B^{-1}
        design_w = scaling.solve(design) * inv_sqrt_q[:, None]
        rhs_w = scaling.solve(rhs) * inv_sqrt_q
        sol = _equilibrated_lstsq(design_w, rhs_w)
        conds.append(sol.condition_number)

    m = network.m
    y = sol.solution
    position, velocity = y[0:3], y[3:6]
    ranges, rates = y[6:6 + m], y[6 + m:]
    dt = position - network.transmitter_positions_m
    true_ranges = np.linalg.norm(dt, axis=1)
    if np.any(true_ranges == 0):
        raise EstimationError("stage-1 state coincides with a transmitter")
    augmented = AugmentedState(
        position_m=position,
        velocity_mps=velocity,
        ranges_m=ranges,
        range_rates_mps=rates,
        covariance=sol.covariance,
        range_residuals_m=ranges - true_ranges,
        range_rate_residuals_mps=rates - dt @ velocity / true_ranges,
    )
    return Stage1Result(augmented, tuple(conds), sol.normal_residual)


def build_stage2(network: RadarNetwork,
                 augmented: AugmentedState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Assemble the correction system (design, rhs, error_map).

    The unknown is the 6-vector of stage-1 state errors. ``error_map``
    relates stage-1 estimate errors to the correction residuals and
    shapes the correction weights from the stage-1 covariance.
    """
    m = network.m
    tx = network.transmitter_positions_m
    x = augmented.position_m
    v = augmented.velocity_mps
    gam = augmented.ranges_m
    bet = augmented.range_rates_mps

    rhs = np.concatenate([
        gam ** 2 - x @ x + 2.0 * tx @ x - np.einsum("ij,ij->i", tx, tx),
        gam * bet - x @ v + tx @ v,
        np.zeros(6),
    ])
    design = np.zeros((2 * m + 6, 6))
    design[0:m, 0:3] = -2.0 * (x - tx)
    design[m:2 * m, 0:3] = -v
    design[m:2 * m, 3:6] = -(x - tx)
    design[2 * m:, :] = -np.eye(6)

    error_map = np.zeros((2 * m + 6, 6 + 2 * m))
    error_map[0:m, 6:6 + m] = 2.0 * np.diag(gam)
    error_map[m:2 * m, 6:6 + m] = np.diag(bet)
    error_map[m:2 * m, 6 + m:] = np.diag(gam)
    error_map[2 * m:2 * m + 3, 0:3] = np.eye(3)
    error_map[2 * m + 3:, 3:6] = np.eye(3)
    return design, rhs, error_map


@dataclass(frozen=True)
class Diagnostics:
    condition_stage1: tuple[float, ...]
    condition_stage2: float
    normal_residual_stage1: float
    normal_residual_stage2: float
    range_residuals_m: np.ndarray
    range_rate_residuals_mps: np.ndarray
    correction_position_m: float
    correction_velocity_mps: float

    def to_dict(self) -> dict:
        return {
            "cond_stage1": max(self.condition_stage1),
            "cond_stage2": self.condition_stage2,
            "residuals": {
                "stage1_normal_eq": self.normal_residual_stage1,
                "stage2_normal_eq": self.normal_residual_stage2,
                "range_consistency_m": [float(r) for r in self.range_residuals_m],
                "range_rate_consistency_mps": [
                    float(r) for r in self.range_rate_residuals_mps],
                "correction_position_m": self.correction_position_m,
                "correction_velocity_mps": self.correction_velocity_mps,
            },
        }


@dataclass(frozen=True)
class StateEstimate:
    """Final state with covariance, plus the intermediate stage-1 state."""

    state: StateVector
    covariance: np.ndarray              # (6, 6), position block first
    stage1_state: StateVector
    diagnostics: Diagnostics


def estimate(network: RadarNetwork, measurements: MeasurementSet,
             stage1_passes: int = 2) -> StateEstimate:
    """Run both estimation stages and form the final covariance.

    Raises EstimationError for degenerate geometry, condition-gate
    violations, or a nonpositive stage-1 range estimate (the telltale of
    a diverged solution at extreme noise).
    """
    stage1 = estimate_stage1(network, measurements, passes=stage1_passes)
    aug = stage1.augmented
    if np.any(aug.ranges_m <= 0):
        raise EstimationError("stage 1 produced a nonpositive range estimate")

    design2, rhs2, error_map = build_stage2(network, aug)
    spread = error_map @ aug.covariance @ error_map.T
    try:
        low, lower = cho_factor(spread, lower=True)
    except np.linalg.LinAlgError as exc:
        raise EstimationError("correction weight matrix is not positive definite") from exc
    design2_w = solve_triangular(low, design2, lower=lower)
    rhs2_w = solve_triangular(low, rhs2, lower=lower)
    correction = _equilibrated_lstsq(design2_w, rhs2_w)

    position = aug.position_m - correction.solution[0:3]
    velocity = aug.velocity_mps - correction.solution[3:6]

    covariance = _final_covariance(network, measurements, aug, position, velocity,
                                   design2, error_map)
    diagnostics = Diagnostics(
        condition_stage1=stage1.condition_numbers,
        condition_stage2=correction.condition_number,
        normal_residual_stage1=stage1.normal_residual,
        normal_residual_stage2=correction.normal_residual,
        range_residuals_m=aug.range_residuals_m,
        range_rate_residuals_mps=aug.range_rate_residuals_mps,
        correction_position_m=float(np.linalg.norm(correction.solution[0:3])),
        correction_velocity_mps=float(np.linalg.norm(correction.solution[3:6])),
    )
    return StateEstimate(
        state=StateVector(position, velocity),
        covariance=covariance,
        stage1_state=StateVector(aug.position_m.copy(), aug.velocity_mps.copy()),
        diagnostics=diagnostics,
    )


def _final_covariance(network, measurements, augmented, position, velocity,
                      design2, error_map) -> np.ndarray:
    """Covariance of the corrected state.

    Chain the three linear maps between raw measurement noise and the
    final state error, then invert the implied information matrix. The
    noise scaling is evaluated at the corrected state, and all inverse
    factors are applied as solves.
    """
    q = measurements.q_alpha_diag
    if np.all(q == 0):
        return np.zeros((6, 6))
    design1, _ = build_stage1(network, measurements)
    scaling = noise_scaling(network, position, velocity)
    try:
        inner = np.linalg.solve(error_map, design2)
    except np.linalg.LinAlgError as exc:
        raise EstimationError("error map is singular") from exc
    chain = scaling.solve(design1 @ inner)          # (2MN, 6)
    chain_w = chain / np.sqrt(q)[:, None]
    # information = chain_w^T chain_w; invert via QR for stability
    r = np.linalg.qr(chain_w, mode="r")
    diag = np.abs(np.diag(r))
    if diag.min() == 0 or (diag.max() / diag.min()) ** 2 > MAX_NORMAL_CONDITION:
        raise EstimationError("final information matrix is ill-conditioned")
    r_inv = solve_triangular(r, np.eye(6), lower=False)
    covariance = r_inv @ r_inv.T
    return 0.5 * (covariance + covariance.T)


def estimate_to_json_dict(result: StateEstimate) -> dict:
    """Flatten a StateEstimate for JSON output: state (6), sigma (36,
    row-major), stage1_state (6), diagnostics."""
    return {
        "state": [float(v) for v in result.state.as_vector()],
        "sigma": [float(v) for v in result.covariance.ravel(order="C")],
        "stage1_state": [float(v) for v in result.stage1_state.as_vector()],
        "diagnostics": result.diagnostics.to_dict(),
    }
