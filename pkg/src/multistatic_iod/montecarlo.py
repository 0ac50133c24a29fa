"""Monte Carlo experiment harness.

Four experiments, each mirroring one published comparison: an RMSE
sweep over a noise grid, a bias study at a fixed noise level, a
comparison of the per-axis uncertainties the two estimators report,
and a confidence-ellipsoid export. Runs are paired through common
random numbers: both estimators see draws derived from the same run
index, so per-level comparisons are tighter than independent sampling
would allow.

Every run derives its own RNG substream from (seed, run_index), which
makes results bit-identical regardless of worker count or scheduling.
Aggregation happens in fixed run order.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, skew

from .crlb import crlb_bounds
from .errors import EstimationError, ValidationError
from .estimator import estimate
from .measurement import simulate
from .scenario import ExperimentSpec, NoiseModel, Scenario
from .trilateration import derive_ranges, trilaterate

AXIS_LABELS = ("x_m", "y_m", "z_m", "vx_mps", "vy_mps", "vz_mps")

# histogram layout for the bias and sigma-difference studies
HISTOGRAM_BINS = 61
HISTOGRAM_SPAN_STDS = 4.0

# a level whose failure fraction exceeds this is flagged, not averaged away
FAILURE_FLAG_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Outcome of one estimator on one noise draw."""

    run_index: int
    estimator: str                      # "wls" or "tri"
    success: bool
    error: np.ndarray | None            # 6-vector estimate minus truth
    stage1_error: np.ndarray | None     # wls only; None for tri
    sigma_axes: np.ndarray | None       # reported per-axis standard deviations
    failure: str | None


def run_once(scenario: Scenario, noise: NoiseModel, run_index: int,
             estimator: str) -> RunRecord:
    """Execute one estimator on the draws for ``run_index``."""
    network, truth = scenario.network, scenario.target
    truth_vec = truth.as_vector()
    try:
        if estimator == "wls":
            measured = simulate(network, truth, noise, run_index)
            result = estimate(network, measured)
            return RunRecord(
                run_index=run_index,
                estimator=estimator,
                success=True,
                error=result.state.as_vector() - truth_vec,
                stage1_error=result.stage1_state.as_vector() - truth_vec,
                sigma_axes=np.sqrt(np.diag(result.covariance)),
                failure=None,
            )
        if estimator == "tri":
            ranges = derive_ranges(network, truth, noise, run_index)
            result = trilaterate(network, ranges)
            return RunRecord(
                run_index=run_index,
                estimator=estimator,
                success=True,
                error=result.state.as_vector() - truth_vec,
                stage1_error=None,
                sigma_axes=np.sqrt(np.diag(result.covariance)),
                failure=None,
            )
    except (EstimationError, ValidationError) as exc:
        # at extreme noise a draw can produce unphysical measurements
        # (nonpositive delay) or a diverged solve; both count as a
        # failed run, not a harness crash
        return RunRecord(run_index, estimator, False, None, None, None, str(exc))
    raise ValidationError(f"unknown estimator {estimator!r}")


def _run_batch(args) -> list:
    scenario, noise, start, stop, estimators = args
    return [run_once(scenario, noise, idx, name)
            for idx in range(start, stop) for name in estimators]


def run_level(scenario: Scenario, noise: NoiseModel, runs: int,
              estimators=("wls", "tri"), workers: int = 1) -> list:
    """All RunRecords for one noise level, in (run, estimator) order.

    ``workers`` > 1 fans runs out to a process pool; record order and
    content are identical to the serial path because every run owns an
    independent substream and batches are concatenated in order.
    """
    if runs < 1:
        raise ValidationError("runs must be at least 1")
    if workers < 1:
        raise ValidationError("workers must be at least 1")
    if workers == 1 or runs < 2 * workers:
        return _run_batch((scenario, noise, 0, runs, tuple(estimators)))
    bounds = np.linspace(0, runs, workers + 1, dtype=int)
    batches = [(scenario, noise, int(lo), int(hi), tuple(estimators))
               for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    records = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for batch in pool.map(_run_batch, batches):
            records.extend(batch)
    return records


@dataclass(frozen=True)
class SweepRow:
    """One (noise level, estimator, stage) line of the RMSE table."""

    sigma_t_s: float
    estimator: str
    stage: str                          # "stage1" or "final"
    pos_rmse_m: float
    vel_rmse_mps: float
    crlb_pos_m: float
    crlb_vel_mps: float
    failures: int
    runs: int
    flagged: bool


def _rmse(errors: list) -> tuple[float, float]:
    if not errors:
        return (math.nan, math.nan)
    arr = np.asarray(errors)
    pos = float(np.sqrt(np.mean(np.sum(arr[:, :3] ** 2, axis=1))))
    vel = float(np.sqrt(np.mean(np.sum(arr[:, 3:] ** 2, axis=1))))
    return pos, vel


def _noise_at(scenario: Scenario, sigma_t_s: float) -> NoiseModel:
    base = scenario.noise
    return NoiseModel(sigma_t_s=sigma_t_s,
                      doppler_variance_scale=base.doppler_variance_scale,
                      seed=base.seed)


def rmse_sweep(scenario: Scenario, spec: ExperimentSpec,
               workers: int = 1) -> list:
    """RMSE of every enabled estimator across the noise grid.

    Emits one row per (level, estimator, stage): the two-stage
    estimator contributes a stage-1-only row and a final row, the
    baseline a final row. CRLB columns repeat per level for direct
    ratio reading. Levels where an estimator fails more than 10% of
    runs are flagged.
    """
    rows = []
    for sigma in spec.sigma_grid:
        noise = _noise_at(scenario, sigma)
        bound = crlb_bounds(scenario.network, scenario.target, noise)
        records = run_level(scenario, noise, spec.runs, spec.estimators, workers)
        for name in spec.estimators:
            good = [r for r in records if r.estimator == name and r.success]
            failures = sum(1 for r in records
                           if r.estimator == name and not r.success)
            flagged = failures > FAILURE_FLAG_FRACTION * spec.runs
            stages = []
            if name == "wls":
                stages.append(("stage1", [r.stage1_error for r in good]))
            stages.append(("final", [r.error for r in good]))
            for stage, errors in stages:
                pos, vel = _rmse(errors)
                rows.append(SweepRow(
                    sigma_t_s=sigma, estimator=name, stage=stage,
                    pos_rmse_m=pos, vel_rmse_mps=vel,
                    crlb_pos_m=bound.position_m, crlb_vel_mps=bound.velocity_mps,
                    failures=failures, runs=spec.runs, flagged=flagged))
    return rows


def _axis_histogram(values: np.ndarray, center: float,
                    spread: float) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-width histogram around ``center``; out-of-span samples are
    dropped (their count is len(values) - counts.sum())."""
    half = HISTOGRAM_SPAN_STDS * spread
    if half == 0:
        half = 1.0          # degenerate spread; everything lands mid-span
    edges = np.linspace(center - half, center + half, HISTOGRAM_BINS + 1)
    counts, _ = np.histogram(values, bins=edges)
    return counts, edges


@dataclass(frozen=True)
class AxisSummary:
    axis: str
    mean: float
    std: float
    skewness: float
    mean_bound: float       # 4 std / sqrt(S)
    samples: int
    hist_counts: np.ndarray
    hist_edges: np.ndarray


@dataclass(frozen=True)
class BiasResult:
    sigma_t_s: float
    runs: int
    failures: int
    axes: tuple          # six AxisSummary entries in AXIS_LABELS order


def bias_study(scenario: Scenario, sigma_t_s: float, runs: int,
               workers: int = 1) -> BiasResult:
    """Per-axis error mean, spread, and histogram at one noise level."""
    if runs < 100:
        raise ValidationError("bias study needs at least 100 runs")
    noise = _noise_at(scenario, sigma_t_s)
    records = run_level(scenario, noise, runs, ("wls",), workers)
    errors = np.array([r.error for r in records if r.success])
    failures = runs - errors.shape[0]
    if errors.size == 0:
        raise EstimationError("every bias-study run failed")
    axes = []
    for k, label in enumerate(AXIS_LABELS):
        col = errors[:, k]
        std = float(col.std())
        counts, edges = _axis_histogram(col, float(col.mean()), std)
        axes.append(AxisSummary(
            axis=label,
            mean=float(col.mean()),
            std=std,
            skewness=float(skew(col)) if std > 0 else 0.0,
            mean_bound=4.0 * std / math.sqrt(col.size),
            samples=int(col.size),
            hist_counts=counts,
            hist_edges=edges,
        ))
    return BiasResult(sigma_t_s, runs, failures, tuple(axes))


@dataclass(frozen=True)
class SigmaDiffResult:
    """Comparison of the per-axis standard deviations two estimators
    report, averaged over paired runs (first minus second)."""

    sigma_t_s: float
    pair: tuple
    runs: int
    failures: int
    axes: tuple          # six AxisSummary entries of the differences
    mean_sigma_first: np.ndarray
    mean_sigma_second: np.ndarray


def uncertainty_comparison(scenario: Scenario, sigma_t_s: float, runs: int,
                           pair=("wls", "tri"),
                           workers: int = 1) -> SigmaDiffResult:
    """Mean per-axis difference of reported sigmas, first minus second.

    Only runs where both estimators succeed contribute. A self
    comparison (same name twice) yields identically zero differences.
    """
    first, second = pair
    noise = _noise_at(scenario, sigma_t_s)
    names = (first,) if first == second else (first, second)
    records = run_level(scenario, noise, runs, names, workers)
    by_run = {}
    for rec in records:
        by_run.setdefault(rec.run_index, {})[rec.estimator] = rec
    diffs = []
    firsts = []
    seconds = []
    for idx in sorted(by_run):
        rec_a = by_run[idx].get(first)
        rec_b = by_run[idx].get(second)
        if rec_a is None or rec_b is None:
            continue
        if not (rec_a.success and rec_b.success):
            continue
        diffs.append(rec_a.sigma_axes - rec_b.sigma_axes)
        firsts.append(rec_a.sigma_axes)
        seconds.append(rec_b.sigma_axes)
    if not diffs:
        raise EstimationError("no paired successful runs to compare")
    diffs = np.asarray(diffs)
    failures = runs - diffs.shape[0]
    axes = []
    for k, label in enumerate(AXIS_LABELS):
        col = diffs[:, k]
        std = float(col.std())
        counts, edges = _axis_histogram(col, float(col.mean()), std)
        axes.append(AxisSummary(
            axis=label,
            mean=float(col.mean()),
            std=std,
            skewness=float(skew(col)) if std > 0 else 0.0,
            mean_bound=4.0 * std / math.sqrt(col.size),
            samples=int(col.size),
            hist_counts=counts,
            hist_edges=edges,
        ))
    return SigmaDiffResult(
        sigma_t_s=sigma_t_s, pair=(first, second), runs=runs,
        failures=failures, axes=tuple(axes),
        mean_sigma_first=np.asarray(firsts).mean(axis=0),
        mean_sigma_second=np.asarray(seconds).mean(axis=0),
    )


@dataclass(frozen=True)
class EllipsoidSpec:
    """Confidence ellipsoid of a position estimate."""

    center_m: np.ndarray            # (3,)
    semi_axes_m: np.ndarray         # (3,), descending
    rotation: np.ndarray            # (3, 3), columns are axis directions
    confidence: float
    chi2_quantile: float
    volume_m3: float

    def to_dict(self) -> dict:
        return {
            "center_m": [float(v) for v in self.center_m],
            "semi_axes_m": [float(v) for v in self.semi_axes_m],
            "rotation": [[float(v) for v in row] for row in self.rotation],
            "confidence": self.confidence,
            "chi2_quantile": self.chi2_quantile,
            "volume_m3": self.volume_m3,
        }


def ellipsoid_export(center_m, covariance, confidence: float = 0.95) -> EllipsoidSpec:
    """Confidence ellipsoid of the position block of a covariance.

    Axis lengths are sqrt(chi-square quantile times eigenvalue);
    rotation columns are unit eigenvectors ordered by descending
    eigenvalue with a deterministic sign convention: the first two
    columns have their largest-magnitude component positive, the third
    is their cross product, making the rotation right-handed.
    """
    if not 0.0 < confidence < 1.0:
        raise ValidationError("confidence must be strictly between 0 and 1")
    center = np.asarray(center_m, dtype=float).reshape(3)
    cov = np.asarray(covariance, dtype=float)
    if cov.shape == (6, 6):
        cov = cov[:3, :3]
    if cov.shape != (3, 3):
        raise ValidationError("covariance must be 3x3 or 6x6")
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=0.0):
        raise ValidationError("covariance must be symmetric")
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (cov + cov.T))
    if eigenvalues[0] < -1e-12 * max(abs(eigenvalues[-1]), 1.0):
        raise ValidationError("position covariance is not positive semidefinite")
    eigenvalues = np.clip(eigenvalues[::-1], 0.0, None)     # descending
    eigenvectors = eigenvectors[:, ::-1]
    rotation = np.empty((3, 3))
    for k in range(2):
        column = eigenvectors[:, k]
        lead = np.argmax(np.abs(column))
        rotation[:, k] = column if column[lead] >= 0 else -column
    rotation[:, 2] = np.cross(rotation[:, 0], rotation[:, 1])
    quantile = float(chi2.ppf(confidence, df=3))
    semi_axes = np.sqrt(quantile * eigenvalues)
    volume = float(4.0 / 3.0 * math.pi * np.prod(semi_axes))
    return EllipsoidSpec(center, semi_axes, rotation,
                         float(confidence), quantile, volume)


# ---------------------------------------------------------------------------
# delimited output


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _write_delimited(path: str, header, rows) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(v) for v in row) + "\n")
    os.replace(tmp, path)


RMSE_COLUMNS = ("sigma_t_s", "estimator", "stage", "pos_rmse_m", "vel_rmse_mps",
                "crlb_pos_m", "crlb_vel_mps", "failures", "runs", "flagged")


def write_rmse_csv(path: str, rows) -> None:
    _write_delimited(path, RMSE_COLUMNS, (
        (r.sigma_t_s, r.estimator, r.stage, r.pos_rmse_m, r.vel_rmse_mps,
         r.crlb_pos_m, r.crlb_vel_mps, r.failures, r.runs, r.flagged)
        for r in rows))


SUMMARY_COLUMNS = ("axis", "mean", "std", "skewness", "mean_bound", "samples")
HIST_COLUMNS = ("axis", "bin_index", "bin_left", "bin_right", "count")


def write_axis_summary_csv(path: str, axes) -> None:
    _write_delimited(path, SUMMARY_COLUMNS, (
        (a.axis, a.mean, a.std, a.skewness, a.mean_bound, a.samples)
        for a in axes))


def write_axis_histogram_csv(path: str, axes) -> None:
    rows = []
    for summary in axes:
        for b in range(summary.hist_counts.size):
            rows.append((summary.axis, b,
                         float(summary.hist_edges[b]),
                         float(summary.hist_edges[b + 1]),
                         int(summary.hist_counts[b])))
    _write_delimited(path, HIST_COLUMNS, rows)


CRLB_COLUMNS = ("sigma_t_s", "pos_bound_m", "vel_bound_mps")


def write_crlb_csv(path: str, rows) -> None:
    """rows: iterable of (sigma_t_s, CrlbResult)."""
    _write_delimited(path, CRLB_COLUMNS, (
        (sigma, bound.position_m, bound.velocity_mps)
        for sigma, bound in rows))


def write_ellipsoid_json(path: str, ellipsoids: dict) -> None:
    """ellipsoids: mapping of estimator name to EllipsoidSpec."""
    payload = {name: spec.to_dict() for name, spec in ellipsoids.items()}
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    os.replace(tmp, path)
