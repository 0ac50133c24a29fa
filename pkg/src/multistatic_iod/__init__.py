"""One-shot initial orbit determination from simultaneous multistatic
radar delay and Doppler measurements.

The package estimates a target's full position/velocity state from a
single simultaneous snapshot of bistatic delays and Doppler shifts,
without orbit propagation and without an initial guess. The core is a
non-iterative two-stage weighted-least-squares estimator; a
closed-form trilateration baseline, an accuracy lower-bound
calculator, and a Monte Carlo experiment harness round out the
toolkit.
"""

from .crlb import CrlbResult, crlb_bounds, fisher_information, measurement_jacobian
from .errors import EstimationError, ValidationError
from .estimator import (AugmentedState, StateEstimate, estimate,
                        estimate_stage1, estimate_to_json_dict, wls_solve)
from .geodesy import (SPEED_OF_LIGHT_M_PER_S, WGS84_FLATTENING,
                      WGS84_SEMI_MAJOR_AXIS_M, GeodeticCoordinate,
                      geodetic_to_ecef)
from .measurement import (MeasurementSet, forward_model, measurement_set,
                          read_measurements_csv, simulate, true_delay,
                          true_doppler, write_measurements_csv)
from .montecarlo import (BiasResult, EllipsoidSpec, RunRecord, SigmaDiffResult,
                         SweepRow, bias_study, ellipsoid_export, rmse_sweep,
                         run_level, run_once, uncertainty_comparison)
from .scenario import (DEFAULT_SEED, DEFAULT_SIGMA_GRID, ExperimentSpec,
                       NoiseModel, RadarNetwork, Scenario, StateVector,
                       Transmitter, builtin_scenario, load_experiment_spec,
                       load_scenario, scenario_from_dict, scenario_to_dict,
                       write_scenario)
from .trilateration import (RangeSet, TrilaterationEstimate, derive_ranges,
                            trilaterate)

__version__ = "0.1.0"

__all__ = [
    "AugmentedState",
    "BiasResult",
    "CrlbResult",
    "DEFAULT_SEED",
    "DEFAULT_SIGMA_GRID",
    "EllipsoidSpec",
    "EstimationError",
    "ExperimentSpec",
    "GeodeticCoordinate",
    "MeasurementSet",
    "NoiseModel",
    "RadarNetwork",
    "RangeSet",
    "RunRecord",
    "Scenario",
    "SigmaDiffResult",
    "SPEED_OF_LIGHT_M_PER_S",
    "StateEstimate",
    "StateVector",
    "SweepRow",
    "Transmitter",
    "TrilaterationEstimate",
    "ValidationError",
    "WGS84_FLATTENING",
    "WGS84_SEMI_MAJOR_AXIS_M",
    "bias_study",
    "builtin_scenario",
    "crlb_bounds",
    "derive_ranges",
    "ellipsoid_export",
    "estimate",
    "estimate_stage1",
    "estimate_to_json_dict",
    "fisher_information",
    "forward_model",
    "geodetic_to_ecef",
    "load_experiment_spec",
    "load_scenario",
    "measurement_jacobian",
    "measurement_set",
    "read_measurements_csv",
    "rmse_sweep",
    "run_level",
    "run_once",
    "scenario_from_dict",
    "scenario_to_dict",
    "simulate",
    "trilaterate",
    "true_delay",
    "true_doppler",
    "uncertainty_comparison",
    "wls_solve",
    "write_measurements_csv",
    "write_scenario",
]
