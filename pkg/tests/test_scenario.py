"""Scenario model, JSON round trips, and validation behavior."""

import json

import numpy as np
import pytest

from multistatic_iod.errors import ValidationError
from multistatic_iod.scenario import (DEFAULT_SEED, DEFAULT_SIGMA_GRID,
                                      ExperimentSpec, NoiseModel, RadarNetwork,
                                      Scenario, StateVector, Transmitter,
                                      builtin_scenario, experiment_from_dict,
                                      load_experiment_spec, load_scenario,
                                      scenario_from_dict, scenario_to_dict,
                                      write_scenario)

BUILTIN_TARGET_POSITION_M = (4362379.104414236, 465878.83013408317,
                             4901428.8809492)
BUILTIN_TARGET_VELOCITY_MPS = (-2601.4569324477898, -7135.70949987181,
                               4665.980697)


def test_builtin_scenario_shape(canonical):
    net, truth, noise = canonical
    assert net.m == 3
    assert net.n == 5
    assert tuple(net.carriers_hz) == (1215e6, 1280e6, 1330e6)
    assert tuple(truth.position_m) == BUILTIN_TARGET_POSITION_M
    assert tuple(truth.velocity_mps) == BUILTIN_TARGET_VELOCITY_MPS
    assert noise.sigma_t_s == 1e-9
    assert noise.doppler_variance_scale == 1e11
    assert noise.seed == DEFAULT_SEED


def test_builtin_target_is_in_low_orbit(canonical):
    radius = np.linalg.norm(canonical.target.position_m)
    altitude = radius - 6_378_137.0
    assert 150e3 < altitude < 2000e3
    speed = np.linalg.norm(canonical.target.velocity_mps)
    # bound orbit at this radius: above a slow ellipse's perigee floor,
    # below escape speed (~11.0 km/s at 6578 km)
    assert 6000.0 < speed < 11000.0


def test_builtin_stations_on_the_surface(canonical):
    for station in canonical.network.receivers_m:
        assert 6.35e6 < np.linalg.norm(station) < 6.40e6
    for transmitter in canonical.network.transmitters:
        assert 6.35e6 < np.linalg.norm(transmitter.position_m) < 6.40e6


def test_network_size_rule():
    # 2*M*N measurements must cover 6 + 2*M unknowns
    tx = tuple(Transmitter(np.array([7e6, k * 1e5, 0.0]), 1.2e9 + k * 1e7)
               for k in range(1))
    with pytest.raises(ValidationError, match="network too small"):
        RadarNetwork(tx, np.array([[0.0, 7e6, 0.0],
                                   [0.0, 0.0, 7e6],
                                   [1e5, 0.0, 7e6]]))
    # one transmitter, four receivers: 8 equations, 8 unknowns, allowed
    RadarNetwork(tx, np.array([[0.0, 7e6, 0.0],
                               [0.0, 0.0, 7e6],
                               [1e5, 0.0, 7e6],
                               [7e6, 1e5, 0.0]]))


def test_transmitter_validation():
    with pytest.raises(ValidationError):
        Transmitter(np.array([7e6, 0.0, 0.0]), 0.0)
    with pytest.raises(ValidationError):
        Transmitter(np.array([7e6, 0.0]), 1.2e9)
    with pytest.raises(ValidationError):
        Transmitter(np.array([np.inf, 0.0, 0.0]), 1.2e9)


def test_noise_model_validation():
    with pytest.raises(ValidationError):
        NoiseModel(sigma_t_s=-1e-9)
    with pytest.raises(ValidationError):
        NoiseModel(doppler_variance_scale=0.0)
    with pytest.raises(ValidationError):
        NoiseModel(seed=-1)
    with pytest.raises(ValidationError):
        NoiseModel(seed=2 ** 64)
    NoiseModel(sigma_t_s=0.0, seed=2 ** 64 - 1)


def test_experiment_spec_validation():
    spec = ExperimentSpec()
    assert spec.sigma_grid == DEFAULT_SIGMA_GRID
    assert spec.runs == 1000
    assert spec.estimators == ("wls", "tri")
    with pytest.raises(ValidationError):
        ExperimentSpec(sigma_grid=(1e-9, 1e-10))
    with pytest.raises(ValidationError):
        ExperimentSpec(sigma_grid=(0.0, 1e-9))
    with pytest.raises(ValidationError):
        ExperimentSpec(runs=0)
    with pytest.raises(ValidationError):
        ExperimentSpec(confidence=1.0)
    with pytest.raises(ValidationError):
        ExperimentSpec(estimators=("wls", "ekf"))
    with pytest.raises(ValidationError):
        ExperimentSpec(estimators=())


def test_estimator_alias_normalization():
    spec = ExperimentSpec(estimators=("trilateration", "WLS"))
    assert spec.estimators == ("tri", "wls")


def test_state_vector_as_vector():
    state = StateVector(np.arange(3.0), np.arange(3.0, 6.0))
    assert tuple(state.as_vector()) == (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
    with pytest.raises(ValidationError):
        StateVector(np.zeros(2), np.zeros(3))


def test_scenario_roundtrip_is_bit_exact(tmp_path, canonical):
    path = tmp_path / "scenario.json"
    write_scenario(str(path), canonical)
    loaded = load_scenario(str(path))
    assert np.array_equal(loaded.target.position_m, canonical.target.position_m)
    assert np.array_equal(loaded.target.velocity_mps, canonical.target.velocity_mps)
    assert np.array_equal(loaded.network.receivers_m, canonical.network.receivers_m)
    for a, b in zip(loaded.network.transmitters, canonical.network.transmitters):
        assert np.array_equal(a.position_m, b.position_m)
        assert a.carrier_hz == b.carrier_hz
    assert loaded.noise == canonical.noise


def test_experiment_roundtrip(tmp_path, canonical):
    path = tmp_path / "scenario.json"
    spec = ExperimentSpec(sigma_grid=(1e-10, 1e-9), runs=77,
                          estimators=("wls",), confidence=0.9)
    write_scenario(str(path), canonical, experiment=spec)
    loaded = load_experiment_spec(str(path))
    assert loaded.sigma_grid == (1e-10, 1e-9)
    assert loaded.runs == 77
    assert loaded.estimators == ("wls",)
    assert loaded.confidence == 0.9
    # keyword overrides beat file values
    overridden = load_experiment_spec(str(path), runs=5)
    assert overridden.runs == 5
    assert overridden.sigma_grid == (1e-10, 1e-9)


def test_geodetic_station_entries(canonical):
    doc = scenario_to_dict(canonical)
    doc["network"]["receivers"][0] = {"lat_deg": 40.0, "lon_deg": -3.6}
    loaded = scenario_from_dict(doc)
    assert np.allclose(loaded.network.receivers_m[0],
                       canonical.network.receivers_m[0], atol=1e-6)


def test_scenario_from_dict_validation(canonical):
    base = scenario_to_dict(canonical)

    doc = json.loads(json.dumps(base))
    del doc["network"]["transmitters"][0]["fc_hz"]
    with pytest.raises(ValidationError, match="fc_hz"):
        scenario_from_dict(doc)

    doc = json.loads(json.dumps(base))
    doc["network"]["receivers"][0]["lat_deg"] = 12.0
    with pytest.raises(ValidationError, match="not both"):
        scenario_from_dict(doc)

    doc = json.loads(json.dumps(base))
    del doc["target"]
    with pytest.raises(ValidationError):
        scenario_from_dict(doc)

    with pytest.raises(ValidationError):
        scenario_from_dict({"network": []})


def test_load_scenario_bad_file(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(ValidationError):
        load_scenario(str(missing))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError, match="not valid JSON"):
        load_scenario(str(bad))
    array = tmp_path / "array.json"
    array.write_text("[1, 2, 3]")
    with pytest.raises(ValidationError, match="JSON object"):
        load_scenario(str(array))


def test_experiment_from_dict_defaults():
    spec = experiment_from_dict({})
    assert spec == ExperimentSpec()
    spec = experiment_from_dict({"runs": 10}, sigma_grid=(1e-9,))
    assert spec.runs == 10
    assert spec.sigma_grid == (1e-9,)
