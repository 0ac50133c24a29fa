"""Forward model, noise simulation, and measurement CSV round trips."""

import numpy as np
import pytest

from multistatic_iod.errors import ValidationError
from multistatic_iod.measurement import (MEASUREMENT_COLUMNS, MeasurementSet,
                                         covariance_diagonal, forward_model,
                                         measurement_set,
                                         read_measurements_csv, simulate,
                                         substream, true_delay, true_doppler,
                                         write_measurements_csv)
from multistatic_iod.scenario import NoiseModel, StateVector

# first-pair observables for the built-in scenario, computed separately
# with 50-digit arithmetic
EXPECTED_TAU_11_S = 0.009484586044934820794598
EXPECTED_DOPPLER_11_HZ = -1203.239656680774462645


def test_first_pair_against_reference(canonical):
    tau, dop = forward_model(canonical.network, canonical.target)
    assert tau[0] == pytest.approx(EXPECTED_TAU_11_S, abs=1e-15)
    assert dop[0] == pytest.approx(EXPECTED_DOPPLER_11_HZ, abs=1e-8)


def test_scalar_helpers_match_vectorized(canonical):
    net, truth, _ = canonical
    tau, dop = forward_model(net, truth)
    for i in range(net.m):
        t = net.transmitter_positions_m[i]
        fc = net.carriers_hz[i]
        for j in range(net.n):
            s = net.receivers_m[j]
            k = i * net.n + j
            assert tau[k] == pytest.approx(
                true_delay(truth.position_m, t, s), rel=1e-15)
            assert dop[k] == pytest.approx(
                true_doppler(truth.position_m, truth.velocity_mps, t, s, fc),
                rel=1e-12)


def test_pair_ordering_is_transmitter_major(canonical):
    net, truth, _ = canonical
    tau, _ = forward_model(net, truth)
    # receiver index changes fastest
    k_12 = 0 * net.n + 1
    expected = true_delay(truth.position_m, net.transmitter_positions_m[0],
                          net.receivers_m[1])
    assert tau[k_12] == pytest.approx(expected, rel=1e-15)


def test_delay_positivity_and_physical_scale(canonical):
    tau, _ = forward_model(canonical.network, canonical.target)
    # two legs of at least the target altitude, at most a few thousand km
    assert np.all(tau > 1e-3)
    assert np.all(tau < 0.03)


def test_forward_model_rejects_station_collision(canonical):
    net = canonical.network
    truth = StateVector(net.receivers_m[0], np.array([1.0, 0.0, 0.0]))
    with pytest.raises(ValidationError):
        forward_model(net, truth)


def test_simulate_zero_noise_is_exact(canonical):
    net, truth, _ = canonical
    tau0, dop0 = forward_model(net, truth)
    ms = simulate(net, truth, NoiseModel(sigma_t_s=0.0), run_index=5)
    assert np.array_equal(ms.tau_s, tau0)
    assert np.array_equal(ms.doppler_hz, dop0)
    assert np.all(ms.q_alpha_diag == 0.0)


def test_simulate_determinism(canonical):
    net, truth, noise = canonical
    a = simulate(net, truth, noise, run_index=3)
    b = simulate(net, truth, noise, run_index=3)
    assert np.array_equal(a.tau_s, b.tau_s)
    assert np.array_equal(a.doppler_hz, b.doppler_hz)
    c = simulate(net, truth, noise, run_index=4)
    assert not np.array_equal(a.tau_s, c.tau_s)
    other_seed = NoiseModel(sigma_t_s=noise.sigma_t_s, seed=noise.seed + 1)
    d = simulate(net, truth, other_seed, run_index=3)
    assert not np.array_equal(a.tau_s, d.tau_s)


def test_substream_independence():
    a = substream(7, 0, 0).normal(size=4)
    b = substream(7, 0, 1).normal(size=4)
    c = substream(7, 1, 0).normal(size=4)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.array_equal(a, substream(7, 0, 0).normal(size=4))


def test_noise_statistics_match_model(canonical):
    net, truth, _ = canonical
    noise = NoiseModel(sigma_t_s=1e-8, seed=99)
    tau0, dop0 = forward_model(net, truth)
    tau_dev = []
    dop_dev = []
    for run in range(600):
        ms = simulate(net, truth, noise, run)
        tau_dev.append(ms.tau_s - tau0)
        dop_dev.append(ms.doppler_hz - dop0)
    tau_dev = np.concatenate(tau_dev)
    dop_dev = np.concatenate(dop_dev)
    assert abs(tau_dev.mean()) < 5e-10
    assert tau_dev.std() == pytest.approx(1e-8, rel=0.05)
    assert dop_dev.std() == pytest.approx(np.sqrt(1e11) * 1e-8, rel=0.05)


def test_covariance_diagonal_layout():
    q = covariance_diagonal(NoiseModel(sigma_t_s=2e-9), mn=4)
    assert q.shape == (8,)
    assert np.allclose(q[:4], 4e-18)
    assert np.allclose(q[4:], 1e11 * 4e-18)


def test_measurement_set_validation(canonical):
    net, truth, noise = canonical
    tau0, dop0 = forward_model(net, truth)
    with pytest.raises(ValidationError):
        measurement_set(net, tau0[:-1], dop0, noise)
    with pytest.raises(ValidationError):
        measurement_set(net, -tau0, dop0, noise)
    with pytest.raises(ValidationError):
        measurement_set(net, tau0, np.full_like(dop0, np.nan), noise)
    with pytest.raises(ValidationError):
        MeasurementSet(3, 5, tau0, dop0, np.zeros(30), doppler_variance_scale=0.0)


def test_csv_roundtrip_bit_exact(tmp_path, canonical):
    net, truth, noise = canonical
    ms = simulate(net, truth, noise, 0)
    path = tmp_path / "measurements.csv"
    write_measurements_csv(str(path), ms)
    header = path.read_text().splitlines()[0]
    assert header == ",".join(MEASUREMENT_COLUMNS)
    loaded = read_measurements_csv(str(path), net, noise)
    assert np.array_equal(loaded.tau_s, ms.tau_s)
    assert np.array_equal(loaded.doppler_hz, ms.doppler_hz)
    assert np.array_equal(loaded.q_alpha_diag, ms.q_alpha_diag)


def test_csv_accepts_shuffled_rows(tmp_path, canonical):
    net, truth, noise = canonical
    ms = simulate(net, truth, noise, 1)
    path = tmp_path / "measurements.csv"
    write_measurements_csv(str(path), ms)
    lines = path.read_text().splitlines()
    shuffled = [lines[0]] + lines[:0:-1]
    path.write_text("\n".join(shuffled) + "\n")
    loaded = read_measurements_csv(str(path), net, noise)
    assert np.array_equal(loaded.tau_s, ms.tau_s)


def test_csv_rejects_missing_and_duplicate_pairs(tmp_path, canonical):
    net, truth, noise = canonical
    ms = simulate(net, truth, noise, 2)
    path = tmp_path / "measurements.csv"
    write_measurements_csv(str(path), ms)
    lines = path.read_text().splitlines()

    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValidationError):
        read_measurements_csv(str(path), net, noise)

    path.write_text("\n".join(lines + [lines[-1]]) + "\n")
    with pytest.raises(ValidationError):
        read_measurements_csv(str(path), net, noise)

    bad = lines[:]
    bad[1] = bad[1].replace("1,1", "9,1", 1)
    path.write_text("\n".join(bad) + "\n")
    with pytest.raises(ValidationError):
        read_measurements_csv(str(path), net, noise)
