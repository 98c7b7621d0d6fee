import numpy as np
import pytest

from quadvane.estimation import (
    build_calibration, calibration_from_csv, calibration_to_csv, default_calibration, direction_threshold,
    estimate_direction, estimate_speed, fit_lobe, joint_estimate,
)
from quadvane.models.estimate import CalibrationTable
from quadvane.models.response import ResponseVector
from quadvane.models.sensor import FlowCondition, LobeCoefficients
from quadvane.models.sweep import NoiseModel
from quadvane.sensor_model import default_config
from quadvane.transduction import forward_response, response_gains
from quadvane.utils.error_handler import (
    DomainError, FitError, IndeterminateDirectionError, ModelViolationError, SchemaError,
)
from quadvane.windtunnel import fig8_dataset, run_sweep

DENSE_GRID = np.linspace(0.0, 45.0, 4501)


@pytest.fixture
def config():
    return default_config()


@pytest.fixture
def dense_table(config):
    return build_calibration(config, DENSE_GRID)


def _reading(config, speed, angle):
    return forward_response(config, FlowCondition(speed_m_per_s=speed, travel_azimuth_deg=angle))


def _angle_error(a, b):
    return abs((a - b + 180.0) % 360.0 - 180.0)


# --- Direction ---

def test_symmetric_reading_points_along_first_beam(config):
    response = ResponseVector(dR=(2.7, 1.0, 1.1, 1.0), base_R=212.0)
    assert estimate_direction(response, config.lobe) == 0.0


def test_direction_of_forward_reading(config):
    assert estimate_direction(_reading(config, 20.0, 30.0), config.lobe) == pytest.approx(30.0, abs=1e-6)


def test_direction_equal_readings_are_indeterminate(config):
    response = ResponseVector(dR=(0.5, 0.5, 0.5, 0.5), base_R=212.0)
    with pytest.raises(IndeterminateDirectionError) as excinfo:
        estimate_direction(response, config.lobe)
    assert excinfo.value.magnitude == 0.0


def test_direction_needs_positive_a1():
    with pytest.raises(DomainError):
        estimate_direction(ResponseVector(dR=(1.0, 0.5, 0.2, 0.5), base_R=212.0),
                           LobeCoefficients(a0=1.0, a1=0.0, a2=0.9))


def test_direction_is_scale_invariant(config):
    response = _reading(config, 17.0, 211.0)
    scaled = ResponseVector(dR=tuple(3.5 * x for x in response.dR), base_R=response.base_R)
    assert estimate_direction(scaled, config.lobe) == pytest.approx(estimate_direction(response, config.lobe),
                                                                    abs=1e-9)


def test_direction_round_trip_over_full_turn(config):
    for speed in (15.0, 20.0, 25.0, 30.0):
        for angle in range(360):
            theta = estimate_direction(_reading(config, speed, float(angle)), config.lobe)
            assert _angle_error(theta, angle) <= 1e-6


def test_direction_threshold_follows_noise():
    assert direction_threshold(None) == 1e-12
    assert direction_threshold(NoiseModel.noiseless()) == 1e-12
    assert direction_threshold(NoiseModel(gaussian_sigma=2e-3)) == pytest.approx(6e-3)


# --- Calibration and speed ---

def test_calibration_knots(config):
    table = build_calibration(config, (0.0, 10.0, 20.0, 30.0, 45.0))
    assert len(table.knots) == 5
    assert table.knots[0] == (0.0, 0.0)
    assert table.max_speed == 45.0


def test_calibration_is_direction_independent(config):
    grid = (0.0, 10.0, 20.0, 30.0, 45.0)
    a = build_calibration(config, grid, angle_deg=180.0)
    b = build_calibration(config, grid, angle_deg=135.0)
    np.testing.assert_allclose(a.sums, b.sums, rtol=1e-12)


def test_calibration_sum_matches_lobe_mean(config):
    table = build_calibration(config, (0.0, 20.0))
    gain = response_gains(config)[0]
    assert table.sums[1] == pytest.approx(4.0 * config.lobe.a0 * gain * 400.0, rel=1e-12)


@pytest.mark.parametrize("grid", [(0.0, 20.0, 10.0), (5.0, 10.0), (0.0,), (0.0, 10.0, 10.0)])
def test_calibration_rejects_bad_grids(config, grid):
    with pytest.raises(DomainError):
        build_calibration(config, grid)


def test_calibration_rejects_non_monotone_response(config):
    flat = config.model_copy(update={"env": config.env.model_copy(update={"speed_exponent": 0.0})})
    with pytest.raises(ModelViolationError):
        build_calibration(flat, (0.0, 10.0, 20.0))


def test_calibration_table_invariants():
    with pytest.raises(ValueError):
        CalibrationTable(knots=((0.0, 0.0), (1.0, 2.0), (2.0, 1.0)))
    with pytest.raises(ValueError):
        CalibrationTable(knots=((1.0, 1.0), (2.0, 2.0)))
    with pytest.raises(ValueError):
        CalibrationTable(knots=((0.0, 0.0), (1.0, 1.0)), interpolation="cubic")


def test_zero_reading_gives_zero_speed(dense_table):
    assert estimate_speed(ResponseVector(dR=(0.0, 0.0, 0.0, 0.0), base_R=212.0), dense_table).v_hat == 0.0


def test_speed_round_trip_dense_grid(config, dense_table):
    estimate = estimate_speed(_reading(config, 17.3, 77.0), dense_table)
    assert estimate.v_hat == pytest.approx(17.3, abs=1e-6)
    assert not estimate.out_of_range_speed


def test_bisect_agrees_with_linear(config, dense_table):
    response = _reading(config, 31.7, 12.0)
    linear = estimate_speed(response, dense_table).v_hat
    assert estimate_speed(response, dense_table, method="bisect").v_hat == pytest.approx(linear, abs=1e-9)


def test_unknown_inversion_method(config, dense_table):
    with pytest.raises(DomainError):
        estimate_speed(_reading(config, 10.0, 0.0), dense_table, method="spline")


def test_speed_round_trip_coarse_grid(config):
    table = build_calibration(config, np.arange(0.0, 46.0, 1.0))
    for v in np.arange(3.0, 45.0, 0.5):
        estimate = estimate_speed(_reading(config, float(v), 135.0), table)
        assert estimate.v_hat == pytest.approx(v, abs=0.05)


def test_speed_beyond_table_is_clamped(config, dense_table, caplog):
    estimate = estimate_speed(_reading(config, 50.0, 180.0), dense_table)
    assert estimate.v_hat == 45.0
    assert estimate.out_of_range_speed
    assert "beyond calibration maximum" in caplog.text


@pytest.mark.parametrize("dR, base_R, message", [
    ((float("nan"), 0.0, 0.0, 0.0), 212.0, "dR entries must be finite"),
    ((0.0, float("inf"), 0.0, 0.0), 212.0, "dR entries must be finite"),
    ((0.1, 0.0, 0.0, 0.0), 0.0, "base_R must be finite and > 0"),
    ((0.1, 0.0, 0.0, 0.0), -212.0, "base_R must be finite and > 0"),
])
def test_response_vector_rejects_bad_values(dR, base_R, message):
    with pytest.raises(ValueError, match=message):
        ResponseVector(dR=dR, base_R=base_R)


def test_default_calibration_is_cached(config):
    assert default_calibration(config) is default_calibration(config)
    assert default_calibration(config).max_speed == 45.0


# --- Lobe fitting ---

def test_fit_recovers_lobe_without_noise(config):
    fit = fit_lobe(fig8_dataset(config, NoiseModel.noiseless()))
    assert fit.lobe.a0 == 1.0
    assert fit.lobe.a1 == pytest.approx(0.8, abs=1e-9)
    assert fit.lobe.a2 == pytest.approx(0.9, abs=1e-9)
    assert sorted(fit.k_by_speed) == [15.0, 20.0, 25.0, 30.0]
    gain = response_gains(config)[0]
    assert fit.k_by_speed[20.0] == pytest.approx(gain * 400.0, rel=1e-9)
    assert fit.residual < 1e-12


def test_fit_with_noise_stays_close(config):
    sigma = 0.01 * max(max(r.dR) for r in run_sweep(config, [0.0], [30.0], NoiseModel.noiseless()))
    fit = fit_lobe(fig8_dataset(config, NoiseModel(gaussian_sigma=sigma, quantization_step=0.0, seed=5)))
    assert fit.lobe.a1 == pytest.approx(0.8, rel=0.05)
    assert fit.lobe.a2 == pytest.approx(0.9, rel=0.05)
    assert fit.residual == pytest.approx(sigma, rel=0.2)


def test_fit_needs_angular_coverage(config):
    records = run_sweep(config, [0.0, 90.0, 180.0], [20.0], NoiseModel.noiseless())
    with pytest.raises(FitError, match="insufficient angular coverage"):
        fit_lobe(records)


def test_fit_skips_zero_speed(config):
    records = run_sweep(config, [float(a) for a in range(0, 360, 30)], [0.0, 20.0], NoiseModel.noiseless())
    fit = fit_lobe(records)
    assert list(fit.k_by_speed) == [20.0]
    with pytest.raises(FitError, match="no speed"):
        fit_lobe([r for r in records if r.v_true_m_per_s == 0.0])


@pytest.mark.parametrize("seed", range(10))
def test_fit_ignores_noisy_zero_speed(config, seed):
    angles = [float(a) for a in range(0, 360, 5)]
    noise = NoiseModel(gaussian_sigma=5e-4, quantization_step=1e-4, seed=seed)
    fit = fit_lobe(run_sweep(config, angles, [0.0, 15.0, 20.0, 25.0, 30.0], noise))
    assert 0.0 not in fit.k_by_speed
    assert sorted(fit.k_by_speed) == [15.0, 20.0, 25.0, 30.0]
    assert fit.lobe.a1 == pytest.approx(0.8, rel=0.02)
    assert fit.lobe.a2 == pytest.approx(0.9, rel=0.02)


def test_fit_weights_speeds_by_response(config):
    angles = [float(a) for a in range(0, 360, 5)]
    clean = run_sweep(config, angles, [30.0], NoiseModel.noiseless())
    weak = run_sweep(config, angles, [1.0], NoiseModel(gaussian_sigma=2e-4, quantization_step=0.0, seed=3))
    fit = fit_lobe(clean + weak)
    assert fit.lobe.a1 == pytest.approx(0.8, rel=1e-3)
    assert fit.lobe.a2 == pytest.approx(0.9, rel=1e-3)


# --- Joint estimate ---

def test_joint_estimate_noiseless(config):
    response = _reading(config, 23.4, 212.5)
    result = joint_estimate(response, config)
    assert result.v_hat == pytest.approx(23.4, abs=1e-6)
    assert _angle_error(result.theta_hat, 212.5) <= 1e-6
    assert result.residual <= 1e-12 * np.linalg.norm(response.dR)
    assert result.converged
    assert result.flags == ()


def test_joint_estimate_zero_reading(config):
    result = joint_estimate(ResponseVector(dR=(0.0, 0.0, 0.0, 0.0), base_R=212.0), config)
    assert result.v_hat == 0.0
    assert result.indeterminate_direction
    assert result.flags == ("indeterminate_direction",)


def test_joint_estimate_flags_out_of_range(config):
    result = joint_estimate(_reading(config, 60.0, 45.0), config)
    assert result.v_hat == 45.0
    assert "out_of_range_speed" in result.flags


def test_joint_estimate_never_worse_than_initial_guess(config):
    clean = _reading(config, 20.0, 100.0)
    rng = np.random.default_rng(9)
    table = default_calibration(config)
    for _ in range(20):
        noisy = ResponseVector(dR=tuple(np.asarray(clean.dR) + rng.normal(0.0, 3e-3, 4)), base_R=clean.base_R)
        v0 = estimate_speed(noisy, table).v_hat
        theta0 = estimate_direction(noisy, config.lobe)
        initial = forward_response(config, FlowCondition(speed_m_per_s=v0, travel_azimuth_deg=theta0)).dR
        initial_rms = float(np.sqrt(np.mean((np.asarray(noisy.dR) - initial) ** 2)))
        assert joint_estimate(noisy, config, table).residual <= initial_rms * (1 + 1e-9)


def test_joint_estimate_uses_physical_azimuths(config):
    beams = list(config.beams)
    beams[1] = beams[1].model_copy(update={"misalignment_deg": 2.0})
    skewed = config.model_copy(update={"beams": tuple(beams)})
    response = _reading(skewed, 20.0, 60.0)
    # quadrature decode assumes the nominal layout and is biased
    assert _angle_error(estimate_direction(response, skewed.lobe), 60.0) > 1e-3
    result = joint_estimate(response, skewed, build_calibration(skewed))
    assert _angle_error(result.theta_hat, 60.0) <= 1e-6
    assert result.v_hat == pytest.approx(20.0, abs=1e-6)


# --- Calibration CSV ---

def test_calibration_csv_round_trip(config):
    table = build_calibration(config, (0.0, 0.5, 20.0, 45.0))
    text = calibration_to_csv(table)
    assert text.splitlines()[0] == "v_m_per_s,sum_dR_ohm"
    assert calibration_from_csv(text) == table


def test_calibration_csv_errors(config):
    text = calibration_to_csv(build_calibration(config, (0.0, 20.0, 45.0)))
    with pytest.raises(SchemaError, match="header"):
        calibration_from_csv(text.replace("sum_dR_ohm", "sum"))
    with pytest.raises(SchemaError) as excinfo:
        calibration_from_csv(text.replace("20,", "twenty,"))
    assert excinfo.value.row == 3
    assert excinfo.value.column == "v_m_per_s"
    lines = text.splitlines()
    with pytest.raises(SchemaError, match="calibration table invalid"):
        calibration_from_csv("\n".join([lines[0], lines[2], lines[1], lines[3]]) + "\n")
