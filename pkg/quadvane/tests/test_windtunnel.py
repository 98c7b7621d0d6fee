import csv
import io

import numpy as np
import pytest

from quadvane.models.sensor import LobeCoefficients
from quadvane.models.sweep import NoiseModel, SweepRecord
from quadvane.sensor_model import default_config
from quadvane.utils.error_handler import ConfigValidationError, DomainError, SchemaError
from quadvane.windtunnel import (
    SWEEP_HEADER, angle_plot_csv, apply_noise, export_csv, fig7_dataset, fig8_dataset, import_csv, run_sweep,
    speed_plot_csv,
)

ANGLES = [float(a) for a in range(0, 360, 45)]
SPEEDS = [15.0, 20.0, 25.0, 30.0]


@pytest.fixture
def config():
    return default_config()


@pytest.fixture
def noisy():
    return NoiseModel(gaussian_sigma=5e-4, quantization_step=1e-4, seed=42)


# --- Sweeps ---

def test_sweep_grid_size_and_order(config, noisy):
    records = run_sweep(config, ANGLES, SPEEDS, noisy)
    assert len(records) == 32
    assert [(r.angle_travel_deg, r.v_true_m_per_s) for r in records[:5]] == [
        (0.0, 15.0), (0.0, 20.0), (0.0, 25.0), (0.0, 30.0), (45.0, 15.0)]


def test_sweep_sorts_unordered_inputs(config, noisy):
    records = run_sweep(config, [90.0, 0.0], [20.0, 10.0], NoiseModel.noiseless())
    assert [(r.angle_travel_deg, r.v_true_m_per_s) for r in records] == [
        (0.0, 10.0), (0.0, 20.0), (90.0, 10.0), (90.0, 20.0)]
    shuffled = export_csv(run_sweep(config, [90.0, 0.0], [20.0, 10.0], noisy, workers=3))
    assert shuffled == export_csv(run_sweep(config, [0.0, 90.0], [10.0, 20.0], noisy))


def test_sweep_orders_angles_after_normalization(config):
    records = run_sweep(config, [400.0, 10.0], [10.0], NoiseModel.noiseless())
    assert [r.angle_travel_deg for r in records] == [10.0, 40.0]


def test_replicates_follow_speed(config, noisy):
    records = run_sweep(config, [0.0, 90.0], [10.0], noisy, replicates=3)
    assert [(r.angle_travel_deg, r.replicate) for r in records] == [
        (0.0, 0), (0.0, 1), (0.0, 2), (90.0, 0), (90.0, 1), (90.0, 2)]
    assert records[0].dR != records[1].dR
    assert records[0].dR_clean == records[1].dR_clean


def test_noiseless_sweep_reads_clean_values(config):
    for r in run_sweep(config, ANGLES, SPEEDS, NoiseModel.noiseless()):
        assert r.dR == r.dR_clean


def test_angle_fields_are_consistent(config, noisy):
    for r in run_sweep(config, [-45.0, 0.0, 200.0, 400.0], [10.0], noisy):
        assert 0.0 <= r.angle_travel_deg < 360.0
        assert r.angle_from_deg == pytest.approx((r.angle_travel_deg + 180.0) % 360.0)


def test_same_seed_gives_identical_csv(config, noisy):
    first = export_csv(run_sweep(config, ANGLES, SPEEDS, noisy))
    second = export_csv(run_sweep(config, ANGLES, SPEEDS, noisy))
    assert first == second


def test_worker_count_does_not_change_output(config, noisy):
    serial = export_csv(run_sweep(config, ANGLES, SPEEDS, noisy, workers=1))
    parallel = export_csv(run_sweep(config, ANGLES, SPEEDS, noisy, workers=4))
    assert serial == parallel


def test_different_seed_changes_noise(config, noisy):
    a = run_sweep(config, ANGLES, SPEEDS, noisy)
    b = run_sweep(config, ANGLES, SPEEDS, noisy.model_copy(update={"seed": 43}))
    assert [r.dR for r in a] != [r.dR for r in b]


def test_sweep_rejects_invalid_config(config, noisy):
    bad = config.with_lobe(LobeCoefficients(a0=1.0, a1=2.5, a2=0.9))
    with pytest.raises(ConfigValidationError):
        run_sweep(bad, ANGLES, SPEEDS, noisy)


@pytest.mark.parametrize("angles,speeds,replicates", [
    ([float("nan")], [10.0], 1),
    ([0.0], [float("inf")], 1),
    ([0.0], [-1.0], 1),
    ([0.0], [10.0], 0),
])
def test_sweep_rejects_bad_grids(config, noisy, angles, speeds, replicates):
    with pytest.raises(DomainError):
        run_sweep(config, angles, speeds, noisy, replicates=replicates)


# --- Noise model ---

def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(gaussian_sigma=-1e-4)
    with pytest.raises(ValueError):
        NoiseModel(quantization_step=float("nan"))
    with pytest.raises(ValueError):
        NoiseModel(seed=-1)
    assert NoiseModel.noiseless(seed=3).is_noiseless


def test_noise_depends_only_on_seed_and_index():
    noise = NoiseModel(gaussian_sigma=1e-3, quantization_step=0.0, seed=7)
    clean = (0.1, 0.2, 0.3, 0.4)
    assert apply_noise(clean, noise, 5) == apply_noise(clean, noise, 5)
    assert apply_noise(clean, noise, 5) != apply_noise(clean, noise, 6)


def test_quantization_gives_exact_multiples(config):
    step = 1e-4
    records = run_sweep(config, ANGLES, SPEEDS, NoiseModel(gaussian_sigma=0.0, quantization_step=step, seed=1))
    for r in records:
        for x in r.dR:
            assert x == round(x / step) * step


@pytest.mark.slow
def test_noise_statistics(config):
    sigma = 1e-3
    noise = NoiseModel(gaussian_sigma=sigma, quantization_step=0.0, seed=2024)
    angles = [float(a) for a in range(0, 360, 1)]
    speeds = [float(v) for v in range(0, 70)]
    records = run_sweep(config, angles, speeds, noise)
    errors = np.array([np.subtract(r.dR, r.dR_clean) for r in records]).ravel()
    assert errors.size >= 100_000
    assert abs(errors.mean()) <= 3 * sigma / np.sqrt(errors.size)
    assert errors.std(ddof=1) == pytest.approx(sigma, rel=0.02)


# --- Datasets ---

def test_speed_sweep_dataset(config):
    records = fig7_dataset(config, NoiseModel.noiseless())
    assert len(records) == 2 * 91
    by_angle = {135.0: [], 180.0: []}
    for r in records:
        by_angle[r.angle_travel_deg].append(r)
    for r in by_angle[135.0] + by_angle[180.0]:
        if r.v_true_m_per_s == 0.0:
            assert r.dR == (0.0, 0.0, 0.0, 0.0)
    sums = {a: np.array([sum(r.dR) for r in rs]) for a, rs in by_angle.items()}
    np.testing.assert_allclose(sums[135.0], sums[180.0], rtol=1e-12)
    assert np.all(np.diff(sums[180.0]) > 0)


def test_angle_sweep_dataset(config):
    records = fig8_dataset(config, NoiseModel.noiseless())
    assert len(records) == 288
    for r in records:
        if r.angle_travel_deg == 180.0:
            assert int(np.argmax(r.dR)) == 2
        if r.angle_travel_deg % 90.0 == 0.0:
            down = int(r.angle_travel_deg // 90.0)
            for side in ((down + 1) % 4, (down + 3) % 4):
                assert r.dR[side] <= 0.15 * r.dR[down]


# --- CSV ---

def test_empty_export_is_header_only():
    assert export_csv([]) == ",".join(SWEEP_HEADER) + "\n"


def test_export_line_count(config, noisy):
    text = export_csv(run_sweep(config, ANGLES, SPEEDS, noisy))
    assert len(text.splitlines()) == 33


def test_import_inverts_export(config, noisy):
    records = run_sweep(config, ANGLES, SPEEDS, noisy, replicates=2)
    assert import_csv(export_csv(records)) == records


def test_shuffled_columns_parse_identically(config, noisy):
    text = export_csv(run_sweep(config, ANGLES, SPEEDS, noisy))
    rows = list(csv.DictReader(io.StringIO(text)))
    shuffled = list(reversed(SWEEP_HEADER))
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=shuffled, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    assert import_csv(out.getvalue()) == import_csv(text)


def test_import_reports_missing_column(config, noisy):
    text = export_csv(run_sweep(config, [0.0], [10.0], noisy))
    broken = text.replace("dR90_ohm,", "", 1)
    with pytest.raises(SchemaError) as excinfo:
        import_csv(broken)
    assert excinfo.value.column == "dR90_ohm"
    assert excinfo.value.row == 1


def test_import_reports_unknown_and_duplicate_columns(config, noisy):
    text = export_csv(run_sweep(config, [0.0], [10.0], noisy))
    header, body = text.split("\n", 1)
    with pytest.raises(SchemaError, match="unknown column"):
        import_csv(header + ",extra\n" + body.replace("\n", ",1\n"))
    with pytest.raises(SchemaError, match="duplicate columns"):
        import_csv(header + ",replicate\n" + body.replace("\n", ",0\n"))


def test_import_reports_bad_cell(config, noisy):
    text = export_csv(run_sweep(config, [0.0, 90.0], [10.0], noisy))
    lines = text.splitlines()
    cells = lines[2].split(",")
    cells[4] = "n/a"
    lines[2] = ",".join(cells)
    with pytest.raises(SchemaError) as excinfo:
        import_csv("\n".join(lines) + "\n")
    assert excinfo.value.row == 3
    assert excinfo.value.column == "dR90_ohm"


def test_import_rejects_inconsistent_angles(config, noisy):
    text = export_csv(run_sweep(config, [0.0], [10.0], noisy))
    header, row = text.splitlines()
    cells = row.split(",")
    cells[1] = "90"
    with pytest.raises(SchemaError, match="inconsistent record"):
        import_csv(header + "\n" + ",".join(cells) + "\n")


def test_import_rejects_empty_text():
    with pytest.raises(SchemaError, match="missing header"):
        import_csv("")


# --- Plot data ---

def test_plot_data_shapes(config):
    records = run_sweep(config, ANGLES, [20.0], NoiseModel.noiseless())
    angle_rows = angle_plot_csv(records).splitlines()
    assert angle_rows[0] == "v_m_per_s,angle_travel_deg,beam_azimuth_deg,dR_ohm"
    assert len(angle_rows) == 1 + 4 * len(records)
    speed_rows = speed_plot_csv(records).splitlines()
    assert len(speed_rows) == 1 + len(records)
    assert isinstance(records[0], SweepRecord)
