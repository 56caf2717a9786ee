import csv
import json

import numpy as np
import pytest

from cli import EXIT_INPUT_ERROR, EXIT_NUMERICAL_FAILURE, EXIT_OK, main
from utils.csv_io import read_matrix_csv, write_matrix_csv
from utils.datasets import planted_spike

SMALL = ["--tile-size", "2", "--parallelism", "2", "--sweeps", "5", "--sparse"]
PCA_OUTPUTS = [
    "eigenvalues.csv",
    "evcr_cvcr.csv",
    "projection.csv",
    "convergence.csv",
    "cache_stats.csv",
    "perf.csv",
    "pass_trace.csv",
    "run_manifest.json",
]


def _rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _manifest(out):
    return json.loads((out / "run_manifest.json").read_text())


@pytest.fixture
def data_csv(tmp_path):
    return write_matrix_csv(tmp_path / "data.csv", planted_spike(24, 6, factors=2, seed=5))


def test_pca_writes_every_output(tmp_path, data_csv):
    out = tmp_path / "out"
    assert main(["pca", str(data_csv), "--out", str(out), "--select", "k:2"] + SMALL) == EXIT_OK
    for name in PCA_OUTPUTS:
        assert (out / name).exists(), name
    projection = _rows(out / "projection.csv")
    assert list(projection[0]) == ["pc1", "pc2"]
    assert len(projection) == 24
    assert [r["phase"] for r in _rows(out / "perf.csv")] == ["covariance", "jacobi", "projection", "total"]
    assert {r["dataset"] for r in _rows(out / "convergence.csv")} == {"data.csv"}
    manifest = _manifest(out)
    assert manifest["command"] == "pca"
    assert manifest["k"] == 2
    assert manifest["config"]["t"] == 2
    assert manifest["config"]["sparse_rotations"] is True
    assert set(manifest["versions"]) == {"manojavam", "numpy", "pydantic", "python"}


def test_pca_is_byte_for_byte_deterministic(tmp_path, data_csv):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["pca", str(data_csv), "--out", str(first)] + SMALL) == EXIT_OK
    assert main(["pca", str(data_csv), "--out", str(second), "--threads", "2"] + SMALL) == EXIT_OK
    for name in PCA_OUTPUTS:
        if name == "run_manifest.json":
            continue
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_empty_input_fails_without_outputs(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    out = tmp_path / "out"
    assert main(["pca", str(empty), "--out", str(out)]) == EXIT_INPUT_ERROR
    assert not out.exists()


def test_malformed_input_is_an_input_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,oops\n")
    assert main(["pca", str(bad), "--out", str(tmp_path / "out")]) == EXIT_INPUT_ERROR


def test_bad_selection_is_an_input_error(tmp_path, data_csv):
    assert main(["pca", str(data_csv), "--out", str(tmp_path / "out"), "--select", "top:3"]) == EXIT_INPUT_ERROR


def test_plan_only_counts_passes(tmp_path):
    out = tmp_path / "plan"
    argv = ["matmul", "--plan-only", "--lhs-shape", "1024x1000", "--rhs-shape", "1000x1024",
            "--tile-size", "4", "--parallelism", "8", "--out", str(out)]
    assert main(argv) == EXIT_OK
    plan = _manifest(out)["plan"]
    assert plan == {"row_blocks": 256, "column_blocks": 256, "tiles_per_block": 250, "passes": 8192}
    trace = _rows(out / "pass_trace.csv")
    assert len(trace) == 8192
    assert trace[1]["column_blocks"] == "8 9 10 11 12 13 14 15"


def test_plan_only_needs_shapes(tmp_path):
    assert main(["matmul", "--plan-only", "--out", str(tmp_path)]) == EXIT_INPUT_ERROR
    argv = ["matmul", "--plan-only", "--lhs-shape", "4x3", "--rhs-shape", "4x3", "--out", str(tmp_path)]
    assert main(argv) == EXIT_INPUT_ERROR


def test_identity_matmul(tmp_path):
    a = np.arange(1, 10, dtype=np.float64).reshape(3, 3)
    a_csv = write_matrix_csv(tmp_path / "a.csv", a)
    eye_csv = write_matrix_csv(tmp_path / "eye.csv", np.eye(3))
    out = tmp_path / "out"
    assert main(["matmul", str(a_csv), str(eye_csv), "--verify", "--out", str(out)] + SMALL) == EXIT_OK
    assert np.array_equal(read_matrix_csv(out / "product.csv"), a)
    assert _manifest(out)["oracle_max_abs_error"] == 0.0
    assert len(_rows(out / "cache_stats.csv")) == 3


def test_fixed_path_matmul(tmp_path):
    a_csv = write_matrix_csv(tmp_path / "a.csv", np.array([[0.5, 1.25], [-2.0, 3.0]]))
    out = tmp_path / "out"
    argv = ["matmul", str(a_csv), str(a_csv), "--path", "fixed", "--q-format", "16.16", "--verify", "--out", str(out)]
    assert main(argv + SMALL) == EXIT_OK
    assert _manifest(out)["oracle_max_abs_error"] < 1e-4


def test_estimate_for_a_benchmark_dataset(tmp_path):
    out = tmp_path / "out"
    argv = ["estimate", "--dataset", "digits-8x8", "--tile-size", "4", "--parallelism", "8",
            "--power-w", "1.271", "--out", str(out)]
    assert main(argv) == EXIT_OK
    manifest = _manifest(out)
    assert manifest["batches"] == 899
    assert manifest["passes"] == 32
    assert manifest["energy_j"] == pytest.approx(1.271 * manifest["wall_time_s"])
    assert _rows(out / "perf.csv")[-1]["phase"] == "total"


def test_estimate_needs_dims(tmp_path):
    assert main(["estimate", "--records", "100", "--out", str(tmp_path)]) == EXIT_INPUT_ERROR


def test_convergence_on_a_diagonal_matrix(tmp_path):
    diag = write_matrix_csv(tmp_path / "diag.csv", np.diag([4.0, 2.0, 1.0]))
    out = tmp_path / "out"
    assert main(["convergence", str(diag), "--symmetric", "--sweeps", "3", "--sparse", "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "convergence.csv")
    assert [r["sweep"] for r in rows] == ["0", "1", "2", "3"]
    assert all(float(r["e_off"]) == 0.0 for r in rows)
    assert _manifest(out)["datasets"]["diag.csv"]["sweeps_executed"] == 3


def test_saturation_storm_exits_with_numerical_failure(tmp_path):
    c = write_matrix_csv(tmp_path / "c.csv", np.array([[7.0, 6.0], [6.0, 7.0]]))
    argv = ["convergence", str(c), "--symmetric", "--path", "fixed", "--q-format", "4.4",
            "--saturation-limit", "1", "--sparse", "--out", str(tmp_path / "out")]
    assert main(argv) == EXIT_NUMERICAL_FAILURE


def test_dse_and_bottleneck(tmp_path):
    out = tmp_path / "dse"
    argv = ["dse", "--records", "16", "--features", "8", "--t-values", "2,4", "--s-values", "1,2", "--out", str(out)]
    assert main(argv) == EXIT_OK
    assert len(_rows(out / "dse.csv")) == 24
    assert set(_manifest(out)["verdicts"]) == {"nonincreasing_in_s", "nonincreasing_in_t"}

    out = tmp_path / "bottleneck"
    assert main(["bottleneck", "--out", str(out)]) == EXIT_OK
    assert {r["regime"] for r in _rows(out / "bottleneck.csv")} == {"constant-rows", "constant-features"}


def test_generate(tmp_path):
    argv = ["generate", "planted-spike", "--records", "20", "--features", "4", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    assert read_matrix_csv(tmp_path / "planted-spike.csv").shape == (20, 4)
