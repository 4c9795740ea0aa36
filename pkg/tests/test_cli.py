"""End-to-end checks of the command line driver."""

import os

from prismfosls.cli import main


def test_prism_run_writes_csv_and_svg(tmp_path):
    out = tmp_path / "run"
    rc = main(["--problem", "1d-smooth", "--mode", "uniform",
               "--max-dofs", "200", "--out", str(out), "--deterministic"])
    assert rc == 0
    csv = out / "1d-smooth_prism_uniform.csv"
    svg = out / "1d-smooth_prism_uniform.svg"
    assert csv.exists() and svg.exists()
    lines = csv.read_text().strip().splitlines()
    assert lines[0] == "step,dofs,estimator,error_u,wall_time"
    assert all(row.split(",")[-1] == "0" for row in lines[1:])
    assert svg.read_text().lstrip().startswith("<?xml")


def test_deterministic_reruns_are_byte_identical(tmp_path):
    args = ["--problem", "1d-interior-kink", "--mode", "adaptive",
            "--theta", "0.5", "--max-dofs", "300", "--deterministic"]
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    name = "1d-interior-kink_prism_adaptive.csv"
    assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_dumps_written(tmp_path):
    out = tmp_path / "run"
    rc = main(["--problem", "1d-nonmatching", "--mode", "uniform",
               "--max-dofs", "100", "--out", str(out),
               "--dump-mesh", "--dump-matrix"])
    assert rc == 0
    assert (out / "1d-nonmatching_prism_uniform_mesh.txt").exists()
    assert (out / "1d-nonmatching_prism_uniform_matrix.txt").exists()


def test_simplex_baseline_run(tmp_path):
    out = tmp_path / "run"
    rc = main(["--problem", "1d-nonmatching", "--mesh", "simplex",
               "--mode", "adaptive", "--max-dofs", "300",
               "--out", str(out), "--deterministic"])
    assert rc == 0
    assert (out / "1d-nonmatching_simplex_adaptive.csv").exists()


def test_bad_inputs_are_rejected(tmp_path):
    assert main(["--problem", "no-such-problem",
                 "--out", str(tmp_path)]) == 2
    assert main(["--problem", "1d-smooth", "--dim", "2",
                 "--out", str(tmp_path)]) == 2
    assert main(["--problem", "2d-nonmatching", "--mesh", "simplex",
                 "--out", str(tmp_path)]) == 2
