import io
import re
import subprocess
import sys

import numpy as np
import pytest

from sparse_gica.cli import main, read_config
from sparse_gica.matrix_io import read_matrix, write_matrix
from sparse_gica.model import derive_rng, population_covariance, sample_bg


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if re.match(r"^\w+=", line))


def test_gen_writes_files(tmp_path):
    code, text = run("gen", "--r", "30", "--s", "10", "--theta", "0.2", "--n", "50", "--seed", "4",
                     "--write-data", "--out-dir", str(tmp_path))
    assert code == 0
    A = read_matrix(tmp_path / "A.txt")
    assert A.shape == (30, 10)
    assert np.array_equal(read_matrix(tmp_path / "Sigma.txt"), population_covariance(A).matrix)
    assert read_matrix(tmp_path / "X.txt").shape == (30, 50)
    assert read_matrix(tmp_path / "Sigma_bar.txt").shape == (30, 30)
    assert kv(text)["files"] == "A.txt,Sigma.txt,X.txt,Sigma_bar.txt"


def test_recover_population_round_trip(tmp_path):
    A = sample_bg(1000, 5, 0.03, derive_rng(0, "A"))
    write_matrix(tmp_path / "S.txt", population_covariance(A).matrix)
    code, _ = run("recover", "--sigma", str(tmp_path / "S.txt"), "--kind", "population",
                  "--out", str(tmp_path / "Ah.txt"), "--log", str(tmp_path / "log.csv"))
    assert code == 0
    write_matrix(tmp_path / "A.txt", A)
    code, text = run("dist", "--A-hat", str(tmp_path / "Ah.txt"), "--A", str(tmp_path / "A.txt"))
    assert code == 0
    assert float(text.splitlines()[0].split("=")[1]) <= 1e-9
    assert text.splitlines()[1] == "a_hat_column,a_column,sign,cost"
    log = (tmp_path / "log.csv").read_text().splitlines()
    assert log[0] == "iteration,i1,i2,accepted,L_size,reason"
    assert len(log) >= 6


def test_recover_not_converged_exit_code(tmp_path):
    A = sample_bg(1000, 5, 0.03, derive_rng(0, "A"))
    write_matrix(tmp_path / "S.txt", population_covariance(A).matrix)
    code, text = run("recover", "--sigma", str(tmp_path / "S.txt"), "--kind", "population", "--max-iter", "1")
    assert code == 2
    assert text.startswith("1000 1\n")


def test_short_option_not_taken_for_config(tmp_path):
    S = population_covariance(sample_bg(20, 20, 0.2, derive_rng(1, "A"))).matrix
    write_matrix(tmp_path / "S.txt", S)
    code, _ = run("recover", "--sigma", str(tmp_path / "S.txt"), "--kind", "empirical", "--n", "100",
                  "--c", "0.01", "--eps", "0.05", "--max-iter", "5")
    assert code in (0, 2)


def test_check_output(tmp_path):
    A = np.zeros((11, 2))
    A[0:10, 0] = 1.0
    A[[0, 10], 1] = 1.0
    write_matrix(tmp_path / "A.txt", A)
    code, text = run("check", "--A", str(tmp_path / "A.txt"), "--h", "3")
    assert code == 0
    lines = text.splitlines()
    summary = kv(text)
    assert summary["oc_h"] == "3" and summary["oc_pass"] == "false"
    assert summary["nonempty_columns"] == "2"
    i = lines.index("j,support_size,m,deep_count,oc_margin")
    assert lines[i + 1] == "0,10,1,10,1"


def test_sweep_writes_csv(tmp_path):
    code, _ = run("sweep", "--alpha-list", "0.6,0.8", "--beta-list", "0.5", "--s", "20", "--trials", "2",
                  "--out", str(tmp_path / "cells.csv"), "--trials-out", str(tmp_path / "trials.csv"))
    assert code == 0
    cells = (tmp_path / "cells.csv").read_text().splitlines()
    assert cells[0] == "# sparse-gica-sweep/1"
    assert len(cells) == 4
    assert len((tmp_path / "trials.csv").read_text().splitlines()) == 6


def test_bounds_evaluation():
    code, text = run("bounds", "--kind", "okamoto", "--n", "600", "--p", "0.5", "--eps", "0.1")
    assert code == 0
    assert float(kv(text)["upper_tail"]) == pytest.approx(np.exp(-2))
    code, text = run("bounds", "--kind", "plan", "--sigma-inf", "1", "--eps", "0.1", "--r", "10", "--delta", "1")
    assert code == 0 and kv(text)["n"] == str(int(np.ceil(36 * np.log(10) / 0.01)))
    code, text = run("bounds", "--kind", "row-norm", "--r", "1000", "--s", "10", "--theta", "0.1")
    assert kv(text)["probability_capped"] == "1"


def test_bounds_validate():
    code, text = run("bounds", "--validate")
    assert code == 0
    rows = text.splitlines()
    assert rows[0].startswith("name,trials,observed,allowed,passed")
    assert all(",pass," in row for row in rows[1:])


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# instance\nr = 12\ns=4\ntheta = 0.5\nout-dir = %s\nseed = 1\n" % (tmp_path / "a"))
    assert read_config(cfg)["out_dir"] == str(tmp_path / "a")
    assert run("--config", str(cfg), "gen")[0] == 0
    assert run("--config", str(cfg), "gen", "--seed", "2", "--out-dir", str(tmp_path / "b"))[0] == 0
    assert run("gen", "--r", "12", "--s", "4", "--theta", "0.5", "--seed", "1", "--out-dir", str(tmp_path / "c"))[0] == 0
    a, b, c = (read_matrix(tmp_path / d / "A.txt") for d in "abc")
    assert np.array_equal(a, c) and not np.array_equal(a, b)


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["recover"],
    ["gen", "--r", "x", "--s", "3", "--theta", "0.1"],
    ["gen", "--r", "3", "--s", "3"],
    ["bounds", "--kind", "okamoto", "--n", "5"],
    ["bounds", "--kind", "okamoto", "--n", "5", "--p", "0.9", "--eps", "0.1"],
    ["recover", "--sigma", "/nonexistent/file.txt"],
    ["sweep", "--alpha-list", "a,b", "--beta-list", "0.5", "--s", "10"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert run(*argv)[0] == 1


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run("--config", str(cfg), "gen", "--r", "3", "--s", "3", "--theta", "0.1")[0] == 1


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sparse_gica.cli", "bounds", "--kind", "binomial-range",
                           "--n", "400", "--p", "0.1", "--delta", "0.36787944117144233"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("low=28")
