import csv
import io
import json

import pytest

from carousel import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_solve_csv_endpoints(capsys):
    code, out, _ = run(capsys, "solve", "--strategy", "uni-nearest", "--n", "5",
                       "--grid", "2049", "--tol", "1e-8")
    assert code == 0
    table = rows(out)
    assert table[0] == ["x", "F"]
    assert len(table) == 2050
    assert table[1] == ["0", "0"] and table[-1] == ["1", "1"]


def test_solve_writes_summary_next_to_csv(tmp_path, capsys):
    out = tmp_path / "cdf.csv"
    code, stdout, _ = run(capsys, "solve", "--strategy", "bi-nearest", "--n", "3",
                          "--grid", "257", "--out", str(out))
    assert code == 0 and stdout == ""
    summary = json.loads(out.with_suffix(".json").read_text())
    assert set(summary) == {"n", "strategy", "iterations", "residual", "contraction_bound",
                            "aposteriori_error", "mean_sojourn", "throughput"}
    assert summary["strategy"] == "bi-nearest" and summary["n"] == 3
    assert summary["residual"] <= 1e-6
    assert summary["throughput"] == pytest.approx(1 / summary["mean_sojourn"], rel=1e-11)


def test_numbers_have_twelve_significant_digits(capsys):
    _, out, _ = run(capsys, "solve", "--strategy", "bi-shortest", "--n", "3", "--grid", "9")
    for _, value in rows(out)[1:]:
        digits = value.replace("-", "").replace(".", "").split("e")[0].lstrip("0")
        assert len(digits) <= 12


def test_solve_json_single_item(capsys):
    code, out, _ = run(capsys, "solve", "--strategy", "bi-shortest", "--n", "1",
                       "--grid", "5", "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert doc["iterations"] == 0 and doc["aposteriori_error"] is None
    assert doc["columns"] == ["x", "F"]
    assert doc["rows"][0] == [0.0, pytest.approx(0.293407993026)]


def test_identical_runs_are_byte_identical(capsys):
    argv = ("simulate", "--strategy", "bi-gap-fallback", "--n", "4", "--orders", "3000",
            "--warmup", "100", "--reps", "2", "--grid", "65", "--seed", "12")
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_simulate_outputs(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    code, _, _ = run(capsys, "simulate", "--strategy", "uni-nearest", "--pmf", "1:0.5,3:0.5",
                     "--strategy-b", "bi-avoid-gap", "--n-b", "2", "--orders", "4e3",
                     "--warmup", "100", "--reps", "3", "--grid", "33", "--out", str(out))
    assert code == 0
    table = rows(out.read_text())
    assert table[0] == ["x", "F"] and table[-1][1] == "1"
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["orders_a"] == "1:0.5,3:0.5" and summary["orders_b"] == "2"
    assert summary["strategy_b"] == "bi-avoid-gap"
    assert summary["counted_orders"] == 3900 and summary["replications"] == 3


def test_compare_table(capsys):
    code, out, _ = run(capsys, "compare", "--scenario", "balanced",
                       "--strategies", "bi-shortest,bi-avoid-gap", "--n", "2,3",
                       "--orders", "3000", "--reps", "3", "--seed", "4")
    assert code == 0
    table = rows(out)
    assert table[0] == ["strategy", "n", "throughput", "ci_low", "ci_high"]
    assert [(r[0], r[1]) for r in table[1:]] == [
        ("bi-shortest", "2"), ("bi-shortest", "3"), ("bi-avoid-gap", "2"), ("bi-avoid-gap", "3")]
    for r in table[1:]:
        assert float(r[3]) < float(r[2]) < float(r[4])


def test_compare_all_strategies_range(capsys):
    code, out, _ = run(capsys, "compare", "--strategies", "all", "--n", "1..2",
                       "--orders", "500", "--warmup", "10", "--reps", "2", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and len(doc["rows"]) == 14
    assert len(doc["avg_size"]) == 14


def test_convergence_table(capsys):
    code, out, _ = run(capsys, "convergence", "--strategy", "uni-nearest", "--n", "2",
                       "--iterations", "3", "--grid", "5")
    table = rows(out)
    assert code == 0
    assert table[0] == ["iteration", "sup_step", "x", "F_k"]
    assert len(table) == 1 + 4 * 5
    assert table[1] == ["0", "", "0", "0"]
    # the first iterate is 2x - x^2
    assert table[6:11] == [["1", "1", x, f] for x, f in
                           [("0", "0"), ("0.25", "0.4375"), ("0.5", "0.75"),
                            ("0.75", "0.9375"), ("1", "1")]]


def test_solve_variable(capsys):
    code, out, _ = run(capsys, "solve-variable", "--pmf", "1:0.5,3:0.5", "--grid", "65")
    table = rows(out)
    assert code == 0 and table[0] == ["x", "F", "F1", "F3"]
    assert float(table[1][2]) == pytest.approx(2 * float(table[1][1]))


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults for a sweep\nstrategy = bi-shortest\ngrid = 5\nn = 2\n")
    code, out, _ = run(capsys, "solve", "--config", str(cfg))
    assert code == 0 and len(rows(out)) == 6
    code, out, _ = run(capsys, "solve", "--config", str(cfg), "--grid", "9")
    assert code == 0 and len(rows(out)) == 10


@pytest.mark.parametrize("argv", [
    ("solve", "--n", "3"),
    ("solve", "--strategy", "zigzag", "--n", "3"),
    ("solve", "--strategy", "uni-nearest", "--n", "2.5"),
    ("simulate", "--strategy", "uni-nearest", "--n", "2", "--pmf", "2"),
    ("compare", "--n", "0..3"),
    ("frobnicate",),
])
def test_usage_errors(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 1 and out == ""
    record = json.loads(err.strip().splitlines()[-1])
    assert record["exit_code"] == 1 and record["error"] == "usage"


def test_domain_errors_are_usage_errors(capsys):
    code, _, err = run(capsys, "solve", "--strategy", "bi-avoid-gap", "--n", "3")
    assert code == 1 and json.loads(err)["error"] == "domain"
    code, _, err = run(capsys, "simulate", "--strategy", "uni-nearest", "--n", "2",
                       "--orders", "10", "--warmup", "10")
    assert code == 1


def test_bad_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = run(capsys, "solve", "--config", str(cfg), "--strategy", "uni-nearest",
                       "--n", "2")
    assert code == 1 and "colour" in json.loads(err)["message"]


def test_non_convergence_exit_code(capsys):
    code, out, err = run(capsys, "solve", "--strategy", "uni-nearest", "--n", "3",
                         "--max-iter", "2", "--grid", "65")
    record = json.loads(err)
    assert code == 2 and out == ""
    assert record["error"] == "convergence" and record["iterations"] == 2


def test_validation_failure_exit_code(capsys):
    # a few hundred simulated orders cannot meet the KS tolerance
    code, out, err = run(capsys, "validate", "--orders", "300", "--warmup", "10",
                         "--reps", "2", "--grid", "257")
    assert code == 3
    assert rows(out)[0] == ["check", "value", "tolerance", "passed"]
    assert json.loads(err)["failed"]


@pytest.mark.slow
def test_validate_passes(capsys):
    code, out, _ = run(capsys, "validate", "--seed", "7")
    assert code == 0
    assert all(r[3] == "true" for r in rows(out)[1:])
