import csv
import json

import pytest

from graphnls.main import build_parser, config_from_args, main


def _read_csv(path):
    with path.open() as fh:
        return list(csv.reader(fh))


def test_analyze_writes_report_and_tables(tmp_path):
    code = main(["analyze", "--graph", "catalog:tadpole", "--p", "4", "--h", "0.05", "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "analyze_report.json").read_text())
    assert report["command"] == "analyze"
    assert report["graph"] == "tadpole"
    assert report["terminal_edges"] == [1]
    assert len(report["config_hash"]) == 64

    eigen = _read_csv(tmp_path / "eigenpairs.csv")
    assert eigen[0] == ["index", "eigenvalue", "residual"]
    assert len(eigen) == 7
    assert abs(float(eigen[1][1])) < 1e-8
    assert float(eigen[2][1]) == pytest.approx(report["lambda2"], rel=1e-10)
    assert _read_csv(tmp_path / "eigenvector_2.csv")[0] == ["node", "edge", "s", "re", "im"]


def test_analyze_xlsx(tmp_path):
    assert main(["analyze", "--graph", "catalog:loop", "--h", "0.05", "--out", str(tmp_path), "--xlsx", "-q"]) == 0
    assert (tmp_path / "analyze_report.xlsx").exists()


def test_graph_file_errors_exit_3(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("edge 0 a b 1.0\nedge 1 b c\n")
    assert main(["analyze", "--graph", str(bad), "--out", str(tmp_path / "o")]) == 3
    assert main(["analyze", "--graph", "catalog:nothing", "--out", str(tmp_path / "o")]) == 3


@pytest.mark.parametrize("argv", [
    ["stability", "--graph", "catalog:loop", "--mass", "-1"],
    ["stability", "--graph", "catalog:loop", "--p", "7", "--mass", "1"],
    ["evolve", "--graph", "catalog:loop", "--p", "4"],
    ["groundstate", "--graph", "catalog:loop", "--mass-grid", "1:2"],
    ["groundstate", "--graph", "catalog:loop", "--mass", "1", "--mass-grid", "1:2:3"],
])
def test_invalid_arguments_exit_2(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)]) == 2


def test_supercritical_ground_state_is_refused(tmp_path, capsys):
    code = main(["groundstate", "--graph", "catalog:interval", "--p", "6", "--mass", "2",
                 "--h", "0.1", "--out", str(tmp_path)])
    assert code == 4
    assert "critical mass" in capsys.readouterr().err
    assert not (tmp_path / "groundstate_report.json").exists()


def test_ill_posed_evolution_is_refused(tmp_path):
    code = main(["evolve", "--graph", "catalog:interval", "--p", "6", "--mass", "1.5",
                 "--h", "0.1", "--out", str(tmp_path)])
    assert code == 4


def test_loop_stable_past_the_critical_mass(tmp_path, capsys):
    code = main(["stability", "--graph", "catalog:loop", "--p", "6", "--mass", "2.8",
                 "--h", "0.01", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "verdict = stable" in out
    assert "stable beyond ground-state existence" in out
    rows = _read_csv(tmp_path / "stability.csv")
    assert rows[1][-1] == "stable"


def test_groundstate_output_is_reproducible(tmp_path):
    argv = ["groundstate", "--graph", "catalog:tadpole", "--p", "4", "--mass-grid", "0.2:0.6:2",
            "--starts", "1", "--h", "0.1", "-q"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    for name in ("groundstate_sweep.csv", "groundstate_state.csv", "groundstate_report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = _read_csv(tmp_path / "a" / "groundstate_sweep.csv")
    assert [r[3] for r in rows[1:]] == ["true", "true"]


def test_evolve_writes_a_trace(tmp_path):
    code = main(["evolve", "--graph", "catalog:interval", "--p", "4", "--mass", "2", "--delta", "1e-3",
                 "--t-end", "0.1", "--dt", "1e-2", "--h", "0.1", "--out", str(tmp_path)])
    assert code == 0
    trace = _read_csv(tmp_path / "trace.csv")
    assert trace[0] == ["t", "mass", "energy", "d_H1"]
    assert len(trace) == 12
    report = json.loads((tmp_path / "evolve_report.json").read_text())
    assert report["max_distance"] < 1e-2


def test_sweep_writes_the_study(tmp_path):
    code = main(["sweep", "--graph", "catalog:loop", "--ell-grid", "1,4", "--h", "0.05", "--out", str(tmp_path)])
    assert code == 0
    rows = _read_csv(tmp_path / "mu1_study.csv")
    assert rows[0] == ["ell", "lambda2", "mu1", "bound_pi_half_ok", "bound_pi_ok"]
    assert [r[0] for r in rows[1:]] == ["1", "4"]
    assert all(r[3] == "true" for r in rows[1:])


def test_branch_writes_points(tmp_path):
    code = main(["branch", "--graph", "catalog:interval", "--p", "4", "--mass", "5.3", "--step", "0.05",
                 "--n-steps", "2", "--h", "0.05", "--out", str(tmp_path)])
    assert code == 0
    rows = _read_csv(tmp_path / "branch.csv")
    assert rows[0] == ["arclength", "mu", "lambda", "dist_inf", "E"]
    assert len(rows) == 4


def test_bracket_and_grid_parsing():
    args = build_parser().parse_args(["groundstate", "--graph", "catalog:loop", "--bracket", "0.5:3",
                                      "--ell-grid", "1, 2,"])
    config = config_from_args(args)
    assert config.bracket == (0.5, 3.0)
    assert config.ell_grid == [1.0, 2.0]
    assert config.masses() == []
