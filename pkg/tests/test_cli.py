import csv
import re

import numpy as np
import pytest

from dynmap import io
from dynmap.cli import main
from dynmap.datasets import ENTRANT

FIRM_COLUMNS = ["--score", "score", "--id-i", "name1", "--id-j", "name2", "--time", "year"]


def _run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Balanced and unbalanced firm data converted to matrix files."""
    root = tmp_path_factory.mktemp("cli")
    for name, extra in (("firms", []), ("entrant", ["--unbalanced"])):
        assert _run("example", "--out", root / f"{name}.csv", *extra) == 0
        assert _run("convert", root / f"{name}.csv", "--out", root / f"{name}_D.csv", "--transform", "mirror",
                    "--mask-out", root / f"{name}_mask.csv", *FIRM_COLUMNS, *extra) == 0
    return root


def _read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


class TestConvert:
    def test_shape_and_sorted_labels(self, workspace):
        D, labels, periods = io.read_matrices(workspace / "firms_D.csv")
        assert D.shape == (20, 9, 9) and labels == sorted(labels)

    def test_unbalanced_mask(self, workspace):
        D, labels, periods = io.read_matrices(workspace / "entrant_D.csv")
        mask = io.read_mask(workspace / "entrant_mask.csv", labels, periods)
        assert mask[0].tolist() == [1] * 9 + [0] and labels[-1] == ENTRANT[0]

    def test_roster_change_needs_flag(self, workspace, tmp_path):
        assert _run("convert", workspace / "entrant.csv", "--out", tmp_path / "D.csv", *FIRM_COLUMNS) == 3

    def test_conflicting_duplicate(self, tmp_path, capsys):
        src = tmp_path / "dup.csv"
        src.write_text("period,id_i,id_j,score\n1,a,b,0.5\n1,b,a,0.7\n")
        assert _run("convert", src, "--out", tmp_path / "D.csv") == 3
        assert "a-b" in capsys.readouterr().err

    def test_bad_score_is_parse_error(self, tmp_path, capsys):
        src = tmp_path / "bad.csv"
        src.write_text("period,id_i,id_j,score\n1,a,b,0.5\n1,a,c,high\n")
        assert _run("convert", src, "--out", tmp_path / "D.csv") == 2
        assert "line 3" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert _run("convert", tmp_path / "nope.csv", "--out", tmp_path / "D.csv") == 3


class TestFit:
    def test_joint_fit_and_manifest(self, workspace, tmp_path):
        out, manifest = tmp_path / "X.csv", tmp_path / "run.json"
        assert _run("fit", workspace / "firms_D.csv", "--out", out, "--manifest", manifest, "--alpha", 0.4,
                    "--p", 2, "--mds-type", "ordinal", "--init", "cmds", "--n-iter", 150) == 0
        X, labels, periods, present = io.read_coords(out)
        assert X.shape == (20, 9, 2) and present.all()
        info = io.read_manifest(manifest)
        assert info["spec"]["alpha"] == 0.4 and len(info["cost_static"]) == 20
        assert info["iterations_used"] <= 150

    def test_alpha_zero_matches_single_period_fits(self, workspace, tmp_path):
        D, labels, periods = io.read_matrices(workspace / "firms_D.csv")
        out, manifest = tmp_path / "X.csv", tmp_path / "run.json"
        assert _run("fit", workspace / "firms_D.csv", "--out", out, "--manifest", manifest, "--init", "cmds",
                    "--n-iter", 300, "--tol", 0) == 0
        joint = io.read_manifest(manifest)["cost_static"]
        for t in (0, 7):
            one = tmp_path / f"D{t}.csv"
            io.write_matrices(one, D[t:t + 1], labels, periods[t:t + 1])
            _run("fit", one, "--out", tmp_path / "x.csv", "--manifest", tmp_path / "m.json", "--init", "cmds",
                 "--n-iter", 300, "--tol", 0)
            assert io.read_manifest(tmp_path / "m.json")["cost_static"][0] == pytest.approx(joint[t], abs=1e-6)

    def test_verbose_lines(self, workspace, tmp_path, capsys):
        assert _run("fit", workspace / "firms_D.csv", "--out", tmp_path / "X.csv", "--alpha", 0.4, "--p", 2,
                    "--n-iter", 120, "--tol", 0, "--verbose", 2, "--n-iter-check", 50) == 0
        err = capsys.readouterr().err
        assert re.findall(r"\[MDS\] Iteration (\d+) -- Cost", err) == ["50", "100"]

    def test_single_period_with_alpha(self, workspace, tmp_path):
        D, labels, periods = io.read_matrices(workspace / "firms_D.csv")
        io.write_matrices(tmp_path / "one.csv", D[:1], labels, periods[:1])
        assert _run("fit", tmp_path / "one.csv", "--out", tmp_path / "X.csv", "--alpha", 0.5) == 3

    def test_divergence_exit_code(self, workspace, tmp_path):
        code = _run("fit", workspace / "firms_D.csv", "--out", tmp_path / "X.csv", "--method", "tsne",
                    "--perplexity", 3, "--step-size", 1e300, "--n-iter", 20)
        assert code == 4


@pytest.fixture(scope="module")
def fitted(workspace):
    out = workspace / "eval_X.csv"
    assert _run("fit", workspace / "firms_D.csv", "--out", out, "--alpha", 0.3, "--n-iter", 150) == 0
    return out


@pytest.fixture(scope="module")
def entrant_fit(workspace):
    out = workspace / "entrant_X.csv"
    assert _run("fit", workspace / "entrant_D.csv", "--mask", workspace / "entrant_mask.csv", "--out", out,
                "--alpha", 0.3, "--n-iter", 100) == 0
    return out


class TestEval:
    def test_metrics_table(self, workspace, fitted, tmp_path):
        assert _run("eval", fitted, workspace / "firms_D.csv", "--out", tmp_path / "m.csv") == 0
        rows = {r["metric"]: float(r["value"]) for r in _read_csv(tmp_path / "m.csv")}
        assert set(rows) == {"misalign", "alignment", "persistence", "avg_hitrate", "avg_adjusted_hitrate"}
        assert all(np.isfinite(v) for v in rows.values())

    def test_constant_coordinates(self, workspace, tmp_path):
        D, labels, periods = io.read_matrices(workspace / "firms_D.csv")
        X = np.repeat(np.random.default_rng(0).standard_normal((1, 9, 2)), 20, axis=0)
        io.write_coords(tmp_path / "X.csv", X, labels, periods)
        assert _run("eval", tmp_path / "X.csv", workspace / "firms_D.csv", "--metrics", "misalign",
                    "--out", tmp_path / "m.csv") == 0
        assert _read_csv(tmp_path / "m.csv") == [{"metric": "misalign", "value": "0.0"}]

    def test_persistence_needs_three_periods(self, workspace, tmp_path, capsys):
        D, labels, periods = io.read_matrices(workspace / "firms_D.csv")
        io.write_matrices(tmp_path / "D.csv", D[:2], labels, periods[:2])
        io.write_coords(tmp_path / "X.csv", np.zeros((2, 9, 2)) + np.arange(9)[None, :, None], labels, periods[:2])
        assert _run("eval", tmp_path / "X.csv", tmp_path / "D.csv", "--metrics", "persistence") == 3
        assert "3 periods" in capsys.readouterr().err

    def test_label_mismatch(self, workspace, fitted, tmp_path):
        D, labels, periods = io.read_matrices(workspace / "entrant_D.csv")
        assert _run("eval", fitted, workspace / "entrant_D.csv") == 3


class TestTune:
    def test_default_grid_has_thirty_rows(self, workspace, tmp_path, capsys):
        assert _run("tune", workspace / "firms_D.csv", "--n-iter", 15, "--out", tmp_path / "grid.csv") == 0
        rows = _read_csv(tmp_path / "grid.csv")
        assert len(rows) == 30 and {r["p"] for r in rows} == {"1", "2"}
        assert "Best result found:" in capsys.readouterr().out

    def test_bayes_is_deterministic(self, workspace, tmp_path):
        outs = []
        for k in range(2):
            out = tmp_path / f"b{k}.csv"
            assert _run("tune", workspace / "firms_D.csv", "--bayes", "alpha=0:1", "p=1:2", "--n-calls", 5,
                        "--n-initial-points", 3, "--seed", 42, "--n-iter", 20, "--out", out) == 0
            outs.append(out.read_text())
        assert outs[0] == outs[1] and len(outs[0].splitlines()) == 6

    def test_single_point_equals_plain_fit(self, workspace, tmp_path):
        assert _run("tune", workspace / "firms_D.csv", "--grid", "alpha=0.2", "p=1", "--metrics", "misalign",
                    "--weights", "1,0", "--n-iter", 60, "--out", tmp_path / "g.csv") == 0
        assert _run("fit", workspace / "firms_D.csv", "--out", tmp_path / "X.csv", "--alpha", 0.2,
                    "--n-iter", 60) == 0
        assert _run("eval", tmp_path / "X.csv", workspace / "firms_D.csv", "--metrics", "misalign",
                    "--out", tmp_path / "m.csv") == 0
        grid = _read_csv(tmp_path / "g.csv")[0]
        assert float(grid["misalign"]) == float(_read_csv(tmp_path / "m.csv")[0]["value"])

    def test_bad_grid(self, workspace):
        assert _run("tune", workspace / "firms_D.csv", "--grid", "alpha") == 3


def test_simulate_table(tmp_path):
    out = tmp_path / "sim.csv"
    assert _run("simulate", "--reps", 2, "--n-iter", 50, "--n-inits", 1, "--out", out) == 0
    rows = _read_csv(out)
    assert [(r["noise"], r["alpha"]) for r in rows] == [("0.01", "0.0"), ("0.01", "0.3"), ("0.5", "0.0"),
                                                       ("0.5", "0.3")]


def test_bench_table(tmp_path):
    out = tmp_path / "bench.csv"
    assert _run("bench", "--n", "4,5", "--t", "3", "--n-iter", 5, "--out", out) == 0
    assert len(_read_csv(out)) == 4


class TestPlot:
    def test_entrant_absent_then_present(self, entrant_fit, tmp_path):
        name = ENTRANT[0]
        for period, expected in (("1998", False), ("2017", True)):
            svg = tmp_path / f"{period}.svg"
            assert _run("plot", entrant_fit, "--out", svg, "--mode", "static", "--period", period) == 0
            assert (name in svg.read_text()) is expected

    def test_dynamic_opacity_levels(self, tmp_path):
        labels, periods = ["a", "b"], ["1", "2", "3"]
        X = np.random.default_rng(1).standard_normal((3, 2, 2))
        io.write_coords(tmp_path / "X.csv", X, labels, periods)
        assert _run("plot", tmp_path / "X.csv", "--out", tmp_path / "m.svg", "--transparency-start", 0.2) == 0
        levels = sorted(set(re.findall(r'fill-opacity="([0-9.]+)"', (tmp_path / "m.svg").read_text())))
        assert levels == ["0.200", "0.600", "1.000"]

    def test_single_point(self, tmp_path):
        (tmp_path / "X.csv").write_text("period,label,dim1,dim2\n1,solo,0.5,0.5\n")
        assert _run("plot", tmp_path / "X.csv", "--out", tmp_path / "p.svg", "--mode", "static") == 0
        svg = (tmp_path / "p.svg").read_text()
        assert svg.count('class="point"') == 1 and svg.count('class="label"') == 1

    def test_byte_identical(self, entrant_fit, tmp_path):
        for k in range(2):
            assert _run("plot", entrant_fit, "--out", tmp_path / f"{k}.svg", "--show-arrows") == 0
        assert (tmp_path / "0.svg").read_bytes() == (tmp_path / "1.svg").read_bytes()

    def test_unknown_period(self, entrant_fit, tmp_path):
        assert _run("plot", entrant_fit, "--out", tmp_path / "x.svg", "--mode", "static", "--period", "1900") == 3
