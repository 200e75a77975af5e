import csv

import pytest
from click.testing import CliRunner

from esnbench.cli import main
from esnbench.dataio import load_csv, load_ground_truth
from esnbench.pipeline import METRICS_HEADER
from esnbench.report import read_roc
from esnbench.stepwise import read_survivors

SMALL = ["--synthetic", "--n", "200", "--p-informative", "3", "--p-noise", "3"]


@pytest.fixture
def run():
    runner = CliRunner()

    def invoke(*args, code=0):
        res = runner.invoke(main, [str(a) for a in args])
        assert res.exit_code == code, res.output
        return res
    return invoke


def test_synth_outputs(run, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run("synth", "--seed", 3, "--out", a)
    run("synth", "--seed", 3, "--out", b)
    assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
    assert (a / "ground_truth.csv").read_bytes() == (b / "ground_truth.csv").read_bytes()
    data, rep = load_csv(a / "data.csv", "label")
    assert (data.n, data.p) == (804, 20) and rep.dropped == []
    gt = load_ground_truth(a / "ground_truth.csv")
    assert set(gt) == {"(Intercept)", "x01", "x02", "x03", "x04", "x05"}


def test_synth_seed_changes_data(run, tmp_path):
    run("synth", "--seed", 1, "--out", tmp_path / "a")
    run("synth", "--seed", 2, "--out", tmp_path / "b")
    assert (tmp_path / "a/data.csv").read_bytes() != (tmp_path / "b/data.csv").read_bytes()


def test_select_two_alphas_nested(run, tmp_path):
    run("synth", "--seed", 0, "--n", 1000, "--out", tmp_path)
    run("select", "--input", tmp_path / "data.csv", "--alpha", 0.05, "--alpha", 0.01, "--out", tmp_path)
    s05 = read_survivors(tmp_path / "survivors_0.05.txt")
    s01 = read_survivors(tmp_path / "survivors_0.01.txt")
    assert set(s01) <= set(s05)
    assert (tmp_path / "trace_0.05.csv").read_text().startswith("step,predictor,p_value,model_size_after\n")


def test_select_single_predictor(run, tmp_path):
    run("synth", "--n", 500, "--p-informative", 1, "--p-noise", 0, "--out", tmp_path)
    run("select", "--input", tmp_path / "data.csv", "--alpha", 0.05, "--out", tmp_path)
    lines = (tmp_path / "trace_0.05.csv").read_text().splitlines()
    assert lines == ["step,predictor,p_value,model_size_after"]
    assert read_survivors(tmp_path / "survivors_0.05.txt") == ["x1"]


@pytest.mark.parametrize("model", ["logit", "esn"])
def test_fit_then_roc(run, tmp_path, model):
    run("synth", *SMALL[1:], "--out", tmp_path)
    data = tmp_path / "data.csv"
    run("fit", "--input", data, "--model", model, "--reservoir-size", 40, "--out", tmp_path)
    assert (tmp_path / f"model_{model}.txt").exists()
    res = run("roc", "--input", data, "--model-file", tmp_path / f"model_{model}.txt", "--out", tmp_path)
    auc = float(res.output.split()[-1])
    assert 0.6 < auc <= 1.0
    curve = read_roc(tmp_path / f"roc_{model}.csv")
    assert curve.points[0] == (0.0, 0.0) and curve.points[-1] == (1.0, 1.0)
    svg = (tmp_path / f"roc_{model}.svg").read_text()
    assert svg.startswith("<svg") and "AUC = " in svg
    # re-plot from points reproduces the same AUC
    again = run("roc", "--points", tmp_path / f"roc_{model}.csv", "--name", "replot", "--out", tmp_path)
    assert again.output == res.output
    assert (tmp_path / "roc_replot.svg").exists()


def test_fit_logit_writes_wald(run, tmp_path):
    run("fit", *SMALL, "--out", tmp_path)
    rows = list(csv.reader((tmp_path / "wald.csv").open()))
    assert rows[0] == ["Predictor", "Co-eff.", "S.Error", "O. Ratio", "z-value", "p-value"]
    assert len(rows) == 1 + 1 + 6


def test_fit_restricted_features(run, tmp_path):
    (tmp_path / "keep.txt").write_text("x1\nx3\n")
    run("fit", *SMALL, "--features", tmp_path / "keep.txt", "--out", tmp_path)
    rows = list(csv.reader((tmp_path / "wald.csv").open()))
    assert [r[0] for r in rows[1:]] == ["(Intercept)", "x1", "x3"]


def test_roc_perfect_and_chance(run, tmp_path):
    (tmp_path / "perfect.csv").write_text("threshold,fpr,tpr\ninf,0,0\n0.9,0,1\n0.1,1,1\n")
    (tmp_path / "chance.csv").write_text("threshold,fpr,tpr\ninf,0,0\n0.5,1,1\n")
    assert run("roc", "--points", tmp_path / "perfect.csv", "--out", tmp_path).output.strip() == "AUC 1.0000"
    assert run("roc", "--points", tmp_path / "chance.csv", "--out", tmp_path).output.strip() == "AUC 0.5000"


COMPARE = ["compare", *SMALL, "--folds", 4, "--reservoir-size", 30, "--nonlinearity", "interaction"]


def test_compare_outputs_and_determinism(run, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(*COMPARE, "--seed", 5, "--out", a)
    run(*COMPARE, "--seed", 5, "--out", b, "--workers", 3)
    for name in ("metrics.csv", "folds.csv", "report.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = list(csv.DictReader((a / "metrics.csv").open()))
    assert list(rows[0]) == METRICS_HEADER
    assert [r["config"] for r in rows] == ["logit_all", "logit_a0.05", "logit_a0.01",
                                         "esn_all", "esn_a0.05", "esn_a0.01"]
    for r in rows:
        assert r["error"] == ""
        assert abs(float(r["variance"]) - float(r["std_dev"]) ** 2) <= 1e-12
        assert (a / f"roc_{r['config']}.svg").exists()
    report = (a / "report.txt").read_text()
    assert "Confusion" in report or "confusion" in report


def test_compare_single_model(run, tmp_path):
    run(*COMPARE, "--model", "logit", "--alpha", 0.05, "--out", tmp_path)
    rows = list(csv.DictReader((tmp_path / "metrics.csv").open()))
    assert [r["config"] for r in rows] == ["logit_all", "logit_a0.05"]


class TestExitCodes:
    def test_bad_alpha(self, run, tmp_path):
        run("select", *SMALL, "--alpha", 1.5, "--out", tmp_path, code=2)

    def test_bad_reservoir(self, run, tmp_path):
        run(*COMPARE, "--spectral-radius", -1, "--out", tmp_path, code=2)

    def test_both_sources(self, run, tmp_path):
        (tmp_path / "d.csv").write_text("a,label\n1,0\n")
        run("fit", *SMALL, "--input", tmp_path / "d.csv", "--out", tmp_path, code=2)

    def test_missing_file(self, run, tmp_path):
        run("fit", "--input", tmp_path / "nope.csv", "--out", tmp_path, code=3)

    def test_bad_label(self, run, tmp_path):
        (tmp_path / "d.csv").write_text("a,label\n1,0\n2,7\n")
        res = run("fit", "--input", tmp_path / "d.csv", "--out", tmp_path, code=3)
        assert "line 3" in res.output

    def test_separation_fails_fit(self, run, tmp_path):
        rows = "".join(f"{i},{int(i > 9)}\n" for i in range(20))
        (tmp_path / "d.csv").write_text("a,label\n" + rows)
        run("fit", "--input", tmp_path / "d.csv", "--out", tmp_path, code=4)

    def test_dropped_rows_reported(self, run, tmp_path):
        rows = "".join(f"{i},{(i * 7) % 3},{i % 2}\n" for i in range(30))
        (tmp_path / "d.csv").write_text("a,b,label\n" + rows + "x,1,0\n")
        run("fit", "--input", tmp_path / "d.csv", "--out", tmp_path)
        assert "line 32" in (tmp_path / "load_report.txt").read_text()


def test_config_file_defaults(run, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 9\nsynth:\n  n: 50\n  p-noise: 0\n")
    run("--config", cfg, "synth", "--out", tmp_path / "a")
    data, _ = load_csv(tmp_path / "a/data.csv", "label")
    assert (data.n, data.p) == (50, 5)
    # command line beats the file
    run("--config", cfg, "synth", "--n", 60, "--out", tmp_path / "b")
    assert load_csv(tmp_path / "b/data.csv", "label")[0].n == 60
    run("synth", "--seed", 9, "--n", 50, "--p-noise", 0, "--out", tmp_path / "c")
    assert (tmp_path / "a/data.csv").read_bytes() == (tmp_path / "c/data.csv").read_bytes()
