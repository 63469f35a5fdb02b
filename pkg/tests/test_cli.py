import csv
import json

import pytest

from dool.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def heat_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("heat")
    assert run("train", "heat", "--epochs", 30, "--out", root / "train") == 0
    return root


def test_train_writes_artifacts(heat_run):
    out = heat_run / "train"
    for name in ("checkpoint.json", "train_report.json", "loss.csv", "meta.json"):
        assert (out / name).exists()
    meta = json.loads((out / "meta.json").read_text())
    assert meta["seed"] == 0 and meta["config"]["training"]["epochs"] == 30 and meta["code_version"]


def test_existing_output_needs_force(heat_run):
    assert run("train", "heat", "--epochs", 2, "--out", heat_run / "train") == 2


def test_solve_then_evaluate(heat_run, capsys):
    out = heat_run / "solve"
    assert run("solve", heat_run / "train", "--T", 0.1, "--record-every", 10, "--out", out) == 0
    assert run("evaluate", out) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["rel_l2_u"] > 0 and len(metrics["error_series"]) == 11
    assert "relative L2 error" in capsys.readouterr().out
    fine = heat_run / "solve_fine"
    assert run("solve", heat_run / "train", "--T", 0.01, "--grid", 256, "--out", fine) == 0
    with open(fine / "fields.csv") as fh:
        assert sum(1 for _ in fh) == 1 + 11 * 256


def test_invert_rejects_malformed_observations(heat_run, tmp_path, capsys):
    bad = tmp_path / "obs.csv"
    bad.write_text("t,x,u\n0.0,0.1,1.0\n0.0,oops,2.0\n")
    rc = run("invert", "inversion", "--checkpoint", heat_run / "train", "--observations", bad, "--out", tmp_path / "i")
    assert rc == 2
    assert "line 3" in capsys.readouterr().err


def test_invert_needs_t0_slice(tmp_path, capsys):
    assert run("train", "inversion", "--epochs", 3, "--out", tmp_path / "mi") == 0
    assert run("reference", "inversion", "--gamma1", 0.05, "--T", 0.02, "--out", tmp_path / "obs") == 0
    rows = list(csv.reader(open(tmp_path / "obs" / "fields.csv")))
    late = tmp_path / "late.csv"
    with open(late, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(rows[0])
        w.writerows(r for r in rows[1:] if float(r[0]) > 0)
    rc = run("invert", "inversion", "--checkpoint", tmp_path / "mi", "--observations", late, "--out", tmp_path / "inv")
    assert rc == 2 and "t0" in capsys.readouterr().err
    rc = run("invert", "inversion", "--checkpoint", tmp_path / "mi", "--observations", tmp_path / "obs" / "fields.csv",
             "--out", tmp_path / "inv")
    assert rc == 0
    report = json.loads((tmp_path / "inv" / "inversion_report.json").read_text())
    assert report["n_evals"] == 17 and 0.0 <= report["gamma1"] <= 0.1


def test_schema_errors_exit_2(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text("schema_version: 1\nname: x\nseed: 0\noutput: {dir: o}\ntraining: {epochs: 0}\n")
    assert run("train", p) == 2
    assert "training.epochs" in capsys.readouterr().err


def test_numerical_failure_exits_3(tmp_path, capsys):
    # samples that cross zero make the heat Rayleighian undefined
    p = tmp_path / "neg.yaml"
    p.write_text("schema_version: 1\nname: neg\nseed: 0\noutput: {dir: %s}\n"
                 "model: {name: heat}\n"
                 "basis: {family: fourier, dim: 1, half_width: 3.141592653589793, K: 1, grid_size: [64]}\n"
                 "sampling: {center0: 0.0, r0: 1.0}\n"
                 "training: {epochs: 2}\n" % (tmp_path / "out"))
    assert run("train", p) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_dlam_and_presets(tmp_path, capsys):
    assert run("dlam", "dlam", "--epochs", 3, "--out", tmp_path / "d") == 0
    m = json.loads((tmp_path / "d" / "metrics.json").read_text())
    assert m["initial_constraint_residual"] < 1e-12 and m["terminal_constraint_residual"] < 1e-12
    assert run("presets-list") == 0
    assert "heat" in capsys.readouterr().out
    assert run("presets-show", "fp") == 0
    assert "hermite" in capsys.readouterr().out
    assert run("presets-show", "nope") == 2


def test_seed_reproducible_and_zero_epochs_rejected(tmp_path, capsys):
    for d in ("a", "b"):
        assert run("train", "heat", "--epochs", 5, "--seed", 1, "--out", tmp_path / d) == 0
    assert (tmp_path / "a" / "loss.csv").read_text() == (tmp_path / "b" / "loss.csv").read_text()
    assert run("train", "heat", "--epochs", 0, "--out", tmp_path / "c") == 2


def test_full_horizon_steps_and_self_evaluation(heat_run):
    out = heat_run / "solve_full"
    assert run("solve", heat_run / "train", "--T", 1.0, "--dt", 1e-3, "--record-every", 1, "--out", out) == 0
    with open(out / "energy.csv") as fh:
        assert sum(1 for _ in fh) == 1 + 1001
    assert run("evaluate", out, "--reference-dir", out, "--out", out / "self.json") == 0
    assert json.loads((out / "self.json").read_text())["rel_l2_u"] == 0.0


def test_ac_energy_non_increasing(tmp_path):
    assert run("train", "ac", "--epochs", 20, "--out", tmp_path / "t") == 0
    assert run("solve", tmp_path / "t", "--T", 0.05, "--out", tmp_path / "s") == 0
    with open(tmp_path / "s" / "energy.csv") as fh:
        e = [float(r[1]) for r in list(csv.reader(fh))[1:]]
    assert all(b <= a + 1e-9 * abs(a) for a, b in zip(e, e[1:]))
