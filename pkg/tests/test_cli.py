import json

from click.testing import CliRunner

from mixglm.cli import cli


def _run(*args):
    return CliRunner().invoke(cli, list(args))


def test_predict_json():
    r = _run("predict", "--delta", "4")
    assert r.exit_code == 0, r.output
    rep = json.loads(r.output)
    assert abs(rep["rho_spec_1"] - 0.6715584709304275) < 1e-8


def test_predict_requires_delta():
    assert _run("predict").exit_code == 2


def test_predict_bad_preproc():
    r = _run("predict", "--delta", "4", "--preproc", "nope")
    assert r.exit_code == 1 and "nope" in r.output


def test_sweep_to_file(tmp_path):
    out = tmp_path / "s.csv"
    r = _run("sweep", "--d", "60", "--deltas", "3,6", "--trials", "1", "--estimators", "lin,spec_opt",
             "--signals", "1", "-o", str(out))
    assert r.exit_code == 0, r.output
    lines = out.read_text().splitlines()
    assert lines[0].startswith("model,sigma,alpha") and len(lines) == 5


def test_sweep_rejects_bad_grid():
    r = _run("sweep", "--deltas", "3,2", "--d", "50", "--trials", "1")
    assert r.exit_code == 1 and "increasing" in r.output


def test_sweep_bad_output_path(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    r = _run("sweep", "--d", "40", "--deltas", "3", "--trials", "1", "--estimators", "lin",
             "-o", str(blocker / "x.csv"))
    assert r.exit_code == 1 and "cannot write" in r.output


def test_gamp_verify_stdout():
    r = _run("gamp-verify", "--d", "200", "--t-max", "4")
    assert r.exit_code == 0, r.output
    lines = r.output.strip().splitlines()
    assert lines[0].startswith("t,beta_t2,chi1_t") and len(lines) == 5


def test_eigs_stdout():
    r = _run("eigs", "--d", "150", "--seeds", "2", "--seed-base", "4")
    assert r.exit_code == 0, r.output
    lines = r.output.strip().splitlines()
    assert len(lines) == 7 and lines[1].startswith("4,1,")


def test_config_file_defaults(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("delta = 4\nalpha = 0.6\n")
    r = _run("--config", str(cfg), "predict")
    assert r.exit_code == 0, r.output
    assert json.loads(r.output)["delta"] == 4.0


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("colour = red\n")
    r = _run("--config", str(cfg), "predict", "--delta", "4")
    assert r.exit_code == 2 and "colour" in r.output


def test_verify_zero_tolerance_fails_and_names_criterion():
    r = _run("verify", "--tol-scale", "0", "--only", "C4")
    assert r.exit_code == 1
    assert "[FAIL] C4" in r.output and "failed: C4" in r.output


def test_verify_passing_criterion_shows_timing():
    r = _run("verify", "--only", "C8")
    assert r.exit_code == 0
    assert "[PASS] C8" in r.output and "s):" in r.output


def test_verify_unknown_key():
    assert _run("verify", "--only", "C99").exit_code == 1
