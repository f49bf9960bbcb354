import csv
import io
import json
import math

import pytest

from mixglm import experiments as ex
from mixglm.estimators import generate_dataset
from mixglm.models import mixed_linear_regression


def test_config_validation():
    with pytest.raises(ValueError, match="increasing"):
        ex.SweepConfig(delta_grid=(2.0, 1.0))
    with pytest.raises(ValueError, match="unknown estimators"):
        ex.SweepConfig(estimators=("lin", "magic"))
    with pytest.raises(ValueError):
        ex.SweepConfig(trials=0)
    with pytest.raises(ValueError):
        ex.SweepConfig(alpha=0.5)
    with pytest.raises(ValueError):
        ex.SweepConfig(signals=(3,))
    with pytest.raises(ValueError):
        ex.SweepConfig(model="probit")


def test_smoke_sweep_has_one_row_per_cell():
    cfg = ex.SweepConfig(d=100, delta_grid=(2.0, 5.0), trials=1)
    rows = ex.sweep(cfg)
    assert len(rows) == 2 * len(ex.ESTIMATORS) * 2
    assert {tuple(r) for r in rows} == {ex.CSV_COLUMNS}
    assert all(0 <= r["overlap_mean"] <= 1 for r in rows)
    assert [r["delta"] for r in rows[:10]] == [2.0] * 10


def test_sweep_csv_is_reproducible(tmp_path):
    cfg = ex.SweepConfig(d=80, delta_grid=(3.0, 6.0), trials=2, estimators=("lin", "spec_opt", "comb"))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    ex.sweep(ex.SweepConfig(**{**cfg.__dict__, "output_path": str(a)}), workers=1)
    ex.sweep(ex.SweepConfig(**{**cfg.__dict__, "output_path": str(b)}), workers=4)
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0]
    assert header == ",".join(ex.CSV_COLUMNS)


def test_desk_preset_mapping():
    for name in ex.PRESETS:
        for cfg in ex.preset(name, "desk"):
            assert cfg.d == 500 and cfg.trials == 5
    assert all(c.d == 2000 for c in ex.preset("fig1"))
    with pytest.raises(ValueError):
        ex.preset("fig9")


def test_fig1_prediction_ordering():
    rep = ex.predict_report("mlr", 0.0, 0.6, 2.0)
    assert rep["combo_overlap_1"] > rep["rho_spec_1"]
    ycs = ex.predict_report("mlr", 0.0, 0.6, 2.0, preproc="ycs")
    lal = ex.predict_report("mlr", 0.0, 0.6, 2.0, preproc="lal")
    assert rep["rho_spec_1"] > lal["rho_spec_1"] >= ycs["rho_spec_1"]


@pytest.mark.parametrize("delta", [4.0, 8.0, 14.0])
def test_pr_beats_mlr_at_high_noise(delta):
    mlr = ex.predict_report("mlr", 1.5, 0.6, delta)
    pr = ex.predict_report("pr", 1.5, 0.6, delta)
    assert pr["rho_spec_1"] >= mlr["rho_spec_1"]
    assert pr["threshold_1"] < mlr["threshold_1"]


def test_predict_report_contents():
    rep = ex.predict_report("mlr", 0.0, 0.6, 1.0)
    assert rep["supercritical_1"] is False and rep["rho_spec_1"] == 0.0
    assert rep["input"]["delta"] == 1.0
    pr = ex.predict_report("pr", 0.0, 0.6, 4.0)
    assert pr["linear_effective"] is False and pr["rho_lin_1"] == 0.0
    json.dumps(rep)


def test_linear_map_falls_back_to_identity():
    assert ex.linear_map(ex.make_model("pr", 0.0)).name == "identity"
    assert ex.linear_map(ex.make_model("mlr", 0.0)).name == "optlin"


def test_read_config_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("alpha = 0.7  # weight\nseed-base = 3\n")
    assert ex.read_config_file(p) == {"alpha": "0.7", "seed_base": "3"}
    with pytest.raises(OSError, match="cannot read"):
        ex.read_config_file(tmp_path / "missing.ini")


def test_write_csv_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="cannot write"):
        ex.write_csv([], blocker / "out.csv", ex.CSV_COLUMNS)


def test_write_csv_formats(capsys):
    ex.write_csv([{"seed": 1, "k": 2, "eig_empirical": 0.1, "eig_pred": True}], "-", ex.EIGS_COLUMNS)
    out = capsys.readouterr().out.splitlines()
    assert out == ["seed,k,eig_empirical,eig_pred", "1,2,0.1,true"]


def test_gamp_table_columns():
    rows = ex.gamp_verify(d=200, t_max=5)
    assert len(rows) == 5 and tuple(rows[0]) == ex.GAMP_COLUMNS
    assert [r["t"] for r in rows] == [1, 2, 3, 4, 5]


def test_eigs_table():
    rows = ex.eigs_compare(d=300, seeds=(0, 1))
    assert len(rows) == 6 and tuple(rows[0]) == ex.EIGS_COLUMNS
    assert abs(rows[0]["eig_empirical"] - rows[0]["eig_pred"]) < 0.05
    assert rows[0]["eig_pred"] == rows[3]["eig_pred"]


def test_dump_dataset(tmp_path):
    ds = generate_dataset(20, 2.0, 0.6, mixed_linear_regression(0.1), 7)
    p = tmp_path / "ds.csv"
    ex.dump_dataset(ds, p, {"note": "x"})
    lines = p.read_text().splitlines()
    meta = json.loads(lines[0][2:])
    assert meta["seed"] == 7 and meta["d"] == 20 and meta["note"] == "x"
    body = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert len(body) == 40 and math.isclose(float(body[0]["y"]), ds.y[0])
