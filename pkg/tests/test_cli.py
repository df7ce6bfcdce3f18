import json
import os

import pytest

from avgfield.cli import main


def test_verify_passes(capsys):
    assert main(["verify"]) == 0
    err = capsys.readouterr()
    assert "FAIL" not in err.err + err.out
    assert err.out.startswith("check,passed,value,threshold\n")


def test_tf_csv(capsys):
    assert main(["tf", "--betas", "1,10"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "s,e11,beta,lambda_tf,energy,support_radius"
    assert len(lines) == 3
    lam = float(lines[1].split(",")[3])
    assert lam == pytest.approx(2 * 2**0.5, rel=1e-9)


def test_unwritable_output_dir(tmp_path, capsys):
    target = tmp_path / "missing" / "out.csv"
    code = main(["tf", "--out", str(target)])
    assert code != 0
    assert str(target) in capsys.readouterr().err


def test_config_error_exit_code(capsys):
    assert main(["minimize", "--bc", "periodic"]) == 2
    assert "bc" in capsys.readouterr().err


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("experiment: tf\nbetas: [1, 4]\npotential: 'power:4'\n")
    assert main(["tf", "--config", str(cfg), "--beta", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and lines[1].startswith("4.0,")


def test_config_kind_mismatch(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("experiment: sweep\nbetas: [1]\n")
    assert main(["tf", "--config", str(cfg)]) == 2


def _minimize(tmp_path, name):
    out = tmp_path / f"{name}.csv"
    snap = tmp_path / f"{name}.afld"
    code = main(["minimize", "--beta", "11", "--grid", "24", "--max-iters", "40", "--restarts", "2",
                 "--seed", "5", "--out", str(out), "--save-field", str(snap)])
    return code, out, snap


def test_minimize_artifacts_and_determinism(tmp_path):
    code, out, snap = _minimize(tmp_path, "a")
    assert code == 0
    _, out2, _ = _minimize(tmp_path, "b")
    assert out.read_bytes() == out2.read_bytes()
    man = json.loads((tmp_path / "a.manifest.json").read_text())
    assert man["config"]["experiment"] == "minimize"
    assert man["config"]["settings"]["seed"] == 5
    assert man["seeds"] and "numpy" in man["versions"] and man["wall_time_s"] >= 0
    assert os.path.samefile(man["outputs"][1], snap)
    header = out.read_text().splitlines()[0]
    assert header == ("beta,bc,grid,energy,energy_per_beta,kinetic,potential,cross,quartic,"
                      "mu,residual,iterations,vortex_count,seed")


def test_lda_from_snapshot(tmp_path, capsys):
    snap = tmp_path / "h.afld"
    assert main(["minimize", "--beta", "2", "--potential", "harmonic", "--grid", "32",
                 "--max-iters", "60", "--restarts", "1", "--save-field", str(snap)]) == 0
    capsys.readouterr()
    assert main(["lda", "--beta", "2", "--potential", "harmonic", "--field", str(snap)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "beta,cx,cy,radius,distance"
    assert len(lines) == 10


def test_lda_requires_trap():
    assert main(["lda", "--beta", "2", "--grid", "16"]) == 2


def test_trial_csv(capsys):
    assert main(["trial", "--beta", "4", "--grid", "16"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].startswith("total,")
    assert sum(1 for l in lines if l.startswith("ball,")) == 4


def test_sweep_prints_estimate(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--betas", "1,2,3", "--bc", "neumann", "--grid", "16", "--max-iters", "20",
                 "--restarts", "1", "--workers", "1", "--out", str(out)]) == 0
    assert "e11 estimate" in capsys.readouterr().out
    assert len(out.read_text().splitlines()) == 4
    man = json.loads((tmp_path / "s.manifest.json").read_text())
    assert "e11_estimate" in man
