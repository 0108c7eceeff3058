import json

import numpy as np
import pytest

from mixnl.cli import main
from mixnl.config import DEFAULTS, apply_override, load_config, preset
from mixnl.exceptions import ConfigError
from mixnl.pipeline import branch_for, run

FAST = ["mesh.n_in=32", "mesh.n_ext=8"]


# ------------------------------------------------------------------ config


def test_defaults_validate():
    cfg = load_config()
    assert cfg.measure.atoms == [(0.5, 1.0)]
    assert cfg.raw == DEFAULTS


def test_toml_file_and_overrides(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('alpha = 1.0\nlambda = 0.5\n[mesh]\nn_in = 16\n[measure]\natoms = [[0.3, 2.0]]\n')
    cfg = load_config(path, ["mesh.n_ext=4", "nonlinearity.p=3.5"])
    assert cfg.raw["alpha"] == 1.0 and cfg.raw["mesh"]["n_in"] == 16 and cfg.raw["mesh"]["n_ext"] == 4
    assert cfg.raw["mesh"]["collar_R"] == 8.0
    assert cfg.measure.atoms == [(0.3, 2.0)]
    assert cfg.nonlinearity.p == 3.5


def test_density_measure(tmp_path):
    path = tmp_path / "d.toml"
    path.write_text('[measure.density]\nkind = "constant"\nnodes = 8\nparams = { value = 2.0 }\n')
    assert load_config(path).measure.mass == pytest.approx(2.0)


@pytest.mark.parametrize("override,key", [
    ("mesh.n_in=1", "mesh.n_in"),
    ("mesh.n_in=2.5", "mesh.n_in"),
    ("alpha=-1", "alpha"),
    ("lambda='x'", "lambda"),
    ("measure.atoms=[[1.5, 1.0]]", "measure"),
    ("nonlinearity.p=2", "nonlinearity"),
    ("solver.eigen_method='qr'", "solver.eigen_method"),
    ("bogus=1", "bogus"),
])
def test_first_failing_key(override, key):
    with pytest.raises(ConfigError) as info:
        load_config(overrides=[override])
    assert info.value.key == key


def test_alpha_zero_needs_measure():
    with pytest.raises(ConfigError) as info:
        load_config(overrides=["measure.atoms=[]"])
    assert info.value.key == "alpha"


def test_override_parsing():
    cfg = apply_override(DEFAULTS, "output_dir=results")
    assert cfg["output_dir"] == "results"
    with pytest.raises(ConfigError):
        apply_override(DEFAULTS, "no-equals-sign")


def test_presets():
    c1 = preset("cor1", {"alpha": 1, "beta": 1, "s": 0.5})
    assert c1.measure.atoms == [(0.5, 1.0)] and c1.raw["alpha"] == 1.0
    c3 = preset("cor3")
    assert len(c3.measure) == 10
    assert c3.measure.mass == pytest.approx(1 - 2.0**-10, rel=1e-14)
    c4 = preset("cor4")
    assert len(c4.measure) == 8 and c4.measure.mass == pytest.approx(1.0, rel=1e-14)
    assert len(preset("cor2").measure) == 3
    with pytest.raises(ConfigError):
        preset("cor9")


# ---------------------------------------------------------------- pipeline


@pytest.mark.parametrize("lam,branch", [(0.5, "mountain_pass"), (0.999999, "mountain_pass"), (1.0, "linking"), (2.0, "linking")])
def test_branch_threshold(lam, branch):
    assert branch_for(lam) == branch


def test_linking_index_just_below_second_eigenvalue():
    cfg = load_config(overrides=FAST)
    rep = run(cfg, stop_after="eigs")
    lam2 = 1.0 + rep.eigen["lambda_2_tilde"]
    rep = run(load_config(overrides=FAST + [f"lambda={lam2 - 1e-6!r}"]), stop_after="geometry")
    assert rep.branch == "linking" and rep.certificate["index"] == 1, rep.error


def test_run_reports_stage_errors():
    rep = run(load_config(overrides=FAST + ["lambda=1e6"]), stop_after="geometry")
    assert rep.error["stage"] == "geometry" and not rep.passed


@pytest.mark.parametrize("lam", ["0.5", "1.0"])
def test_cli_run_outputs_deterministic(tmp_path, lam):
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        code = main(["run", "--out", str(out), "--set", f"lambda={lam}", *sum([["--set", s] for s in FAST], [])])
        assert code == 0
        outs.append(out)
    for name in ("eigs.csv", "solution.csv", "trace.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    a = json.loads((outs[0] / "report.json").read_text())
    b = json.loads((outs[1] / "report.json").read_text())
    a.pop("timings"), b.pop("timings")
    assert a == b and a["passed"]
    assert a["branch"] == ("mountain_pass" if lam == "0.5" else "linking")


def test_cli_eigs_csv(tmp_path):
    assert main(["eigs", "--out", str(tmp_path), "--set", "solver.n_eigs=5", *sum([["--set", s] for s in FAST], [])]) == 0
    rows = (tmp_path / "eigs.csv").read_text().splitlines()
    assert rows[0] == "k,lambda_tilde,lambda" and len(rows) == 6
    k, lt, lam = rows[2].split(",")
    assert float(lam) == pytest.approx(float(lt) + 1.0)


def test_cli_assemble_dump(tmp_path):
    code = main(["assemble", "--preset", "cor1", "--out", str(tmp_path / "o"), "--dump-matrices", str(tmp_path / "m"),
                 *sum([["--set", s] for s in FAST], [])])
    assert code == 0
    assert sorted(p.name for p in (tmp_path / "m").iterdir()) == ["B.coo", "K.coo", "M.coo"]


def test_cli_forced_branch_mismatch(tmp_path):
    assert main(["solve-mp", "--out", str(tmp_path), "--set", "lambda=1.5", *sum([["--set", s] for s in FAST], [])]) == 1
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["error"]["stage"] == "geometry"


def test_cli_config_error(capsys):
    assert main(["eigs", "--set", "mesh.n_in=0"]) == 2
    assert "mesh.n_in" in capsys.readouterr().err


def test_cli_preset_json(capsys):
    assert main(["preset", "cor3", "--param", "K=4"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert len(cfg["measure"]["atoms"]) == 4


def test_cli_preset_roundtrip(tmp_path, capsys):
    assert main(["preset", "cor4", "--set", "lambda=0.25"]) == 0
    path = tmp_path / "cfg.json"
    path.write_text(capsys.readouterr().out)
    cfg = load_config(path)
    assert cfg.raw["lambda"] == 0.25 and len(cfg.measure) == 8


def test_cli_verify_paper(tmp_path, capsys):
    assert main(["verify-paper", "--out", str(tmp_path)]) == 0
    assert "FAIL" not in capsys.readouterr().out
    assert json.loads((tmp_path / "report.json").read_text())["passed"]


def test_threads_env(monkeypatch, tmp_path):
    monkeypatch.setenv("MIXNL_THREADS", "1")
    assert main(["eigs", "--out", str(tmp_path), *sum([["--set", s] for s in FAST], [])]) == 0
    lt = np.loadtxt(tmp_path / "eigs.csv", delimiter=",", skiprows=1)[:, 1]
    assert abs(lt[0]) < 1e-8
