import csv
import io
import shutil

import numpy as np
import pytest

from aggrekin.cli import build_parser, fmt, main
from aggrekin.config import ConfigError, RunConfig, build_problem, output_dir, parse_config


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


# ----------------------------------------------------------------- parsing

def test_preset_defaults():
    cfg = parse_config("preset = vpfp_one_bump\n")
    assert cfg.nx == 800 and cfg.snapshot_every == 0.02 and cfg.horizon is None
    assert build_problem(cfg).horizon == 2.0


def test_comments_sections_and_types():
    cfg = parse_config("""
# a comment
preset = chemo_two_bumps   # trailing comment
nx = 200
horizon = 0.5
dump_f = yes
[study]
grids = 100, 200 400
eps = 0.1 1e-3
steps = 7
""")
    assert cfg.nx == 200 and cfg.horizon == 0.5 and cfg.dump_f is True
    assert cfg.study_grids == (100, 200, 400)
    assert cfg.study_eps == (0.1, 1e-3) and cfg.study_steps == 7


@pytest.mark.parametrize("text,match", [
    ("preset = vpfp_one_bump\n[problem]\npotential = zero\nlaw = identity\nbumps = 1 0 10\n",
     "exactly one"),
    ("nx = 100\n", "exactly one"),
    ("preset = vpfp_one_bump\nscheme = kinetic_lie\n", "eps required"),
    ("preset = vpfp_one_bump\nnxx = 3\n", "line 2: unknown key"),
    ("preset = vpfp_one_bump\nnx = 10\nnx = 20\n", "line 3: duplicate"),
    ("preset = vpfp_one_bump\n[plots]\n", "line 2: unknown section"),
    ("preset = vpfp_one_bump\nnx = many\n", "line 2: bad value"),
    ("preset = vpfp_one_bump\njust words\n", "line 2: expected"),
    ("preset = nope\n", "valid names"),
    ("preset = chemo_two_bumps\nvelocity_mode = naive\n", "acknowledge_wrong_velocity"),
    ("preset = chemo_kinetic_two_speed\nvelocity_mode = naive\nacknowledge_wrong_velocity = true\n",
     "only defined for the macro"),
    ("preset = vpfp_one_bump\nscheme = kinetic_lie\neps = 0.1\n", "needs an equilibrium"),
    ("preset = vpfp_one_bump\ndeterministic = false\n", "deterministic"),
    ("preset = vpfp_one_bump\nclosure = periodic\n", "closure"),
    ("[problem]\npotential = zero\nlaw = cubic\nbumps = 1 0 10\n", "unknown law"),
    ("[problem]\npotential = zero\nlaw = identity\nbumps = 1 0\n", "each bump"),
    ("[problem]\npotential = zero\nlaw = identity\n", "missing required key 'bumps'"),
    ("[problem]\ndomain = 1, -1\npotential = zero\nlaw = identity\nbumps = 1 0 10\n", "left < right"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_explicit_problem_block():
    cfg = parse_config("""
horizon = 0.1
[problem]
domain = -2, 2
potential = exp_half
law = -atan(5)
bumps = 1 0.5 10; 0.5 -0.5 20
""")
    prob = build_problem(cfg)
    assert prob.domain == (-2.0, 2.0)
    assert not prob.law.attractive
    x = np.array([0.5, -0.5])
    np.testing.assert_allclose(prob.initial(x), [1 + 0.5 * np.exp(-20), np.exp(-10) + 0.5])


def test_overrides():
    cfg = parse_config("preset = chemo_kinetic_two_speed\neps = 0.5\nvmax = 2\nscheme = kinetic_strang\n")
    prob = build_problem(cfg)
    assert prob.eps == 0.5 and prob.vgrid.vmax == 2.0 and prob.scheme == "kinetic_strang"
    with pytest.raises(ConfigError, match="vmax is fixed"):
        build_problem(parse_config("preset = kinetic_smooth_continuous\nvmax = 2\n"))


def test_output_dir_env(monkeypatch):
    cfg = RunConfig(preset="vpfp_one_bump", output_dir="here")
    monkeypatch.delenv("AGGREKIN_OUTPUT", raising=False)
    assert output_dir(cfg) == "here"
    monkeypatch.setenv("AGGREKIN_OUTPUT", "there")
    assert output_dir(cfg) == "there"


def test_fmt_round_trips():
    for v in (0.1, 1 / 3, 1e-300, np.float64(2.5)):
        assert float(fmt(v)) == float(v)
    assert fmt(7) == "7"


# ------------------------------------------------------------------- CLI

def test_presets_command():
    code, out, _ = run_cli(["presets"])
    assert code == 0
    assert "vpfp_one_bump" in out and "repulsive_k50" in out


def test_parser_requires_kind():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["study", "x.cfg"])


def test_missing_config_file(tmp_path):
    code, _, err = run_cli(["run", str(tmp_path / "absent.cfg")])
    assert code == 2 and "aggrekin:" in err


def test_run_writes_files_and_is_deterministic(tmp_path, monkeypatch):
    cfg = write(tmp_path, "preset = vpfp_one_bump\nnx = 200\nhorizon = 0.3\nsnapshot_every = 0.1\n")
    outs = []
    for k in range(2):
        monkeypatch.setenv("AGGREKIN_OUTPUT", str(tmp_path / f"out{k}"))
        code, out, err = run_cli(["run", cfg])
        assert code == 0, err
        outs.append(tmp_path / f"out{k}")
    for name in ("snapshots.csv", "diagnostics.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    header, diag = read_csv(outs[0] / "diagnostics.csv")
    assert header[:3] == ["t", "mass", "min_rho"]
    mass = diag[:, 1]
    assert np.max(np.abs(mass - mass[0])) <= 1e-12 * mass[0]
    sheader, snaps = read_csv(outs[0] / "snapshots.csv")
    assert sheader == ["t", "x", "rho"]
    assert len(np.unique(snaps[:, 0])) >= 4
    meta = (outs[0] / "meta.txt").read_text()
    for key in ("cfl_number", "dt", "wall_time_s", "problem_name = vpfp_one_bump"):
        assert key in meta


def test_kinetic_run_dumps_f(tmp_path, monkeypatch):
    monkeypatch.setenv("AGGREKIN_OUTPUT", str(tmp_path / "kin"))
    cfg = write(tmp_path, "preset = chemo_kinetic_two_speed\nnx = 100\nhorizon = 0.1\ndump_f = true\n")
    code, _, err = run_cli(["run", cfg])
    assert code == 0, err
    header, snaps = read_csv(tmp_path / "kin" / "snapshots.csv")
    assert header == ["t", "x", "rho", "f_0", "f_1"]
    np.testing.assert_allclose(snaps[:, 3] + snaps[:, 4], snaps[:, 2], rtol=1e-13, atol=1e-300)


def final_profile(path):
    _, snaps = read_csv(path)
    last = snaps[snaps[:, 0] == snaps[-1, 0]]
    return last[:, 2]


@pytest.mark.slow
def test_naive_and_literal_modes_differ(tmp_path, monkeypatch):
    base = "preset = chemo_two_bumps\nnx = 400\nsnapshot_every = 1\n"
    finals = {}
    for mode in ("volpert_literal", "naive"):
        monkeypatch.setenv("AGGREKIN_OUTPUT", str(tmp_path / mode))
        extra = "acknowledge_wrong_velocity = true\n" if mode == "naive" else ""
        cfg = write(tmp_path, base + f"velocity_mode = {mode}\n" + extra, f"{mode}.cfg")
        code, _, err = run_cli(["run", cfg])
        assert code == 0, err
        finals[mode] = final_profile(tmp_path / mode / "snapshots.csv")
    gap = np.max(np.abs(finals["naive"] - finals["volpert_literal"]))
    assert gap > 0.1 * finals["volpert_literal"].max()


def test_kinetic_small_eps_matches_limit_scheme(tmp_path, monkeypatch):
    base = "preset = chemo_kinetic_two_speed\nnx = 400\nhorizon = 0.5\nsnapshot_every = 0.05\n"
    finals = {}
    for scheme, extra in (("kinetic_lie", "eps = 1e-10\n"), ("macro_limit", "")):
        monkeypatch.setenv("AGGREKIN_OUTPUT", str(tmp_path / scheme))
        cfg = write(tmp_path, base + f"scheme = {scheme}\n" + extra, f"{scheme}.cfg")
        code, _, err = run_cli(["run", cfg])
        assert code == 0, err
        _, finals[scheme] = read_csv(tmp_path / scheme / "snapshots.csv")
    a, b = finals["kinetic_lie"], finals["macro_limit"]
    assert a.shape == b.shape
    np.testing.assert_array_equal(a[:, :2], b[:, :2])
    assert np.max(np.abs(a[:, 2] - b[:, 2])) <= 1e-8


def test_invariant_failure_exit_code(tmp_path, monkeypatch):
    # the anchored closure with nu = S lets slopes grow past the sampled bound c
    monkeypatch.setenv("AGGREKIN_OUTPUT", str(tmp_path / "bad"))
    cfg = write(tmp_path, "preset = chemo_two_bumps\nnx = 100\nhorizon = 0.05\nclosure = anchored\n")
    code, _, err = run_cli(["run", cfg])
    assert code == 1
    assert "invariant failure at step" in err
    code, _, _ = run_cli(["run", cfg, "--keep-going"])
    assert code == 0


def test_study_refinement(tmp_path, monkeypatch):
    monkeypatch.setenv("AGGREKIN_OUTPUT", str(tmp_path / "study"))
    cfg = write(tmp_path, "preset = repulsive_k10\nhorizon = 0.2\n[study]\ngrids = 100, 200, 400\n")
    code, out, err = run_cli(["study", cfg, "--kind", "refinement"])
    assert code == 0, err
    lines = (tmp_path / "study" / "study_refinement.csv").read_text().splitlines()
    assert lines[0] == "kind,nx,dx,value"
    assert [line.split(",")[0] for line in lines[1:]] == ["error", "error", "order"]
    assert float(lines[-1].split(",")[-1]) > 0


def test_study_refinement_needs_three_grids(tmp_path, monkeypatch):
    monkeypatch.setenv("AGGREKIN_OUTPUT", str(tmp_path / "study"))
    cfg = write(tmp_path, "preset = repulsive_k10\n[study]\ngrids = 100\n")
    code, _, err = run_cli(["study", cfg, "--kind", "refinement"])
    assert code == 2 and "need >= 3 grids" in err


def test_study_ap_sweep(tmp_path, monkeypatch):
    monkeypatch.setenv("AGGREKIN_OUTPUT", str(tmp_path / "ap"))
    cfg = write(tmp_path, "preset = chemo_kinetic_two_speed\nnx = 200\n"
                          "[study]\neps = 0.1, 1e-3, 1e-10\nsteps = 50\n")
    code, _, err = run_cli(["study", cfg, "--kind", "ap_sweep"])
    assert code == 0, err
    header, rows = read_csv(tmp_path / "ap" / "study_ap_sweep.csv")
    assert header == ["eps", "gap"]
    assert np.all(np.diff(rows[:, 1]) < 0)


def test_study_ap_sweep_rejects_macro_preset(tmp_path, monkeypatch):
    monkeypatch.setenv("AGGREKIN_OUTPUT", str(tmp_path / "ap"))
    cfg = write(tmp_path, "preset = vpfp_one_bump\n")
    code, _, err = run_cli(["study", cfg, "--kind", "ap_sweep"])
    assert code == 2 and "kinetic" in err


def test_console_script_installed():
    assert shutil.which("aggrekin") is not None
