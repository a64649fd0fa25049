"""Command-line driver: flag grammar, config files, exit codes, sweeps."""

import csv
import json
import math
import os

import pytest

from porolbm.cli import (
    RunConfig,
    UsageError,
    build_problem,
    load_config_file,
    main,
    resolve_dt,
    resolve_ne,
    run,
    sweep,
)


# ---------------------------------------------------------------------------
# flag grammar
# ---------------------------------------------------------------------------

def test_resolve_ne_absolute():
    assert resolve_ne("41", 64) == 41
    assert resolve_ne(" 7 ", 10) == 7


def test_resolve_ne_per_cell():
    assert resolve_ne("x3", 16) == 48
    assert resolve_ne("x1.5", 10) == 15


def test_resolve_ne_quadratic():
    assert resolve_ne("q:0.01", 64) == 41
    assert resolve_ne("q:0.01", 32) == 10
    # tiny coefficients clamp to one iteration instead of zero
    assert resolve_ne("q:0.0001", 8) == 1


@pytest.mark.parametrize("bad", ["abc", "x", "q:zz", ""])
def test_resolve_ne_unparsable(bad):
    with pytest.raises(UsageError, match="cannot parse ne spec"):
        resolve_ne(bad, 16)


def test_resolve_ne_rejects_nonpositive():
    with pytest.raises(UsageError, match="at least 1"):
        resolve_ne("0", 16)
    with pytest.raises(UsageError, match="at least 1"):
        resolve_ne("-3", 16)


def test_resolve_dt_rules():
    assert resolve_dt(None, 0.25) is None
    assert resolve_dt("dx2", 0.25) == 0.0625
    assert resolve_dt("DX2/4", 0.25) == 0.0625 / 4.0
    assert resolve_dt("0.5*dx2", 0.1) == pytest.approx(0.005)
    assert resolve_dt("1e-3", 0.25) == 1e-3


def test_resolve_dt_unparsable():
    with pytest.raises(UsageError, match="cannot parse dt rule"):
        resolve_dt("soon", 0.25)


def test_build_problem_requires_alpha():
    with pytest.raises(UsageError, match="requires --alpha"):
        build_problem("manufactured", None)
    with pytest.raises(UsageError, match="requires --alpha"):
        build_problem("terzaghi", None)


def test_build_problem_loading2d_fixed_alpha():
    assert build_problem("loading2d", None).params.alpha == 1.0
    assert build_problem("loading2d", 1.0).name == "loading2d"
    with pytest.raises(UsageError, match="fixed coupling"):
        build_problem("loading2d", 0.8)


def test_build_problem_unknown_name():
    with pytest.raises(UsageError, match="unknown problem"):
        build_problem("darcy", 1.0)


# ---------------------------------------------------------------------------
# programmatic runs
# ---------------------------------------------------------------------------

_QUICK = dict(problem="manufactured", alpha=0.8, nx=8, tf=0.0625,
              backend="reference", progress=0)


def test_run_is_deterministic_apart_from_timing():
    s1, r1 = run(RunConfig(**_QUICK))
    s2, r2 = run(RunConfig(**_QUICK))
    assert s1["config"] == s2["config"]
    assert s1["result"] == s2["result"]
    assert r1.errors.rel == r2.errors.rel


def test_run_resolved_configuration():
    summary, result = run(RunConfig(**_QUICK))
    cfg = summary["config"]
    assert cfg["nx"] == cfg["ny"] == 8
    assert cfg["resolution"] == 8
    assert cfg["dt"] == (1.0 / 8.0) ** 2
    assert cfg["ne"] == 8  # problem default tracks the resolution
    assert cfg["nt"] == 4
    assert not result.diverged


def test_run_honors_ne_and_dt_flags():
    summary, _ = run(RunConfig(**{**_QUICK, "ne": "q:0.5", "dt_rule": "dx2/4",
                                  "tf": 0.03125}))
    assert summary["config"]["ne"] == 32
    assert summary["config"]["dt"] == (1.0 / 8.0) ** 2 / 4.0
    assert summary["config"]["nt"] == 8


def test_run_rejects_non_divisible_final_time():
    with pytest.raises(UsageError, match="integer number of steps"):
        run(RunConfig(**{**_QUICK, "tf": 0.07}))


def test_run_rejects_out_of_range_snapshots():
    with pytest.raises(UsageError, match="snapshot time"):
        run(RunConfig(**{**_QUICK, "snapshots": (0.5,)}))


def test_run_writes_artifacts(tmp_path):
    out = tmp_path / "art"
    cfg = RunConfig(**{**_QUICK, "out": str(out), "snapshots": (0.03125,),
                       "formats": "both"})
    run(cfg)
    names = set(os.listdir(out))
    assert {"summary.json", "errors.csv", "fields_t2.csv", "fields_t2.vtk"} <= names


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def test_load_config_key_value_file(tmp_path):
    path = tmp_path / "case.cfg"
    path.write_text(
        "# benchmark setup\n"
        "problem = manufactured\n"
        "alpha = 0.8   # coupling\n"
        "dt = dx2/4\n"
        "format = vtk\n"
        "\n"
        "ne = x2\n"
    )
    vals = load_config_file(str(path))
    assert vals == {"problem": "manufactured", "alpha": "0.8",
                    "dt_rule": "dx2/4", "formats": "vtk", "ne": "x2"}


def test_load_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "case.cfg"
    path.write_text("viscosity = 3\n")
    with pytest.raises(UsageError, match="unknown key 'viscosity'"):
        load_config_file(str(path))


def test_load_config_rejects_bare_line(tmp_path):
    path = tmp_path / "case.cfg"
    path.write_text("manufactured\n")
    with pytest.raises(UsageError, match="expected key = value"):
        load_config_file(str(path))


def test_summary_reproduces_run(tmp_path):
    out = tmp_path / "orig"
    first, _ = run(RunConfig(**{**_QUICK, "out": str(out)}))
    vals = load_config_file(str(out / "summary.json"))
    assert vals["problem"] == "manufactured"
    assert float(vals["alpha"]) == 0.8
    assert vals["nx"] == "8"
    # replay through the command line, pointing at the stored summary
    code = main(["run", "--config", str(out / "summary.json"),
                 "--progress", "0"])
    assert code == 0
    second, _ = run(RunConfig(problem=vals["problem"], alpha=float(vals["alpha"]),
                              r=float(vals["r"]), nx=int(vals["nx"]),
                              ne=vals["ne"], dt_rule=vals["dt_rule"],
                              tf=float(vals["tf"]), backend=vals["backend"],
                              progress=0))
    assert second["result"] == first["result"]


def test_cli_flags_override_config_file(tmp_path, capsys):
    path = tmp_path / "case.cfg"
    path.write_text("problem = manufactured\nalpha = 0.8\nnx = 8\n"
                    "tf = 0.0625\nbackend = reference\n")
    code = main(["run", "--config", str(path), "--nx", "16", "--progress", "0"])
    assert code == 0
    head = capsys.readouterr().out.splitlines()[0]
    assert head.startswith("manufactured: nx = 16, ny = 16,")


# ---------------------------------------------------------------------------
# command line entry
# ---------------------------------------------------------------------------

def test_main_run_success(capsys):
    code = main(["run", "--problem", "manufactured", "--alpha", "0.8",
                 "--nx", "8", "--tf", "0.0625", "--backend", "reference",
                 "--progress", "0"])
    assert code == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == ("manufactured: nx = 8, ny = 8, dt = 0.015625, "
                      "ne = 8, nt = 4, alpha = 0.8, r = 0.5")
    assert out[1] == "diverged: false"
    assert any(line.startswith("relative error, p:") for line in out)
    assert any(line.startswith("wall time:") for line in out)


def test_main_reports_divergence(capsys):
    code = main(["run", "--problem", "manufactured", "--alpha", "3.0",
                 "--nx", "16", "--progress", "0"])
    assert code == 1
    err = capsys.readouterr().err
    assert "diverged: true (" in err
    assert "field" in err and "t = " in err


def test_main_usage_errors_exit_2(capsys):
    assert main(["run"]) == 2
    assert "error: --problem is required" in capsys.readouterr().err
    assert main(["run", "--problem", "manufactured"]) == 2
    assert "requires --alpha" in capsys.readouterr().err
    assert main(["run", "--problem", "manufactured", "--alpha", "0.8",
                 "--nx", "8,16"]) == 2
    assert "lists are for sweep" in capsys.readouterr().err


def test_main_sweep_requires_a_real_axis(capsys):
    code = main(["sweep", "--problem", "manufactured", "--alpha", "0.8",
                 "--nx", "8", "--tf", "0.0625", "--backend", "reference"])
    assert code == 2
    assert "two or more values" in capsys.readouterr().err


def test_sweep_orders_and_table(tmp_path, capsys):
    out = tmp_path / "sweepdir"
    code = main(["sweep", "--problem", "manufactured", "--alpha", "0.8",
                 "--nx", "8,16", "--tf", "0.0625", "--backend", "reference",
                 "--out", str(out), "--progress", "0"])
    assert code == 0
    printed = capsys.readouterr().out
    assert "order_p" in printed.splitlines()[0]
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["nx"] for r in rows] == ["8", "16"]
    assert all(r["diverged"] == "false" for r in rows)
    # coarse row has errors but no order; refinement row carries both
    assert rows[0]["order_p"] == ""
    assert float(rows[0]["rel_p"]) > float(rows[1]["rel_p"]) > 0.0
    for key in ("order_p", "order_eta", "order_sigma"):
        assert float(rows[1][key]) > 0.5


def test_sweep_groups_by_r(capsys):
    base = RunConfig(problem="manufactured", alpha=0.8, nx=8, tf=0.0625,
                     backend="reference", progress=0)
    table = sweep(base, {"r": [0.0, 1.0]})
    assert len(table["rows"]) == 2
    col = table["header"].index("r")
    assert [row[col] for row in table["rows"]] == ["0", "1"]
    # no nx refinement, so no orders anywhere
    ocol = table["header"].index("order_p")
    assert all(row[ocol] == "" for row in table["rows"])
