from __future__ import annotations

import math

import pytest

from pptem import cli
from pptem.experiments import build_error_table
from pptem.output import (
    error_table_body,
    read_error_table,
    read_metadata,
    read_positivity,
    split_body,
    write_file,
)

SMALL = ["--deltas", "2^-4,2^-5", "--ref-delta", "2^-7", "--paths", "40"]


def test_minimal_config_applies_defaults(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nmodel = ginzburg_landau\n")
    cfg = cli.parse_config(["converge", "--config", str(ini)])
    assert cfg.M == 100_000
    assert cfg.ref_delta == 2.0**-14
    assert cfg.deltas == tuple(2.0**-k for k in (8, 9, 10, 11, 12))
    assert cfg.schemes[0].value == "pptem"
    assert cfg.T is None and cfg.x0 is None  # filled from the catalog at run time


def test_flag_overrides_file(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nmodel = ginzburg_landau\npaths = 50\n[policy]\nK0_hat = 3\n")
    cfg = cli.parse_config(["converge", "--config", str(ini), "--paths", "1000"])
    assert cfg.M == 1000
    assert cfg.policy == {"K0_hat": 3.0}


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("[run]\nmodel = ginzburg_landau\ncolour = red\n", "colour"),
        ("[run]\nmodel = ginzburg_landau\n[extra]\nx = 1\n", "extra"),
        ("[run]\nmodel = ginzburg_landau\n[policy]\nK0 = 2\n", "K0"),
        ("[run]\nmodel = ginzburg_landau\npaths = many\n", "paths"),
        ("[run]\nmodel = ginzburg_landau\n[params]\nkappa = 1\n", "kappa"),
    ],
)
def test_strict_config_errors(tmp_path, capsys, text, fragment):
    ini = tmp_path / "c.ini"
    ini.write_text(text)
    assert cli.main(["converge", "--config", str(ini)]) == cli.EXIT_CONFIG
    assert fragment in capsys.readouterr().err


def test_unknown_model_names_catalog(capsys):
    assert cli.main(["converge", "--model", "heston"]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "ginzburg_landau" in err and "hiv_aids" in err


def test_list_models(capsys):
    assert cli.main(["list-models"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 7
    assert lines[3].startswith("ginzburg_landau") and "sigma=5" in lines[3]


def test_converge_writes_csv(tmp_path):
    assert cli.main(["converge", "--model", "ginzburg_landau", "--output-dir", str(tmp_path), *SMALL]) == 0
    path = tmp_path / "gl_pptem_convergence.csv"
    table = read_error_table(path)
    assert len(table.rows) == 2
    assert math.isfinite(table.fitted_order)
    meta = read_metadata(path)
    assert meta["model"] == "ginzburg_landau" and meta["seed"] == "0" and "K0_hat=1" in meta["policy"]
    assert (tmp_path / "gl_pptem_convergence_plot.csv").exists()


def test_default_ladder_gives_five_rows(tmp_path, monkeypatch):
    monkeypatch.setenv("PPTEM_OUTPUT_DIR", str(tmp_path))
    assert cli.main(["converge", "--model", "ginzburg_landau", "--paths", "4"]) == 0
    body = split_body((tmp_path / "gl_pptem_convergence.csv").read_text()).splitlines()
    assert len(body) == 1 + 5 + 1
    assert body[-1].startswith("fitted_order,")


def test_rerun_bodies_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out, w in ((a, "1"), (b, "2")):
        cli.main(["converge", "--model", "ginzburg_landau", "--output-dir", str(out), "--workers", w, *SMALL])
    read = lambda d: split_body((d / "gl_pptem_convergence.csv").read_text())
    assert read(a) == read(b)


def test_positivity_twelve_rows(tmp_path):
    args = ["positivity", "--model", "cev", "--paths", "100", "--output-dir", str(tmp_path)]
    assert cli.main(args) == 0
    rows = read_positivity(tmp_path / "cev_positivity.csv")
    assert len(rows) == 12
    assert all(r["percent_post_clamp"] == 0 for r in rows if r["scheme"] == "pptem")
    assert read_metadata(tmp_path / "cev_positivity.csv")["pptem_model"] == "cev_lamperti"


def test_simulate_strict_divergence_exit(tmp_path):
    base = ["simulate", "--model", "lotka_volterra_3d", "--scheme", "em", "--output-dir", str(tmp_path)]
    assert cli.main(base) == 0
    assert cli.main(base + ["--strict"]) == cli.EXIT_DIVERGED
    assert cli.main(["simulate", "--model", "lotka_volterra_3d", "--strict", "--output-dir", str(tmp_path)]) == 0


def test_simulate_bad_grid(tmp_path):
    args = ["simulate", "--model", "ginzburg_landau", "--delta", "0.3", "--output-dir", str(tmp_path)]
    assert cli.main(args) == cli.EXIT_CONFIG


def test_diagnose_writes_margins(tmp_path):
    args = ["diagnose", "--model", "ginzburg_landau", "--paths", "50", "--samples", "1000",
            "--deltas", "2^-4,2^-5", "--output-dir", str(tmp_path)]
    assert cli.main(args) == 0
    body = split_body((tmp_path / "gl_diagnose.csv").read_text())
    assert body.startswith("check,passed,worst_margin")
    assert "dissipativity" in body and "moments@" in body


def test_round_trip_bit_exact(tmp_path):
    vals = [0.1, 1 / 3, 2.0**-52 + 1, 1e-300, math.pi]
    table = build_error_table([2.0**-k for k in range(1, 6)], vals, [0, 1, 0, 0, 2])
    path = write_file(tmp_path / "t.csv", error_table_body(table), {"model": "x"})
    back = read_error_table(path)
    assert [r.rms_error for r in back.rows] == [r.rms_error for r in table.rows]
    assert [r.diverged_count for r in back.rows] == [r.diverged_count for r in table.rows]
    assert back.fitted_order == table.fitted_order


def test_nan_cells_serialised(tmp_path):
    table = build_error_table([0.5, 0.25, 0.125], [math.nan, 0.2, 0.1], [5, 0, 0])
    body = error_table_body(table)
    assert "0.5,nan,5" in body
    path = write_file(tmp_path / "n.csv", body, {})
    assert math.isnan(read_error_table(path).rows[0].rms_error)


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "pptem", "list-models"], capture_output=True, text=True, check=True)
    assert len(out.stdout.strip().splitlines()) == 7
