import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mediumband import __version__
from mediumband.cli import EXIT_FIT, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from mediumband.experiments import (
    PRESET_NAMES,
    cmd_ber,
    cmd_bound,
    cmd_pdf,
    preset,
    resolve_params,
    scenario_from_text,
    scenario_to_text,
    simulate_fading,
    snr_grid,
)
from mediumband.fading_stats import BimodalParams, FitError, FitResult, table1_params


def read_csv(path):
    lines = path.read_text().splitlines()
    meta = {}
    body = []
    for line in lines:
        if line.startswith("# "):
            key, value = line[2:].split(": ", 1)
            meta[key] = json.loads(value)
        else:
            body.append(line)
    rows = list(csv.DictReader(body))
    return meta, rows, "\n".join(body)


# --- presets and scenario files --------------------------------------------

def test_preset_values():
    s1 = preset("scenario1")
    assert (s1.profile.kind, s1.profile.kappa, s1.profile.n_paths) == ("exponential", 0.25, 10)
    assert s1.pds == pytest.approx(20.0) and s1.pulse.beta == 0.22
    s2 = preset("scenario2")
    assert (s2.profile.kind, s2.profile.kappa, s2.profile.n_paths) == ("uniform", 0.0, 10)
    assert s2.pds == pytest.approx(60.0) and s2.pulse.beta == 0.22
    assert preset("narrowband").profile.t_m == 0.0
    t = preset("table1_pds(40)")
    assert t.pds == pytest.approx(40.0) and t.profile.kappa == 0.0
    assert preset("table1_pds40") == t


def test_preset_errors():
    with pytest.raises(ValueError):
        preset("scenario3")
    with pytest.raises(ValueError):
        preset("table1_pds(50)")


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_scenario_text_roundtrip(name):
    s = preset(name)
    assert scenario_from_text(scenario_to_text(s)) == s


def test_scenario_text_errors():
    with pytest.raises(ValueError):
        scenario_from_text("n_paths 10\n")
    with pytest.raises(ValueError):
        scenario_from_text("colour = red\n")
    s = scenario_from_text("# comment only\nt_m = 0.4   # forty percent\nseed = 9\n")
    assert s.pds == pytest.approx(40.0) and s.seed == 9


def test_snr_grid():
    assert snr_grid(0, 10, 5) == [0.0, 5.0, 10.0]
    assert snr_grid(0, 1, 0.25) == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert snr_grid(5, 0, 1) == []
    with pytest.raises(ValueError):
        snr_grid(0, 10, 0)


def test_simulate_fading_narrowband():
    h, g = simulate_fading(preset("narrowband"), 10_000)
    np.testing.assert_allclose(h, g, atol=1e-12)
    h2, _ = simulate_fading(preset("narrowband"), 10_000)
    np.testing.assert_array_equal(h, h2)


def test_resolve_params(tmp_path):
    p, info = resolve_params("table1:60")
    assert p == table1_params(60) and info["source"] == "table1:60"
    path = tmp_path / "fit.json"
    path.write_text(FitResult(table1_params(40), 1.0, 10).to_json())
    q, _ = resolve_params(str(path))
    assert q == table1_params(40)
    with pytest.raises(ValueError):
        resolve_params(None)


# --- commands --------------------------------------------------------------

def test_cmd_bound_reduction_and_metadata(tmp_path):
    out = tmp_path / "b.csv"
    res = cmd_bound(BimodalParams(0.0, math.sqrt(0.5), 0.0), snr_grid(0, 40, 5), out)
    meta, rows, _ = read_csv(out)
    assert meta["version"] == __version__ and meta["command"] == "bound"
    for r in rows:
        assert abs(float(r["lower_bound"]) - float(r["rayleigh"])) < 1e-9
    assert res["files"] == [out, out.with_suffix(".json")]
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["columns"] == res["header"] and len(side["rows"]) == 9


def test_cmd_bound_slope_column(tmp_path):
    res = cmd_bound(table1_params(60), snr_grid(0, 50, 1), tmp_path / "b.csv")
    slope = {r[0]: r[-1] for r in res["rows"]}
    # faster than 1/snr somewhere in 10-40 dB
    assert max(-slope[db] for db in range(10, 41)) > 1.0


def test_cmd_bound_byte_identical_body(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cmd_bound(table1_params(20), snr_grid(0, 30, 2), a)
    cmd_bound(table1_params(20), snr_grid(0, 30, 2), b)
    assert read_csv(a)[2] == read_csv(b)[2]


def test_cmd_ber_small(tmp_path):
    out = tmp_path / "ber.csv"
    s = preset("scenario2")
    cmd_ber(s, [5.0, 10.0], out, min_errors=30, params=table1_params(60))
    meta, rows, body = read_csv(out)
    assert meta["scenario"]["pds"] == pytest.approx(60.0)
    assert meta["seed"] == s.seed
    assert meta["stop"] == {"min_errors": 30, "max_bits": 100_000_000}
    assert {"ber_method1", "ber_method2", "lower_bound", "series", "rayleigh"} <= set(rows[0])
    assert int(rows[0]["errors_method1"]) >= 30
    out2 = tmp_path / "ber2.csv"
    cmd_ber(s, [5.0, 10.0], out2, min_errors=30, params=table1_params(60))
    assert read_csv(out2)[2] == body


def test_cmd_ber_empty_grid(tmp_path):
    out = tmp_path / "empty.csv"
    cmd_ber(preset("scenario2"), [], out, params=table1_params(60))
    _, rows, body = read_csv(out)
    assert rows == [] and body.startswith("snr_db,snr,")


def test_cmd_ber_json_only(tmp_path):
    out = tmp_path / "ber.json"
    res = cmd_ber(preset("narrowband"), [0.0], out, fmt="json", min_errors=50,
                  params=table1_params(20))
    assert res["files"] == [out]
    rec = json.loads(out.read_text())
    assert rec["rows"][0]["snr_db"] == 0.0


def test_cmd_pdf_narrowband(tmp_path):
    out = tmp_path / "pdf.csv"
    res = cmd_pdf(preset("narrowband"), 1_000_000, 100, out)
    assert res["fit"].params.k < 0.05
    _, rows, _ = read_csv(out)
    dens = np.array([float(r["density_h"]) for r in rows])
    peak = int(np.argmax(dens))
    # unimodal: nondecreasing to the peak, nonincreasing after (up to histogram noise)
    assert abs(peak - 50) <= 3
    fit_rec = json.loads(out.with_suffix(".fit.json").read_text())
    assert {"params", "nll", "sample_count", "comparison"} <= set(fit_rec)
    assert fit_rec["sample_count"] == 1_000_000


def test_cmd_pdf_table_row_comparison(tmp_path):
    res = cmd_pdf(preset("table1_pds(80)"), 100_000, 50, tmp_path / "p.csv")
    assert res["comparison"]["table1"] == {"pds": 80, "k": 0.83, "sigma_i2": 0.028, "sigma_o2": 0.416}


def test_unwritable_path_reports_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        cmd_bound(table1_params(20), [0.0], blocker / "sub" / "b.csv")


# --- command line ----------------------------------------------------------

def test_cli_preset_list(capsys):
    assert main(["preset", "list"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("scenario1", "scenario2", "narrowband"):
        assert name in out


def test_cli_preset_show_roundtrip(capsys, tmp_path):
    assert main(["preset", "show", "scenario1"]) == EXIT_OK
    text = capsys.readouterr().out
    assert scenario_from_text(text) == preset("scenario1")


def test_cli_bound(tmp_path):
    out = tmp_path / "b.csv"
    rc = main(["bound", "--params", "table1:80", "--snr-start-db", "0", "--snr-stop-db", "10",
               "--snr-step-db", "5", "--out", str(out)])
    assert rc == EXIT_OK
    assert len(read_csv(out)[1]) == 3


def test_cli_bound_explicit_params(tmp_path):
    out = tmp_path / "b.json"
    rc = main(["bound", "--k", "0", "--sigma-o2", "0.5", "--sigma-i2", "0", "--out", str(out),
               "--format", "json", "--snr-stop-db", "20"])
    assert rc == EXIT_OK
    for row in json.loads(out.read_text())["rows"]:
        assert abs(row["lower_bound"] - row["rayleigh"]) < 1e-9


@pytest.mark.parametrize("args", [
    ["--k", "1.2", "--sigma-o2", "0.5", "--sigma-i2", "0.1"],
    ["--k", "0.5", "--sigma-o2", "-0.5", "--sigma-i2", "0.1"],
    ["--k", "0.5"],
    ["--params", "table1:55"],
])
def test_cli_bound_validation(args, tmp_path, capsys):
    assert main(["bound", *args, "--out", str(tmp_path / "b.csv")]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_cli_unknown_preset(tmp_path):
    assert main(["ber", "--scenario", "nope", "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE


def test_cli_io_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rc = main(["bound", "--out", str(blocker / "b.csv"), "--snr-stop-db", "1"])
    assert rc == EXIT_IO
    assert str(blocker) in capsys.readouterr().err


def test_cli_fit_failure(monkeypatch, tmp_path):
    import mediumband.experiments as ex

    def broken(h, **kw):
        raise FitError("no convergence", FitResult(table1_params(20), 0.0, len(h), False))

    monkeypatch.setattr(ex, "fit", broken)
    rc = main(["pdf", "--scenario", "narrowband", "--samples", "100000", "--out", str(tmp_path / "p.csv")])
    assert rc == EXIT_FIT


def test_cli_pdf_sample_floor(tmp_path):
    assert main(["pdf", "--samples", "10", "--out", str(tmp_path / "p.csv")]) == EXIT_USAGE


def test_cli_ber_with_scenario_file(tmp_path):
    scen = tmp_path / "s.txt"
    scen.write_text(scenario_to_text(preset("narrowband")).replace("seed = 1", "seed = 5"))
    out = tmp_path / "ber.csv"
    rc = main(["ber", "--scenario-file", str(scen), "--snr-start-db", "0", "--snr-stop-db", "0",
               "--detector", "method1", "--min-errors", "50", "--params", "table1:20",
               "--out", str(out)])
    assert rc == EXIT_OK
    meta, rows, _ = read_csv(out)
    assert meta["seed"] == 5
    assert "ber_method2" not in rows[0]


def test_cli_ber_seed_changes_body(tmp_path):
    base = ["ber", "--scenario", "scenario1", "--snr-start-db", "5", "--snr-stop-db", "5",
            "--min-errors", "20", "--params", "table1:20"]
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    assert main([*base, "--seed", "1", "--out", str(a)]) == EXIT_OK
    assert main([*base, "--seed", "1", "--out", str(b)]) == EXIT_OK
    assert main([*base, "--seed", "2", "--out", str(c)]) == EXIT_OK
    assert read_csv(a)[2] == read_csv(b)[2] != read_csv(c)[2]


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "mediumband.cli", "preset", "list"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "scenario2" in res.stdout
