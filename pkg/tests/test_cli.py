import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from obfluct import __version__, cli, core


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    header = {}
    lines = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
        else:
            lines.append(line)
    columns = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, columns, rows


def numeric(rows, columns, name):
    k = columns.index(name)
    return np.array([float(r[k]) for r in rows])


def test_steady_zero_drive(capsys):
    code, out, _ = run(capsys, "steady", "--C", "40", "--xi", "1", "--drive-Y", "0")
    assert code == 0
    header, columns, rows = parse_csv(out)
    assert len(rows) == 1
    assert float(rows[0][columns.index("X")]) == 0.0
    assert rows[0][columns.index("branch")] == "lower"


def test_steady_three_root_region(capsys):
    code, out, _ = run(capsys, "steady", "--C", "40", "--xi", "1", "--Y-min", "0", "--Y-max", "90",
                       "--Y-steps", "181")
    assert code == 0
    header, columns, rows = parse_csv(out)
    ys = numeric(rows, columns, "Y")
    values, counts = np.unique(ys, return_counts=True)
    multi = values[counts == 3]
    x_minus, x_plus = core.turning_points(40.0)
    assert multi.min() >= core.drive_for_amplitude(x_plus, 40.0)
    assert multi.max() <= core.drive_for_amplitude(x_minus, 40.0)
    assert set(counts) == {1, 3}
    assert float(header["X_minus"]) == pytest.approx(x_minus)


def test_header_echo(capsys):
    code, out, _ = run(capsys, "steady", "--preset", "raizen", "--drive-Y", "1")
    header, columns, _ = parse_csv(out)
    assert header["obfluct_version"] == __version__
    assert float(header["C"]) == pytest.approx(39.58136, rel=1e-6)
    assert float(header["xi"]) == pytest.approx(0.176)
    assert float(header["n_s"]) == pytest.approx(100 / (8 * 1.06**2))
    assert header["g"] == "1.0600000000000001"
    assert header["mode"] == "reduced"
    assert "r_gamma" in columns


def test_correlate_raizen(capsys):
    code, out, _ = run(capsys, "correlate", "--preset", "raizen", "--pair", "ν*z", "--components")
    assert code == 0
    header, columns, rows = parse_csv(out)
    assert columns == ["tau", "engine", "closed_form", "abs_diff", "rel_diff", "component_1", "component_2"]
    assert numeric(rows, columns, "rel_diff").max() < 1e-8
    total = numeric(rows, columns, "component_1") + numeric(rows, columns, "component_2")
    np.testing.assert_allclose(total, numeric(rows, columns, "closed_form"), rtol=1e-12, atol=1e-25)
    assert header["pair"] == "nu*z" and header["ic"] == "analytic"


def test_correlate_fig4(capsys):
    code, out, _ = run(capsys, "correlate", "--preset", "fig4", "--pair", "nu*z*")
    header, columns, rows = parse_csv(out)
    assert code == 0
    assert float(header["C"]) == pytest.approx(193.5, abs=0.1)
    assert numeric(rows, columns, "rel_diff").max() < 1e-8


def test_correlate_full_mode_uses_lyapunov(capsys):
    code, out, _ = run(capsys, "correlate", "--preset", "raizen", "--pair", "nu*z*", "--full")
    header, columns, rows = parse_csv(out)
    assert code == 0 and header["ic"] == "lyapunov" and header["mode"] == "full"
    assert numeric(rows, columns, "rel_diff").max() < 1e-4


def test_correlate_refuses_pair_without_closed_form(capsys):
    code, _, err = run(capsys, "correlate", "--preset", "raizen", "--pair", "zz")
    assert code == 2 and "numeric-only" in err
    code, out, _ = run(capsys, "correlate", "--preset", "raizen", "--pair", "zz", "--numeric-only",
                       "--full")
    assert code == 0
    assert parse_csv(out)[1] == ["tau", "engine"]


def test_spectrum(capsys):
    code, out, _ = run(capsys, "spectrum", "--preset", "raizen", "--pair", "zz*",
                       "--detuning-max", "10", "--detuning-steps", "2001")
    assert code == 0
    _, columns, rows = parse_csv(out)
    det, vals = numeric(rows, columns, "detuning"), numeric(rows, columns, "engine")
    np.testing.assert_allclose(vals, vals[::-1], rtol=1e-10)
    peaks = det[1:-1][(vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])]
    gbar = math.sqrt(0.176 * 2 * 39.58136363636363 - (0.176 - 1) ** 2 / 4)
    assert len(peaks) == 2
    np.testing.assert_allclose(np.abs(peaks), gbar, rtol=0.05)


def test_squeezing_spectrum(capsys):
    code, out, _ = run(capsys, "spectrum", "--preset", "raizen", "--pair", "nu*nu*",
                       "--detuning-max", "1", "--detuning-steps", "21")
    _, columns, rows = parse_csv(out)
    k = int(np.argmin(np.abs(numeric(rows, columns, "detuning"))))
    assert numeric(rows, columns, "engine")[k] < 0


def test_spectrum_rejects_other_pairs(capsys):
    code, _, _ = run(capsys, "spectrum", "--preset", "raizen", "--pair", "nu*z")
    assert code == 2


def test_covariance(capsys):
    code, out, _ = run(capsys, "covariance", "--preset", "raizen", "--X", "1e-3")
    _, columns, rows = parse_csv(out)
    assert code == 0
    assert columns == ["source", "row", "z", "z*", "nu", "nu*", "mu"]
    assert [r[0] for r in rows].count("lyapunov") == 5


def test_numerical_failure_exit_code(capsys):
    # X sits on the unstable middle branch for C = 40
    code, _, err = run(capsys, "covariance", "--C", "40", "--xi", "1", "--X", "5", "--full")
    assert code == 3
    assert "DegenerateSystemError" in err


@pytest.mark.parametrize("argv", [
    ["steady"],
    ["steady", "--preset", "nope"],
    ["correlate", "--preset", "raizen", "--C", "3"],
    ["correlate", "--preset", "raizen", "--X", "0.5"],
    ["steady", "--g", "-1", "--kappa", "1", "--gamma", "1", "--natoms", "1"],
])
def test_invalid_config_exit_code(capsys, argv):
    assert cli.main(argv) == 2


def test_figures(tmp_path, capsys):
    for n in (1, 2, 3, 4):
        assert cli.main(["figure", str(n), "--out", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["fig1_argmax.csv", "fig1_ratio.csv", "fig2_components.csv", "fig2_zero_crossings.csv",
                     "fig3_inset.csv", "fig3_main.csv", "fig4_overlay.csv"]

    _, cols, rows = parse_csv((tmp_path / "fig1_ratio.csv").read_text())
    assert numeric(rows, cols, "r").min() >= 1.0

    header, cols, rows = parse_csv((tmp_path / "fig2_zero_crossings.csv").read_text())
    zeros = numeric(rows, cols, "tau")
    gbar = float(header["Gbar"])
    np.testing.assert_allclose(np.diff(zeros), math.pi / gbar, rtol=0.02)

    for series in ("main", "inset"):
        _, cols, rows = parse_csv((tmp_path / f"fig3_{series}.csv").read_text())
        np.testing.assert_allclose(numeric(rows, cols, "sum") - numeric(rows, cols, "z_star_z_2"),
                                   numeric(rows, cols, "nu_star_z_2"), rtol=1e-9, atol=1e-12)


def test_json_format(capsys):
    code, out, _ = run(capsys, "correlate", "--preset", "raizen", "--format", "json", "--tau-steps", "5")
    doc = json.loads(out)
    assert doc["header"]["C"] == pytest.approx(39.58136, rel=1e-6)
    assert len(doc["rows"]) == 5 and doc["columns"][0] == "tau"


def test_byte_identical_runs(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert cli.main(["correlate", "--preset", "raizen", "--pair", "nu*z", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\npreset = raizen\nkappa = 0.18\ntau-steps = 7\n")
    code, out, _ = run(capsys, "correlate", "--config", str(cfg), "--pair", "nu*z*")
    header, _, rows = parse_csv(out)
    assert code == 0 and len(rows) == 7
    assert float(header["C"]) == pytest.approx(193.5, abs=0.1)
    code, out, _ = run(capsys, "correlate", "--config", str(cfg), "--kappa", "0.88", "--pair", "nu*z*")
    assert float(parse_csv(out)[0]["C"]) == pytest.approx(39.58, abs=0.01)


def test_config_file_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("preset = raizen\nfoo = 1\n")
    assert cli.main(["steady", "--config", str(cfg)]) == 2


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0
    assert out.count("PASS") == 4


def test_oracle_report(capsys):
    code, out, _ = run(capsys, "oracle")
    assert code == 0
    report = json.loads(out)["report"]
    assert report["linear_response"]["relative_error"] < 0.01
    dc = report["decoupled_cavity"]
    assert dc["amplitude"] == pytest.approx(dc["expected"], rel=1e-9)
    fit = report["rabi_fit"]
    assert fit["frequency"] == pytest.approx(fit["expected"], rel=0.05)


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "obfluct.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
