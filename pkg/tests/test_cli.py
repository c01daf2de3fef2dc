import json
import subprocess
import sys

import numpy as np
import pytest

from ramanqot import __version__, bundled_scenario
from ramanqot.cli import EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, main


def _small(tmp_path, name="fw", count=21, **extra):
    """Bundled scenario cut down to ``count`` channels (curve paths made absolute)."""
    src = bundled_scenario(name)
    doc = json.loads(src.read_text())
    for key in ("attenuation_csv", "raman_gain_csv"):
        doc["fiber"][key] = str(src.parent / doc["fiber"][key])
    doc["channels"]["count"] = count
    doc.update(extra)
    path = tmp_path / f"{name}_{count}.json"
    path.write_text(json.dumps(doc))
    return path


def _csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, usecols=range(5))


def test_profile_fw(tmp_path, capsys):
    out = tmp_path / "fw"
    assert main(["profile", "--scenario", "fw", "--out", str(out)]) == EXIT_OK
    fit = (out / "fit.csv").read_text().splitlines()
    assert len(fit) == 1 + 131
    assert fit[0].startswith("wavelength_nm,alpha_1_m")
    summary = (out / "residual_summary.txt").read_text()
    assert "max_leff_error=" in summary and "pooled_residual_db=" in summary
    assert (out / "profile.csv").read_text().startswith("z_km,")
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "profile" and man["version"] == __version__ and man["seed"] == 0
    assert "timestamp" in man and man["scenario"].endswith("fw.json")


def test_profile_zero_pump_is_loss_only(tmp_path):
    out = tmp_path / "zp"
    assert main(["profile", "--scenario", str(_small(tmp_path, "zero_pump", 5)), "--out", str(out)]) == EXIT_OK
    data = np.loadtxt(out / "profile.csv", delimiter=",", skiprows=1)
    header = (out / "profile.csv").read_text().splitlines()[0]
    assert "pump" not in header
    assert np.all(np.diff(data[:, 1:], axis=0) < 0)


def test_malformed_scenario_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"fiber": ')
    assert main(["profile", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert "bad.json:1" in capsys.readouterr().err
    bad.write_text('{"fiber": {"gamma": 1.3}, "channels": {}}')
    assert main(["profile", "--scenario", str(bad), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert "$.fiber" in capsys.readouterr().err


def test_bad_flags_exit_code(tmp_path, capsys):
    scen = str(_small(tmp_path))
    assert main(["nli", "--scenario", scen, "--spans", "0", "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert main(["nli", "--scenario", scen, "--epsilon", "x", "--out", str(tmp_path / "o")]) == EXIT_INPUT
    with pytest.raises(SystemExit) as exc:
        main(["nli", "--scenario", scen, "--method", "exact"])
    assert exc.value.code == 2


def test_unknown_settings_key(tmp_path, capsys):
    scen = _small(tmp_path, settings={"solver": {"rtoll": 1e-6}})
    assert main(["profile", "--scenario", str(scen), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert "rtoll" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys):
    scen = str(_small(tmp_path, "bw", settings={"solver": {"bvp_max_iter": 1}}))
    code = main(["profile", "--scenario", scen, "--bvp-tol", "1e-12", "--out", str(tmp_path / "o")])
    assert code == EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err


def test_nli_both_writes_spectra_and_deltas(tmp_path, capsys):
    out = tmp_path / "nli"
    scen = str(_small(tmp_path))
    assert main(["nli", "--scenario", scen, "--method", "both", "--spans", "1,3,10", "--out", str(out)]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert [ln.split()[0] for ln in lines] == ["spans=1", "spans=3", "spans=10"]
    for n in (1, 3, 10):
        for kind in ("closed", "integral", "delta"):
            assert (out / f"nli_{n}span_{kind}.csv").exists()
        d = np.loadtxt(out / f"nli_{n}span_delta.csv", delimiter=",", skiprows=1)
        assert d.shape == (21, 4)
        assert np.allclose(d[:, 3], d[:, 1] - d[:, 2])
    one, ten = _csv(out / "nli_1span_closed.csv"), _csv(out / "nli_10span_closed.csv")
    # epsilon = 0: ten identical spans cost exactly 10 dB
    assert np.allclose(one[:, 4] - ten[:, 4], 10.0, atol=1e-9)


def test_nli_epsilon_auto(tmp_path, capsys):
    scen = str(_small(tmp_path))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["nli", "--scenario", scen, "--spans", "10", "--out", str(a)]) == EXIT_OK
    assert main(["nli", "--scenario", scen, "--spans", "10", "--epsilon", "auto", "--out", str(b)]) == EXIT_OK
    # coherent SPM accumulation only lowers SNR
    assert np.all(_csv(b / "nli_10span_closed.csv")[:, 4] < _csv(a / "nli_10span_closed.csv")[:, 4])


def test_nli_single_channel(tmp_path):
    out = tmp_path / "one"
    assert main(["nli", "--scenario", str(_small(tmp_path, "zero_pump", 1)), "--out", str(out)]) == EXIT_OK
    rows = (out / "nli_1span_closed.csv").read_text().splitlines()
    assert len(rows) == 2
    vals = rows[1].split(",")
    assert float(vals[2]) == 0.0 and float(vals[1]) == float(vals[3]) > 0


def test_nli_resolution_self_convergence(tmp_path):
    scen = str(_small(tmp_path, count=11))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["nli", "--scenario", scen, "--method", "integral", "--out", str(a)]) == EXIT_OK
    assert main(["nli", "--scenario", scen, "--method", "integral", "--resolution", "2", "--out", str(b)]) == EXIT_OK
    ea, eb = _csv(a / "nli_1span_integral.csv")[:, 3], _csv(b / "nli_1span_integral.csv")[:, 3]
    assert np.max(np.abs(ea / eb - 1)) < 5e-3


def test_outputs_are_byte_identical(tmp_path):
    scen = str(_small(tmp_path, "fwbw", 11))
    runs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert main(["nli", "--scenario", scen, "--method", "both", "--out", str(out)]) == EXIT_OK
        assert main(["profile", "--scenario", scen, "--out", str(out)]) == EXIT_OK
        runs.append(out)
    for name in ("nli_1span_closed.csv", "nli_1span_integral.csv", "nli_1span_delta.csv", "profile.csv", "fit.csv"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()


def test_cli_overrides_scenario_settings(tmp_path):
    scen = str(_small(tmp_path, count=5, settings={"solver": {"rtol": 1e-6}, "method": "closed"}))
    out = tmp_path / "o"
    assert main(["nli", "--scenario", scen, "--rtol", "1e-7", "--out", str(out)]) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert man["overrides"]["rtol"] == 1e-7
    assert (out / "nli_1span_closed.csv").exists() and not (out / "nli_1span_integral.csv").exists()


def test_optimize_trivial_floor(tmp_path, capsys):
    out = tmp_path / "opt"
    scen = str(_small(tmp_path, count=5))
    code = main(["optimize", "--scenario", scen, "--floor", "0.001", "--pumps", "3", "--restarts", "1",
                 "--max-evals", "100", "--out", str(out)])
    assert code == EXIT_OK
    assert json.loads((out / "pumps.json").read_text()) == {"pumps": []}
    rep = json.loads((out / "optimize_report.json").read_text())
    assert rep["feasible"] and rep["total_power"] == 0.0 and len(rep["comb_wavelength_nm"]) == 3


def test_optimize_infeasible_floor(tmp_path):
    scen = str(_small(tmp_path, count=5))
    code = main(["optimize", "--scenario", scen, "--floor", "1.0", "--pumps", "2", "--p-max", "0.01",
                 "--start", "0.01", "--restarts", "1", "--max-evals", "40", "--out", str(tmp_path / "o")])
    assert code == EXIT_NUMERIC


def test_verify(tmp_path, capsys):
    out = tmp_path / "v"
    assert main(["verify", "--out", str(out)]) == EXIT_OK
    text = (out / "verify_report.txt").read_text()
    assert text.count("PASS") == 10 and "FAIL" not in text
    assert "atan_integral: max rel err" in text


def test_verify_detects_perturbation(tmp_path, capsys):
    out = tmp_path / "v"
    assert main(["verify", "--draws", "10", "--perturb", "atan_integral=0.01", "--out", str(out)]) == EXIT_NUMERIC
    assert "FAIL atan_integral" in (out / "verify_report.txt").read_text()


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["verify", "--out", str(blocker / "sub")]) == EXIT_INPUT


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ramanqot", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == __version__
