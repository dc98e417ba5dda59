import json
import subprocess
import sys

import pytest

from hcfqkd.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_RUNTIME, main


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    assert "hbt_pre" in capsys.readouterr().out.split()


def test_sim_writes_bundle(tmp_path, capsys):
    out = tmp_path / "hbt"
    assert main(["sim", "hbt_pre", "--pulses", "200000", "--out", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("g2 ")
    assert len(lines[0].split()) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["metrics"]["g2"]["sigma"] > 0
    assert (out / "histogram.csv").exists()


def test_env_var_sets_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("HCFQKD_OUT", str(tmp_path))
    assert main(["sim", "fiber_budget"]) == 0
    assert (tmp_path / "fiber_budget" / "fiber_report.csv").exists()


def test_qkd_prints_state_table(tmp_path, capsys):
    assert main(["qkd", "bb84_pol_zero_noise", "--pulses", "100000", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "state,sent,sifted,errors,qber,qber_sigma"
    assert out[-1].startswith("all,")


def test_qkd_rejects_other_scenarios(tmp_path):
    assert main(["qkd", "hbt_pre", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_keyrate_verbose(tmp_path, capsys):
    assert main(["keyrate", "keyrate_reach", "-v", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("loss_db,rate_bits_per_pulse,rate_bits_per_s\n")
    assert "max_distance_km[improved]" in out


def test_fiber_subcommand(capsys):
    assert main(["fiber", "--wavelength", "0.934"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "wavelength_um,window,prop_db,iface_db,total_db,transmittance"
    assert lines[1].startswith("0.934,3,")
    assert main(["fiber", "--resonances"]) == 0
    assert capsys.readouterr().out.splitlines()[1].startswith("1,2.52")


def test_on_resonance_is_config_error(capsys):
    assert main(["fiber", "--wavelength", "1.26"]) == EXIT_CONFIG
    assert capsys.readouterr().out == ""


def test_bad_config_exit_code(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"scenario": "hbt", "fiber": {"length": -2}}')
    assert main(["sim", str(p)]) == EXIT_CONFIG
    p.write_text("")
    assert main(["sim", str(p)]) == EXIT_CONFIG


def test_infeasible_exit_code(tmp_path):
    p = tmp_path / "k.json"
    p.write_text(json.dumps({"scenario": "keyrate", "keyrate": {"gain": 0.001, "qber": 0.01, "p_multi": 0.002}}))
    assert main(["keyrate", str(p), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE


def test_runtime_error_on_unsorted_tags(tmp_path):
    p = tmp_path / "tags.csv"
    p.write_text("channel,timestamp_ps\n0,100\n1,50\n")
    assert main(["analyze", str(p), "--out", str(tmp_path)]) == EXIT_RUNTIME


def test_analyze_dumped_tags(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["sim", "hbt_pre", "--pulses", "300000", "--dump-tags", "--out", str(out)]) == 0
    sim_line = capsys.readouterr().out.splitlines()[0].split()
    # the dumped tags hold both detectors in one file
    tags = out / "time_tags.csv"
    assert tags.exists()
    hist = tmp_path / "h.csv"
    assert main(["analyze", str(tags), "--histogram", str(hist)]) == 0
    line = capsys.readouterr().out.strip().split()
    assert line[0] == "g2"
    assert float(line[1]) == pytest.approx(float(sim_line[1]), rel=1e-5)
    assert hist.read_text().startswith("delay_ps,")


def test_compare_subcommand(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["keyrate", "keyrate_reach", "--out", str(tmp_path / name)]) == 0
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "metric,a,b,delta,sigma"
    assert all(line.split(",")[3] == "0.0" for line in out[1:])


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "hcfqkd.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "analyze" in r.stdout
