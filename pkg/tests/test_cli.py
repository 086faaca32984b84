import json
import re
import subprocess
import sys

import pytest

from nhtrap import acceptance, cli
from nhtrap.kerr import flow as kerr_flow


def manifest(path):
    return json.loads((path / "manifest.json").read_text())


def test_no_command_is_usage_error(capsys):
    assert cli.main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_toy_writes_artifacts(tmp_path):
    assert cli.main(["toy", "--output-dir", str(tmp_path), "--tol", "1e-10"]) == 0
    data = manifest(tmp_path)
    assert data["exit_code"] == 0 and data["error"] is None
    assert data["results"]["fixed_point_error"] < 1e-9
    assert set(data["files"]) == {"section.csv", "section.json", "decay.csv"}
    assert (tmp_path / "section.csv").read_text().count("\n") > 9


@pytest.mark.parametrize("argv", [
    ["toy", "--tol", "abc"],
    ["toy", "--tol", "-1"],
    ["toy", "--t-start", "300", "--t-end", "200"],
    ["toy", "--rho", "nonsense"],
    ["kerr-trapped", "--a", "1.5"],
    ["torus", "--profile", "square"],
    ["verify", "--only", "nothing-matches"],
])
def test_bad_parameters_exit_1(argv, tmp_path):
    assert cli.main(argv + ["--output-dir", str(tmp_path)]) == 1


@pytest.mark.parametrize("text", [
    "",
    'command = "toy"\nbogus = 1\n',
    'command = "toy"\n[parameters]\nwhat = 1\n',
    'command = "launch"\n',
    'command = "toy"\n[parameters]\neps = "wide"\n',
])
def test_bad_config_files_exit_1(text, tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(text)
    assert cli.main(["run", str(path)]) == 1


def test_json_and_toml_configs_agree(tmp_path):
    params = {"m": 1.0, "a": 0.0}
    js = tmp_path / "c.json"
    js.write_text(json.dumps({"command": "kerr-trapped", "parameters": params,
                              "output_dir": str(tmp_path / "a")}))
    tm = tmp_path / "c.toml"
    tm.write_text(f'command = "kerr-trapped"\noutput_dir = "{tmp_path / "b"}"\n'
                  "[parameters]\nm = 1.0\na = 0.0\n")
    assert cli.main(["run", str(js)]) == 0
    assert cli.main(["run", str(tm)]) == 0
    a = (tmp_path / "a" / "trapped.csv").read_text()
    assert a == (tmp_path / "b" / "trapped.csv").read_text()
    assert manifest(tmp_path / "a")["results"]["r"] == pytest.approx(3.0, abs=1e-10)


def test_output_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["kerr-rates", "--output-dir", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "env" / "rates.csv").exists()
    assert not (tmp_path / "flag").exists()


def test_runs_are_deterministic(tmp_path):
    for name in ("one", "two"):
        assert cli.main(["toy", "--output-dir", str(tmp_path / name), "--seed", "3"]) == 0
    for f in ("section.csv", "section.json", "decay.csv"):
        assert (tmp_path / "one" / f).read_bytes() == (tmp_path / "two" / f).read_bytes()


def test_numerical_failure_exits_2(tmp_path):
    assert cli.main(["toy", "--budget", "2", "--output-dir", str(tmp_path)]) == 2
    data = manifest(tmp_path)
    assert data["exit_code"] == 2
    assert data["error"]["name"] == "WindowExhausted"


def test_rates_for_kerr_default_to_equatorial(tmp_path):
    assert cli.main(["kerr-rates", "--a", "0.5", "--output-dir", str(tmp_path)]) == 0
    rates = manifest(tmp_path)["results"]["rates"]
    assert rates["nu_min"] > 0


def test_verify_passes_for_a_fast_check(tmp_path, capsys):
    assert cli.main(["verify", "--only", "3", "--output-dir", str(tmp_path)]) == 0
    assert re.search(r"^PASS\s+3\s", capsys.readouterr().out, re.M)
    assert "pass" in (tmp_path / "verify.csv").read_text()


def test_verify_detects_an_injected_fault(tmp_path, monkeypatch, capsys):
    real = kerr_flow.expansion_rates

    def doubled(*args, **kwargs):
        rates = real(*args, **kwargs)
        rates.nu_min *= 2
        return rates

    monkeypatch.setattr(kerr_flow, "expansion_rates", doubled)
    assert cli.main(["verify", "--only", "3", "--output-dir", str(tmp_path)]) == 2
    assert re.search(r"^FAIL\s+3\s", capsys.readouterr().out, re.M)
    assert manifest(tmp_path)["results"]["failed"] == ["3"]


def test_select_by_tag_and_prefix():
    assert all("torus" in c.tags for c in acceptance.select("torus"))
    assert [c.id for c in acceptance.select("6")] == [c.id for c in acceptance.CHECKS
                                                      if c.id.startswith("6-")]
    with pytest.raises(ValueError):
        acceptance.select("zzz")


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nhtrap.cli", "kerr-trapped",
                           "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
