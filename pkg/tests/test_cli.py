import csv
import json
import math
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from forch.cli import dump_json, main, sanitize
from forch.constitutive import M0, GeneralizedPolynomial, FlowParams
from forch.experiments import run_tuple

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"

SMALL_ANNULUS = """
experiment = "small-annulus"

[model]
family = "reference"

[flow]
n = 2
r0 = 1.0
c1 = 1.0
c2 = 1.0
s0 = 0.5
g1 = { coefficients = [1.0, 1.0], exponents = [0.0, 1.0] }
g2 = { coefficients = [1.0, 1.0], exponents = [0.0, 1.0] }

[steady]
r_end = 100.0

[linearize]
R = 2.0

[solver]
domain = "annulus"
r_out = 2.0
nodes = 41
dt = 5e-3
cycles = 2
modes = [0, 1]
output_every = 5
"""


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_table(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# config_sha256: ")
    rows = list(csv.reader(lines[1:]))
    return lines[0].split(": ")[1], rows[0], rows[1:]


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_ANNULUS)
    return path


def test_classify_example(capsys):
    code, out, _ = run_cli(capsys, "classify", "--config", CONFIGS / "a3ii.toml")
    assert code == 0
    payload = json.loads(out)
    assert payload["case"] == "A3(ii)"
    assert payload["prediction"] == {"set": [0.5]}
    assert len(out.strip().splitlines()) == 1


def test_steady_csv_is_strictly_decreasing(capsys, tmp_path):
    target = tmp_path / "nested" / "caseD.csv"
    code, out, _ = run_cli(capsys, "steady", "--config", CONFIGS / "caseD.toml", "--csv", target)
    assert code == 0
    cfg_hash, header, rows = read_table(target)
    assert header == ["r", "S", "dSdr", "h"]
    S = [float(r[1]) for r in rows]
    assert len(S) == 101
    assert all(b < a for a, b in zip(S, S[1:]))
    assert json.loads(out)["config_sha256"] == cfg_hash


def test_missing_model_table(capsys):
    code, _, err = run_cli(capsys, "steady", "--config", CONFIGS / "no_model.toml")
    assert code == 2
    assert "[model]" in err


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[flow]\nn = = 3\n")
    code, _, err = run_cli(capsys, "classify", "--config", bad)
    assert code == 2
    assert "line 2" in err


def test_missing_config_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["classify"])
    assert info.value.code == 2


def test_validate_model(capsys):
    code, out, _ = run_cli(capsys, "validate-model", "--config", CONFIGS / "caseD.toml")
    assert code == 0
    assert json.loads(out)["passed"] is True


def test_grid_sweep_rejects_zero_fluxes(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "sweep", "--config", CONFIGS / "grid_sweep.toml", "--out", tmp_path)
    payload = json.loads(out)
    assert code == 1  # rejected tuples make the sweep report a failure
    assert payload["failed"] == 0 and payload["passed"] == 20
    assert len(payload["rejected"]) == 4
    assert all(r["c1"] == 0.0 and r["c2"] == 0.0 for r in payload["rejected"])
    _, header, rows = read_table(tmp_path / "sweep.csv")
    assert len(rows) == 20 and "s_infty" in header


def test_single_tuple_sweep_equals_single_run(capsys, tmp_path):
    cfg = tmp_path / "one.toml"
    cfg.write_text("""
[model]
family = "reference"
[flow]
n = 3
g1 = { coefficients = [1.0, 1.0], exponents = [0.0, 1.0] }
g2 = { coefficients = [1.0, 1.0], exponents = [0.0, 1.0] }
[sweep]
c1 = [1.0]
c2 = [-1.0]
s0 = [0.5]
""")
    code, _, _ = run_cli(capsys, "sweep", "--config", cfg, "--out", tmp_path / "out")
    assert code == 0
    _, header, rows = read_table(tmp_path / "out" / "sweep.csv")
    assert len(rows) == 1
    law = GeneralizedPolynomial.two_term(1.0, 1.0, 1.0)
    direct = run_tuple(FlowParams(3, 1.0, 1.0, -1.0, law, law, M0, 0.5))
    row = dict(zip(header, rows[0]))
    assert float(row["s_infty"]) == direct.s_infty
    assert row["case"] == direct.case


def test_coeffs_and_constants(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "coeffs", "--config", CONFIGS / "caseD.toml", "--radii", "1,2.5",
                           "--csv", tmp_path / "c.csv")
    assert code == 0
    coeffs = json.loads(out)["coefficients"]
    assert [c["r"] for c in coeffs] == [1.0, 2.5]
    assert coeffs[0]["Lambda"] == 0.0
    code, out, _ = run_cli(capsys, "constants", "--config", CONFIGS / "caseD.toml", "--R", "3")
    assert code == 0
    pack = json.loads(out)["constants"]
    assert pack["R"] == 3.0 and math.isclose(pack["kappa0"] * pack["kappa1"], 0.25)


def test_barriers_family_and_report(capsys, tmp_path):
    report = tmp_path / "rep" / "shell.json"
    code, out, _ = run_cli(capsys, "barriers", "--config", CONFIGS / "caseD.toml", "--family", "shell",
                           "--ell", 40, "--samples", 500, "--report", report)
    assert code == 0
    stored = json.loads(report.read_text())
    assert list(stored["reports"]) == ["shell_sub"]
    assert stored["reports"]["shell_sub"]["samples"] == 500
    assert stored["specs"]["shell_sub"]["ell"] == 40.0
    assert stored["passed"] is True
    assert stored["config_sha256"] == json.loads(out)["config_sha256"]


def test_simulate_then_verify(capsys, tmp_path, small_config):
    out = tmp_path / "run"
    code, _, _ = run_cli(capsys, "simulate", "--config", small_config, "--out", out)
    assert code == 0
    for name in ("field.csv", "sup.csv", "meta.json", "report.json"):
        assert (out / name).exists()
    report = json.loads((out / "report.json").read_text())
    assert report["summary"]["envelope_all_ok"] is True
    code, text, _ = run_cli(capsys, "verify", "--config", small_config, "--run", out)
    assert code == 0 and json.loads(text)["verified"] is True
    # config path recorded in meta.json
    code, text, _ = run_cli(capsys, "verify", "--run", out)
    assert code == 0


def test_verify_refuses_other_config(capsys, tmp_path, small_config):
    out = tmp_path / "run"
    run_cli(capsys, "simulate", "--config", small_config, "--out", out)
    other = tmp_path / "other.toml"
    other.write_text(SMALL_ANNULUS.replace("nodes = 41", "nodes = 41  # edited"))
    code, text, _ = run_cli(capsys, "verify", "--config", other, "--run", out)
    assert code == 3
    assert json.loads(text)["verified"] is False


@pytest.mark.parametrize("line,factor", [(7, 1.5), (5, 1e3)])
def test_verify_detects_tampered_sup(capsys, tmp_path, small_config, line, factor):
    """Line 7 is a stored field level (caught by consistency), line 5 is not (caught by the envelope)."""
    out = tmp_path / "run"
    run_cli(capsys, "simulate", "--config", small_config, "--out", out)
    lines = (out / "sup.csv").read_text().splitlines()
    t, sup, env = lines[line].split(",")
    lines[line] = ",".join([t, repr(float(sup) * factor), env])
    (out / "sup.csv").write_text("\n".join(lines) + "\n")
    code, text, _ = run_cli(capsys, "verify", "--config", small_config, "--run", out)
    assert code == 1 and json.loads(text)["verified"] is False


def test_outputs_are_byte_identical(capsys, tmp_path, small_config):
    for name in ("a", "b"):
        run_cli(capsys, "simulate", "--config", small_config, "--out", tmp_path / name)
        run_cli(capsys, "steady", "--config", CONFIGS / "caseD.toml", "--csv", tmp_path / name / "steady.csv")
    for name in ("field.csv", "sup.csv", "steady.csv", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_hash_in_every_artifact(capsys, tmp_path, small_config):
    out = tmp_path / "run"
    run_cli(capsys, "simulate", "--config", small_config, "--out", out)
    hashes = {read_table(out / "field.csv")[0], read_table(out / "sup.csv")[0],
              json.loads((out / "meta.json").read_text())["config_sha256"],
              json.loads((out / "report.json").read_text())["config_sha256"]}
    assert len(hashes) == 1


def test_json_sanitizing():
    text = dump_json({"b": float("inf"), "a": [float("nan"), -math.inf, 1.5]})
    assert json.loads(text) == {"a": ["nan", "-inf", 1.5], "b": "inf"}
    assert text.index('"a"') < text.index('"b"')
    assert sanitize((1, 2)) == [1, 2]


def test_console_entry_point(tmp_path):
    exe = shutil.which("forch")
    cmd = [exe] if exe else [sys.executable, "-m", "forch.cli"]
    proc = subprocess.run(cmd + ["classify", "--config", str(CONFIGS / "a3ii.toml")],
                          capture_output=True, text=True, cwd=tmp_path, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["case"] == "A3(ii)"
