import hashlib
from pathlib import Path

import pytest

from forch.config import ConfigParseError, config_hash, load_config, parse_config
from forch.constitutive import M0, PowerLawModel, TabulatedModel
from forch.errors import ConfigurationError

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"

BASE = """
experiment = "unit"

[model]
family = "reference"

[flow]
n = 3
c1 = 1.0
c2 = -1.0
"""


def test_parse_error_reports_line_and_column():
    text = 'experiment = "x"\n[flow]\nn = 3\nc1 = = 1\n'
    with pytest.raises(ConfigParseError) as info:
        parse_config(text, "bad.toml")
    assert info.value.line == 4
    assert info.value.column is not None and info.value.column >= 1
    assert "bad.toml" in str(info.value) and "line 4" in str(info.value)


def test_parse_error_at_end_of_document():
    with pytest.raises(ConfigParseError) as info:
        parse_config('[flow]\nn = 3\ng1 = { coefficients = [1.0')
    assert info.value.line == 3


def test_unknown_table_rejected():
    with pytest.raises(ConfigurationError, match=r"unknown table \[mesh\]"):
        parse_config(BASE + "\n[mesh]\nnodes = 3\n")


def test_missing_table_named():
    cfg = parse_config(BASE)
    with pytest.raises(ConfigurationError, match=r"missing \[solver\] table"):
        cfg.require("solver")
    cfg.require("model", "flow")


def test_missing_flow_key():
    cfg = parse_config('[model]\nfamily = "reference"\n[flow]\nn = 3\nc1 = 1.0\n')
    with pytest.raises(ConfigurationError, match="c2"):
        cfg.flow_params()


def test_flow_params_defaults_and_overrides():
    cfg = parse_config(BASE)
    p = cfg.flow_params()
    assert (p.n, p.r0, p.c1, p.c2, p.s0) == (3, 1.0, 1.0, -1.0, 0.5)
    assert p.model is M0
    assert p.g1(0.7) == 1.0
    assert cfg.flow_params(c1=2.0).c1 == 2.0


def test_normalized_lengths_scale_with_r0():
    text = """
normalized = true
[flow]
n = 3
r0 = 2.5
c1 = 1.0
c2 = 1.0
[steady]
r_end = 100.0
[linearize]
R = 2.0
[solver]
r_out = 40.0
initial = { kind = "bump", support = 3.0 }
"""
    cfg = parse_config(text)
    assert cfg.tables["steady"]["r_end"] == 250.0
    assert cfg.tables["linearize"]["R"] == 5.0
    assert cfg.tables["solver"]["r_out"] == 100.0
    assert cfg.tables["solver"]["initial"]["support"] == 7.5
    assert cfg.steady_options()["r_end"] == 250.0


def test_unnormalized_lengths_untouched():
    cfg = parse_config("[flow]\nr0 = 2.5\n[steady]\nr_end = 100.0\n")
    assert cfg.tables["steady"]["r_end"] == 100.0


def test_hash_is_sha256_of_bytes(tmp_path):
    text = BASE + "# trailing comment\n"
    path = tmp_path / "c.toml"
    path.write_bytes(text.encode())
    assert load_config(path).hash == hashlib.sha256(text.encode()).hexdigest()
    assert config_hash(text) == config_hash(text.encode())
    assert config_hash(text) != config_hash(BASE)


def test_model_families(tmp_path):
    power = parse_config('[model]\nfamily = "power"\ntheta1 = 2.0\ntheta2 = 2.0\na = 3.0\nb = 3.0\n')
    assert isinstance(power.model(), PowerLawModel)
    csv = tmp_path / "m.csv"
    rows = ["S,f1,f2,pc_prime"] + [f"{s},{s * s},{(1 - s) ** 2},{1.0}" for s in (0.1, 0.3, 0.5, 0.7, 0.9)]
    csv.write_text("\n".join(rows) + "\n")
    cfg_path = tmp_path / "t.toml"
    cfg_path.write_text('[model]\nfamily = "tabulated"\npath = "m.csv"\n')
    assert isinstance(load_config(cfg_path).model(), TabulatedModel)
    with pytest.raises(ConfigurationError):
        parse_config('[model]\nfamily = "spline"\n').model()
    with pytest.raises(ConfigurationError):
        parse_config('[model]\nfamily = "tabulated"\n').model()


def test_bad_law_spec():
    cfg = parse_config(BASE.replace("c2 = -1.0", "c2 = -1.0\ng1 = { coefficients = [1.0] }"))
    with pytest.raises(ConfigurationError, match="g1"):
        cfg.laws()


def test_seed_type():
    assert parse_config("seed = 7\n").seed == 7
    with pytest.raises(ConfigurationError):
        parse_config('seed = "seven"\n')


def test_unreadable_and_non_utf8(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.toml")
    bad = tmp_path / "bad.toml"
    bad.write_bytes(b"experiment = \"\xff\"\n")
    with pytest.raises(ConfigParseError):
        load_config(bad)


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")))
def test_demo_configs_parse(name):
    cfg = load_config(CONFIGS / name)
    assert cfg.experiment
    assert len(cfg.hash) == 64
