"""TOML experiment configuration.

A configuration names an experiment and carries the tables each command
needs: ``[model]``, ``[flow]``, ``[steady]``, ``[linearize]``,
``[solver]`` and ``[sweep]``.  Commands ask for the tables they use through
:meth:`ExperimentConfig.require`, so a missing table is reported by name.

With ``normalized = true`` every length (r_end, R, r_out, support, ...)
is given in units of r0 and is scaled on load.
"""
from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .constitutive import M0, FlowParams, GeneralizedPolynomial, PowerLawModel, TabulatedModel
from .errors import ConfigurationError

__all__ = ["ExperimentConfig", "ConfigParseError", "load_config", "parse_config", "config_hash"]

TABLES = ("model", "flow", "steady", "linearize", "solver", "sweep")

# keys holding lengths, per table; scaled by r0 when normalized = true
LENGTH_KEYS = {
    "steady": ("r_end",),
    "linearize": ("R",),
    "solver": ("r_out", "support", "base_radius"),
}


class ConfigParseError(ConfigurationError):
    """TOML syntax error, with the 1-based line and column of the fault."""

    def __init__(self, message, line=None, column=None, path=None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{path or '<config>'}: {message}{where}")
        self.line, self.column, self.path = line, column, path


def config_hash(text: str | bytes) -> str:
    if isinstance(text, str):
        text = text.encode("utf-8")
    return hashlib.sha256(text).hexdigest()


def _error_position(exc, text: str) -> tuple:
    # tomli / tomllib report "... (at line L, column C)"
    msg = str(exc)
    line = col = None
    if "(at line" in msg:
        tail = msg.rsplit("(at line", 1)[1]
        try:
            parts = tail.strip(" )").split(",")
            line = int(parts[0])
            col = int(parts[1].split()[-1])
        except (ValueError, IndexError):
            pass
        msg = msg.rsplit("(at line", 1)[0].strip()
    elif "at end of document" in msg:
        msg = msg.replace("(at end of document)", "").strip()
        lines = text.split("\n")
        line, col = len(lines), len(lines[-1]) + 1
    return msg, line, col


def _poly(spec, where) -> GeneralizedPolynomial:
    if isinstance(spec, (int, float)):
        return GeneralizedPolynomial.constant(float(spec))
    if not isinstance(spec, dict) or "coefficients" not in spec or "exponents" not in spec:
        raise ConfigurationError(f"{where} needs 'coefficients' and 'exponents'")
    return GeneralizedPolynomial(tuple(spec["coefficients"]), tuple(spec["exponents"]))


@dataclass
class ExperimentConfig:
    """Parsed configuration.

    ``tables`` keeps the raw (length-scaled) tables; the helpers below turn
    them into package objects.
    """

    experiment: str
    tables: dict
    normalized: bool = False
    seed: int = 0
    hash: str = ""
    path: str | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    def has(self, name: str) -> bool:
        return name in self.tables

    def require(self, *names) -> None:
        missing = [n for n in names if n not in self.tables]
        if missing:
            raise ConfigurationError(f"missing [{missing[0]}] table in {self.path or 'config'}")

    def table(self, name: str) -> dict:
        self.require(name)
        return self.tables[name]

    # -- builders -----------------------------------------------------------

    def model(self):
        spec = self.table("model")
        family = spec.get("family", "power")
        if family == "power":
            keys = ("theta1", "theta2", "a", "b", "P0")
            return PowerLawModel(**{k: float(spec[k]) for k in keys if k in spec})
        if family == "reference":
            return M0
        if family == "tabulated":
            if "path" not in spec:
                raise ConfigurationError("[model] family 'tabulated' needs a 'path'")
            path = Path(spec["path"])
            if not path.is_absolute():
                path = self.base_dir / path
            return TabulatedModel.from_csv(path)
        raise ConfigurationError(f"[model] unknown family {family!r}")

    def laws(self):
        flow = self.table("flow")
        g1 = _poly(flow.get("g1", 1.0), "[flow] g1")
        g2 = _poly(flow.get("g2", 1.0), "[flow] g2")
        return g1, g2

    def flow_params(self, **overrides) -> FlowParams:
        flow = self.table("flow")
        g1, g2 = self.laws()
        for key in ("n", "c1", "c2"):
            if key not in flow and key not in overrides:
                raise ConfigurationError(f"[flow] lacks required key {key!r}")
        values = {"n": flow.get("n"), "r0": flow.get("r0", 1.0), "c1": flow.get("c1"),
                  "c2": flow.get("c2"), "s0": flow.get("s0", 0.5)}
        values.update(overrides)
        return FlowParams(int(values["n"]), float(values["r0"]), float(values["c1"]), float(values["c2"]),
                          g1, g2, self.model(), float(values["s0"]))

    @property
    def r0(self) -> float:
        return float(self.tables.get("flow", {}).get("r0", 1.0))

    def steady_options(self) -> dict:
        st = self.tables.get("steady", {})
        opts = {"r_end": float(st.get("r_end", 1e4 * self.r0))}
        for key in ("rtol", "atol"):
            if key in st:
                opts[key] = float(st[key])
        return opts


def _scale_lengths(tables: dict, r0: float) -> None:
    for name, keys in LENGTH_KEYS.items():
        tab = tables.get(name)
        if not isinstance(tab, dict):
            continue
        for key in keys:
            if key in tab:
                tab[key] = float(tab[key]) * r0
        if name == "solver":
            init = tab.get("initial")
            if isinstance(init, dict) and "support" in init:
                init["support"] = float(init["support"]) * r0


def parse_config(text: str, path: str | None = None, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse TOML text into an ExperimentConfig.

    Raises
    ------
    ConfigParseError
        On TOML syntax errors, with line and column.
    ConfigurationError
        On structural problems (unknown table, bad types).
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg, line, col = _error_position(exc, text)
        raise ConfigParseError(msg, line, col, path) from None
    unknown = [k for k, v in raw.items() if isinstance(v, dict) and k not in TABLES]
    if unknown:
        raise ConfigurationError(f"unknown table [{unknown[0]}]")
    tables = {k: v for k, v in raw.items() if isinstance(v, dict)}
    normalized = bool(raw.get("normalized", False))
    if normalized:
        r0 = float(tables.get("flow", {}).get("r0", 1.0))
        if not (math.isfinite(r0) and r0 > 0):
            raise ConfigurationError("[flow] r0 must be positive")
        _scale_lengths(tables, r0)
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigurationError("seed must be an integer")
    return ExperimentConfig(str(raw.get("experiment", "custom")), tables, normalized, seed,
                            config_hash(text), path, base_dir or Path.cwd())


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise ConfigParseError("config is not valid UTF-8", path=str(path)) from None
    cfg = parse_config(text, str(path), path.parent)
    cfg.hash = config_hash(data)
    return cfg
