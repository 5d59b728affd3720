"""Command line interface: ``forch <command> --config file.toml``.

Exit status: 0 success, 1 a check or validation failed, 2 configuration
or usage error, 3 artifact mismatch (``verify`` against another config).
Every artifact carries the sha256 of the config file; JSON goes through
:func:`dump_json` so output is stable and strictly valid.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigParseError, ExperimentConfig, load_config
from .errors import ConfigurationError, ForchError

__all__ = ["main", "build_parser", "dump_json", "sanitize"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_MISMATCH = 0, 1, 2, 3
HASH_PREFIX = "# config_sha256: "


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def sanitize(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "to_dict"):
        return sanitize(obj.to_dict())
    return obj


def dump_json(obj, indent=2) -> str:
    return json.dumps(sanitize(obj), sort_keys=True, indent=indent, allow_nan=False) + "\n"


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def write_csv(path: Path, header, rows, cfg_hash: str) -> None:
    buf = io.StringIO()
    buf.write(f"{HASH_PREFIX}{cfg_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def read_csv(path: Path):
    text = path.read_text().splitlines()
    cfg_hash = text[0][len(HASH_PREFIX):] if text and text[0].startswith(HASH_PREFIX) else None
    rows = list(csv.reader(l for l in text if not l.startswith("#")))
    return cfg_hash, rows[0], rows[1:]


def _emit(args, name: str, payload: dict, cfg: ExperimentConfig, lines: bool = False) -> None:
    payload = dict(payload)
    payload["config_sha256"] = cfg.hash
    text = dump_json(payload, indent=None) if lines else dump_json(payload)
    sys.stdout.write(text)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_validate_model(args, cfg):
    from .constitutive import validate_model
    cfg.require("model")
    g1 = g2 = None
    if cfg.has("flow"):
        g1, g2 = cfg.laws()
    report = validate_model(cfg.model(), g1, g2)
    _emit(args, "validate_model", report.to_dict(), cfg)
    return EXIT_OK if report.passed else EXIT_FAIL


def _profile(cfg, params=None):
    from .steady import integrate_profile
    params = params or cfg.flow_params()
    opts = cfg.steady_options()
    return integrate_profile(params, opts.pop("r_end"), **opts)


def cmd_steady(args, cfg):
    from .steady import equilibrium_h
    cfg.require("model", "flow")
    if args.r_end is not None:
        cfg.tables.setdefault("steady", {})["r_end"] = float(args.r_end)
    profile = _profile(cfg)
    samples = int(cfg.tables.get("steady", {}).get("samples", 201))
    r_hi = profile.r_max if math.isfinite(profile.r_max) else profile.r_end
    r = np.geomspace(profile.r0, r_hi, samples)
    S = np.asarray(profile(r))
    dS = np.asarray(profile.derivative(r))
    if args.csv:
        params = profile.params
        if params.c1 * params.c2 > 0:
            h = np.asarray(equilibrium_h(params, r), dtype=float)
        else:
            h = [None] * r.size
        write_csv(Path(args.csv), ["r", "S", "dSdr", "h"], zip(r, S, dS, h), cfg.hash)
    payload = {"params": profile.params.to_dict(), "r_end": profile.r_end, "r_max": profile.r_max,
               "exit_side": profile.exit_side, "nfev": profile.nfev,
               "tail": None if profile.tail is None else dict(profile.tail.__dict__),
               "s_infty": None if profile.s_infty is None else profile.s_infty.to_dict()}
    _emit(args, "steady", payload, cfg)
    return EXIT_OK


def cmd_classify(args, cfg):
    from .steady import classify_case
    cfg.require("model", "flow")
    label = classify_case(cfg.flow_params())
    _emit(args, "classify", label.to_dict(), cfg, lines=True)
    return EXIT_OK


def _sweep_tuples(cfg, seed):
    from .experiments import SweepTuple, classification_tuples
    sweep_table = cfg.tables.get("sweep", {})
    if sweep_table.get("preset") == "classification":
        return classification_tuples(seed, int(sweep_table.get("per_case", 9)), int(sweep_table.get("n2_per_case", 8)),
                                     model=cfg.model(), r0=cfg.r0), []
    flow = cfg.table("flow")
    grid = {k: list(sweep_table.get(k, [flow.get(k)] if flow.get(k) is not None else [])) for k in ("c1", "c2", "s0")}
    if not grid["s0"]:
        grid["s0"] = [0.5]
    for key in ("c1", "c2"):
        if not grid[key]:
            raise ConfigurationError(f"[sweep] needs a list for {key} (or a value in [flow])")
    g1, g2 = cfg.laws()
    b1_list = sweep_table.get("b1", [None])
    b2_list = sweep_table.get("b2", [None])
    tuples, rejected = [], []
    for c1, c2, s0, b1, b2 in itertools.product(grid["c1"], grid["c2"], grid["s0"], b1_list, b2_list):
        try:
            law1 = g1 if b1 is None else _with_b(g1, b1)
            law2 = g2 if b2 is None else _with_b(g2, b2)
            params = cfg.flow_params(c1=c1, c2=c2, s0=s0)
            params = params.replace(g1=law1, g2=law2)
            tuples.append(SweepTuple("", params))
        except ForchError as exc:
            rejected.append({"c1": c1, "c2": c2, "s0": s0, "b1": b1, "b2": b2,
                             "error": f"{type(exc).__name__}: {exc}"})
    return tuples, rejected


def _with_b(law, b):
    from .constitutive import GeneralizedPolynomial
    a, _, alpha = law.two_term_parts()
    return GeneralizedPolynomial.two_term(a, float(b), alpha)


def cmd_sweep(args, cfg):
    from .experiments import ENDPOINT_TOL, run_sweep
    cfg.require("model", "sweep")
    seed = cfg.seed if args.seed is None else args.seed
    tuples, rejected = _sweep_tuples(cfg, seed)
    sweep_table = cfg.tables.get("sweep", {})
    tol = float(sweep_table.get("tol", ENDPOINT_TOL))
    r_end_factor = float(sweep_table.get("r_end_factor", 1e4))
    rows = run_sweep(tuples, r_end_factor, tol, threads=max(1, args.threads))
    header = ["index", "target", "case", "n2_case", "c1", "c2", "s0", "prediction", "s_infty",
              "uncertainty", "R_detect", "tail_sign", "passed", "error"]
    table = [[row.index, row.target, row.case, row.n2_case, t.params.c1, t.params.c2, t.params.s0,
              row.prediction, row.s_infty, row.uncertainty, row.R_detect, row.tail_sign, row.passed, row.error]
             for t, row in zip(tuples, rows)]
    out = Path(args.out) if args.out is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "sweep.csv", header, table, cfg.hash)
    passed = sum(r.passed for r in rows)
    payload = {"tuples": len(rows), "passed": passed, "failed": len(rows) - passed,
               "rejected": rejected, "tol": tol, "seed": seed,
               "failures": [r.to_dict() for r in rows if not r.passed]}
    _emit(args, "sweep", payload, cfg)
    return EXIT_OK if passed == len(rows) and not rejected else EXIT_FAIL


def _field(cfg, params=None):
    from .linearize import CoefficientField
    return CoefficientField(_profile(cfg, params))


def cmd_coeffs(args, cfg):
    from .linearize import coeffs_at
    cfg.require("model", "flow")
    field = _field(cfg)
    radii = args.radii or cfg.tables.get("linearize", {}).get("radii") or [cfg.r0]
    rows = []
    for r in radii:
        c = coeffs_at(field, float(r))
        c.update({"r": float(r), "Lambda": float(field.Lambda(float(r))), "chi": float(field.chi(float(r)))})
        rows.append(c)
    if args.csv:
        keys = ["r", "beta", "gamma", "phi_coeff", "lambda_drift", "Lambda", "chi"]
        write_csv(Path(args.csv), keys, ([row[k] for k in keys] for row in rows), cfg.hash)
    _emit(args, "coeffs", {"coefficients": rows}, cfg)
    return EXIT_OK


def _R(cfg, default=None):
    lin = cfg.tables.get("linearize", {})
    if "R" in lin:
        return float(lin["R"])
    if default is not None:
        return default
    raise ConfigurationError("[linearize] needs R")


def cmd_constants(args, cfg):
    from .barriers import growth_scalars
    from .linearize import constants
    cfg.require("model", "flow")
    if args.R is not None:
        cfg.tables.setdefault("linearize", {})["R"] = float(args.R)
    field = _field(cfg)
    pack = constants(field, _R(cfg))
    _emit(args, "constants", {"constants": pack.to_dict(), "growth": growth_scalars(pack, pack.R)}, cfg)
    return EXIT_OK


FAMILY_NAMES = {"growth": "growth_time", "outer": "outer_sup", "shell": "shell_sub"}


def cmd_barriers(args, cfg):
    from .experiments import barrier_suite
    cfg.require("model", "flow", "linearize")
    lin = cfg.table("linearize")
    field = _field(cfg)
    families = FAMILY_NAMES.values() if args.family is None else [FAMILY_NAMES[args.family]]
    samples = args.samples if args.samples is not None else int(lin.get("samples", 10_000))
    out = barrier_suite(field, _R(cfg), float(lin.get("T", 1.0)), float(lin.get("ratio", 1e6)),
                        float(lin.get("shell_T", 0.5)), samples, tuple(families), args.ell)
    payload = {"R_out": out["R_out"], "shell": out["shell"], "passed": out["passed"],
               "reports": {k: v.to_dict() for k, v in out["reports"].items()},
               "specs": {k: v.to_dict() for k, v in out["specs"].items()}}
    _emit(args, "barriers", payload, cfg)
    if args.report:
        path = Path(args.report)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_json(dict(payload, config_sha256=cfg.hash)))
    return EXIT_OK if out["passed"] else EXIT_FAIL


# -- simulate ------------------------------------------------------------------

def _solver_setup(cfg):
    """Field, grid, data and constants of a [solver] run; shared by simulate and verify."""
    from .barriers import growth_scalars
    from .linearize import constants
    from .solver import GridSpec, SeparableForcing, VelocitySpec, velocity_forcing
    cfg.require("model", "flow", "solver")
    sol = cfg.table("solver")
    params = cfg.flow_params()
    profile = _profile(cfg, params)
    from .linearize import CoefficientField
    field = CoefficientField(profile)
    domain = sol.get("domain", "annulus")
    if domain not in ("annulus", "outer"):
        raise ConfigurationError(f"[solver] unknown domain {domain!r}")
    r0 = params.r0
    r_out = float(sol.get("r_out", 2.0 * r0))
    modes = tuple(sol.get("modes", [0]))
    if domain == "annulus":
        R = _R(cfg, r_out)
        pack = constants(field, R)
    else:
        R = None
        pack = constants(field, field.r_hi, s_range=profile.saturation_range())
    if "T" in sol:
        T = float(sol["T"])
    elif "cycles" in sol and domain == "annulus":
        T = float(sol["cycles"]) * growth_scalars(pack, R)["cycle"]
    else:
        raise ConfigurationError("[solver] needs T (or cycles for an annulus)")
    nodes = int(sol.get("nodes", 200))
    dt = float(sol.get("dt", 1e-3))
    kind = sol.get("grid", "uniform" if domain == "annulus" else "geometric")
    if kind == "uniform":
        grid = GridSpec.uniform(r0, r_out, nodes, dt, T, params.n, modes)
    elif kind == "geometric":
        grid = GridSpec.geometric(r0, r_out, nodes, dt, T, params.n, modes)
    else:
        raise ConfigurationError(f"[solver] unknown grid {kind!r}")

    init = sol.get("initial", {"kind": "sine"})
    amp = float(init.get("amplitude", 1.0))
    support = float(init.get("support", r_out))
    ikind = init.get("kind", "sine")

    def shape(m):
        if ikind == "sine":
            return lambda r: amp * np.sin((m + 1) * np.pi * (r - r0) / (r_out - r0)) / (m + 1)
        if ikind == "bump":
            return lambda r: amp * np.where(r < support, np.sin(np.pi * (r - r0) / (support - r0)) ** 2, 0.0)
        if ikind == "zero":
            return lambda r: np.zeros_like(r)
        raise ConfigurationError(f"[solver.initial] unknown kind {ikind!r}")

    w0 = {m: shape(m) for m in modes}
    bnd = sol.get("boundary", {})
    b_val, b_decay = float(bnd.get("value", 0.0)), float(bnd.get("decay", 0.0))
    b_plateau = float(bnd.get("plateau", b_val))
    def boundary(r, t):
        return b_plateau + (b_val - b_plateau) * math.exp(-b_decay * t)

    G = None
    if b_val != 0.0 or b_plateau != 0.0:
        G = boundary
        lift = b_val
        w0[0] = (lambda base: (lambda r: base(r) + lift))(w0[0])
    frc = sol.get("forcing", {})
    f_val, f_decay = float(frc.get("value", 0.0)), float(frc.get("decay", 0.0))
    f_plateau = float(frc.get("plateau", f_val))
    Vspec = sol.get("V", {"family": "zero"})
    V = VelocitySpec(Vspec.get("family", "zero"), float(Vspec.get("rate", 0.0)),
                     float(Vspec.get("value", 0.0)), float(Vspec.get("amplitude", 1.0)))
    f0 = None
    if V.family != "zero":
        if f_val != 0.0 or f_plateau != 0.0:
            raise ConfigurationError("[solver] combine V with zero [solver.forcing]")
        f0 = velocity_forcing(field, V)
    elif f_val != 0.0 or f_plateau != 0.0:
        f0 = SeparableForcing(lambda r: np.ones_like(np.asarray(r, float)),
                              lambda t: f_plateau + (f_val - f_plateau) * math.exp(-f_decay * t))
    if V.family != "zero" and modes != (0,):
        raise ConfigurationError("velocity forcing is radial; use modes = [0]")
    return {"field": field, "grid": grid, "w0": w0, "G": G, "f0": f0, "V": V if V.family != "zero" else None,
            "pack": pack, "R": R, "domain": domain, "params": params, "solver": sol}


def _decay_payload(rep):
    return {"summary": rep.summary()}


def _outer_payload(run, setup):
    from .barriers import shell_constants
    from .solver import comparison_check, dichotomy_check, max_principle_check, shell_sup_sequence, \
        spatial_decay_report
    sol = setup["solver"]
    T = run.grid.T_final
    out = {"max_principle": max_principle_check(run)}
    sh = shell_constants(setup["pack"], T)
    base = float(sol.get("base_radius", sol.get("initial", {}).get("support", run.grid.r0)))
    try:
        seq = shell_sup_sequence(run, sh["R"], base_radius=base)
        out["dichotomy"] = dichotomy_check(seq, sh["eta0"], sh["log_eta0"])
        out["comparison"] = [comparison_check(run, base + i * sh["R"], sh["R"], sh["eta0"], base_radius=base)
                             for i in range(1, len(seq) - 1)][:3]
    except ForchError as exc:
        out["dichotomy"] = {"skipped": str(exc)}
    rep = spatial_decay_report(run)
    out["spatial"] = {k: v for k, v in rep.items() if k not in ("radii", "M_r")}
    out["shell"] = sh
    return out


def cmd_simulate(args, cfg):
    from .solver import measure_decay, physical_sup, reconstruct, solve_ibvp
    setup = _solver_setup(cfg)
    if args.out is None:
        raise ConfigurationError("simulate needs --out DIR")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    field, grid = setup["field"], setup["grid"]
    run = solve_ibvp(field, grid, setup["w0"], setup["G"], setup["f0"], constants=setup["pack"],
                     R_growth=setup["R"], velocity=setup["V"], label=cfg.experiment)
    rec = reconstruct(field, run, setup["V"])
    every = max(1, int(setup["solver"].get("output_every", max(1, grid.steps // 100))))
    levels = list(range(0, grid.steps + 1, every))
    if levels[-1] != grid.steps:
        levels.append(grid.steps)
    rows = []
    for m in grid.modes:
        for k in levels:
            for j, r in enumerate(grid.r_nodes):
                rows.append((m, grid.times[k], r, run.w[m][k, j], rec.sigma[m][k, j], rec.v1[m][k, j],
                             rec.v2[m][k, j]))
    write_csv(out / "field.csv", ["mode", "t", "r", "w", "sigma", "v1", "v2"], rows, cfg.hash)
    sup = physical_sup(run)
    report = {"experiment": cfg.experiment, "domain": setup["domain"], "audits": run.audits,
              "max_principle_flags": run.max_principle_flags, "compatibility_gap": run.compatibility_gap}
    status = EXIT_OK
    if setup["domain"] == "annulus":
        rep = measure_decay(run)
        report.update(_decay_payload(rep))
        report["envelope_ok"] = rep.envelope_ok.tolist()
        envelope = rep.envelope
        if not rep.all_ok:
            status = EXIT_FAIL
    else:
        report.update(_outer_payload(run, setup))
        envelope = np.full_like(sup, np.nan)
        if not report["max_principle"]["passed"]:
            status = EXIT_FAIL
    write_csv(out / "sup.csv", ["t", "sup_w", "envelope"], zip(grid.times, sup, envelope), cfg.hash)
    meta = {"config_sha256": cfg.hash, "config_path": cfg.path, "experiment": cfg.experiment,
            "grid": grid.to_dict(), "output_levels": len(levels), "output_every": every,
            "params": setup["params"].to_dict(), "constants": setup["pack"].to_dict(),
            "R_growth": setup["R"], "version": __version__}
    (out / "meta.json").write_text(dump_json(meta))
    report["config_sha256"] = cfg.hash
    (out / "report.json").write_text(dump_json(report))
    sys.stdout.write(dump_json({"experiment": cfg.experiment, "out": str(out), "status": status,
                                "config_sha256": cfg.hash}))
    return status


def cmd_verify(args, cfg):
    """Re-check stored sup values against envelopes rebuilt from the config."""
    from .barriers import growth_scalars
    from .solver import ANGLES
    out = _run_dir(args)
    try:
        meta = json.loads((out / "meta.json").read_text())
        report = json.loads((out / "report.json").read_text())
        sup_hash, _, sup_rows = read_csv(out / "sup.csv")
        field_hash, _, field_rows = read_csv(out / "field.csv")
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read artifacts in {out}: {exc}") from None
    hashes = {"meta.json": meta.get("config_sha256"), "report.json": report.get("config_sha256"),
              "sup.csv": sup_hash, "field.csv": field_hash}
    bad = sorted(k for k, v in hashes.items() if v != cfg.hash)
    if bad:
        sys.stdout.write(dump_json({"verified": False, "reason": "config hash mismatch", "artifacts": bad,
                                    "config_sha256": cfg.hash}))
        return EXIT_MISMATCH
    times = np.array([float(r[0]) for r in sup_rows])
    sup = np.array([float(r[1]) for r in sup_rows])
    # stored field levels reproduce the sup column
    modes = sorted({int(r[0]) for r in field_rows})
    by_level = {}
    for r in field_rows:
        by_level.setdefault(float(r[1]), {}).setdefault(int(r[0]), []).append(float(r[3]))
    theta = np.linspace(0.0, 2 * np.pi, ANGLES, endpoint=False)
    worst_gap = 0.0
    for t, per_mode in by_level.items():
        if modes == [0]:
            vals = np.abs(per_mode[0])
        else:
            vals = np.abs(sum(np.cos(m * theta)[:, None] * np.array(per_mode[m])[None, :] for m in modes))
        k = int(np.argmin(np.abs(times - t)))
        worst_gap = max(worst_gap, abs(float(np.max(vals)) - sup[k]))
    consistent = worst_gap <= 1e-12 * max(1.0, float(sup.max()))
    result = {"verified": consistent, "field_sup_gap": worst_gap, "config_sha256": cfg.hash}
    if report.get("domain") == "annulus":
        setup = _solver_setup(cfg)
        sc = growth_scalars(setup["pack"], setup["R"])
        summary = report["summary"]
        eta0, eta1, q = sc["eta0"], sc["eta1"], sc["q"]
        R = setup["R"]
        decay = np.exp(-eta1 * times)
        if summary["homogeneous"]:
            envelope = (1 + eta0) * decay * sup[0]
        else:
            C = 2 * (1 + q * R ** 2) * (1 + eta0) / eta0 + (1 + eta0)
            delta0 = _stored_delta0(setup, times)
            envelope = C * (decay * sup[0] + delta0)
        ok = bool(np.all(sup <= envelope + 1e-12 * max(sup[0], 1e-300)))
        result.update({"envelope_ok": ok, "min_margin": float(np.min(envelope - sup))})
        result["verified"] = bool(result["verified"] and ok)
    else:
        mp = report.get("max_principle", {})
        result.update({"max_principle_passed": mp.get("passed")})
        result["verified"] = bool(result["verified"] and mp.get("passed"))
    sys.stdout.write(dump_json(result))
    return EXIT_OK if result["verified"] else EXIT_FAIL


def _stored_delta0(setup, times):
    """sup|f0| + sup|G| over the run, from the configured data families."""
    grid = setup["grid"]
    inner = grid.r_nodes[1:-1]
    f_sup = 0.0
    if setup["f0"] is not None:
        spatial = np.abs(np.asarray(setup["f0"].spatial(inner))).max()
        f_sup = float(spatial * max(abs(setup["f0"].temporal(t)) for t in times))
    g_sup = 0.0
    if setup["G"] is not None:
        g_sup = max(abs(setup["G"](grid.r0, t)) for t in times[1:])
    return f_sup + g_sup


def _run_dir(args):
    run = getattr(args, "run", None) or args.out
    if run is None:
        raise ConfigurationError("verify needs --run DIR holding simulate artifacts")
    return Path(run)


def _config_from_run(args):
    """Config path recorded in meta.json, for ``verify --run DIR`` without --config."""
    meta = _run_dir(args) / "meta.json"
    try:
        return json.loads(meta.read_text())["config_path"]
    except (OSError, ValueError, KeyError):
        raise ConfigurationError(f"cannot find the config path in {meta}") from None


COMMANDS = {
    "validate-model": cmd_validate_model,
    "steady": cmd_steady,
    "classify": cmd_classify,
    "sweep": cmd_sweep,
    "coeffs": cmd_coeffs,
    "constants": cmd_constants,
    "barriers": cmd_barriers,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forch", description="Radial steady states and stability checks "
                                     "for two-phase generalized Forchheimer flow.")
    parser.add_argument("--version", action="version", version=f"forch {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="TOML experiment configuration")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--out", default=None, help="output directory for artifacts")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "steady":
            p.add_argument("--csv", default=None, help="write sampled (r, S, dS/dr, h) to this file")
            p.add_argument("--r-end", type=float, default=None, help="override [steady] r_end")
        if name == "coeffs":
            p.add_argument("--radii", type=_float_list, default=None, help="comma separated radii")
            p.add_argument("--csv", default=None, help="write the coefficient table to this file")
        if name == "barriers":
            p.add_argument("--family", choices=sorted(FAMILY_NAMES), default=None,
                           help="check one family (default: all three)")
            p.add_argument("--ell", type=float, default=None, help="shell centre radius")
            p.add_argument("--samples", type=int, default=None, help="Halton samples per family")
            p.add_argument("--report", default=None, help="also write the JSON report here")
        if name == "verify":
            p.add_argument("--run", default=None, help="run directory written by simulate")
        if name == "constants":
            p.add_argument("--R", type=float, default=None, help="outer radius of the annulus")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = args.config
        if config is None and args.command == "verify":
            config = _config_from_run(args)
        if config is None:
            parser.error("--config is required")
        cfg = load_config(config)
        return COMMANDS[args.command](args, cfg)
    except ConfigParseError as exc:
        sys.stderr.write(f"forch: parse error: {exc}\n")
        return EXIT_CONFIG
    except ConfigurationError as exc:
        sys.stderr.write(f"forch: {exc}\n")
        return EXIT_CONFIG
    except ForchError as exc:
        sys.stderr.write(f"forch: {type(exc).__name__}: {exc}\n")
        return EXIT_FAIL
    except OSError as exc:
        sys.stderr.write(f"forch: cannot write output: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
