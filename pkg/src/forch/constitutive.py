"""Forchheimer polynomials, relative permeabilities and capillary pressure.

The saturation equation is driven by the two functions

    F_i(S) = 1 / (p_c'(S) f_i(S)),   i = 1, 2,

which extend continuously by zero to both endpoints of [0, 1] when the
products p_c' f_i diverge there.  The momentum law of each phase is a
generalized polynomial g(s) = sum_j a_j s**alpha_j with a_0 > 0 and
alpha_0 = 0, and G(u) = g(|u|) u.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NumericError, ShapeError

__all__ = [
    "GeneralizedPolynomial",
    "ConstitutiveModel",
    "PowerLawModel",
    "CallableModel",
    "TabulatedModel",
    "FlowParams",
    "ValidationCheck",
    "ValidationReport",
    "M0",
    "eval_g",
    "eval_g_prime",
    "eval_G",
    "eval_G_gradient",
    "eval_F",
    "eval_F_prime",
    "f_ratio",
    "invert_f_ratio",
    "validate_model",
]

# relative tolerance of invert_f_ratio and its iteration budget
INVERT_RTOL = 1e-12
INVERT_MAXITER = 200


# ---------------------------------------------------------------------------
# Forchheimer polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneralizedPolynomial:
    """Generalized polynomial g(s) = sum_j a_j s**alpha_j on s >= 0.

    Parameters
    ----------
    coefficients : sequence of float
        Nonnegative coefficients, the first one strictly positive.
    exponents : sequence of float
        Strictly increasing nonnegative exponents starting at 0.
    """

    coefficients: tuple
    exponents: tuple

    def __post_init__(self):
        coeffs = tuple(float(a) for a in self.coefficients)
        exps = tuple(float(a) for a in self.exponents)
        if len(coeffs) == 0 or len(coeffs) != len(exps):
            raise ShapeError("coefficients and exponents must be nonempty and of equal length")
        if exps[0] != 0.0:
            raise ShapeError("the first exponent must be 0")
        if any(b <= a for a, b in zip(exps, exps[1:])):
            raise ShapeError("exponents must be strictly increasing")
        if not all(math.isfinite(a) for a in coeffs + exps):
            raise ShapeError("coefficients and exponents must be finite")
        if coeffs[0] <= 0.0:
            raise ShapeError("the constant coefficient a_0 must be positive")
        if any(a < 0.0 for a in coeffs):
            raise ShapeError("coefficients must be nonnegative")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "exponents", exps)

    @classmethod
    def constant(cls, a0: float = 1.0) -> "GeneralizedPolynomial":
        """Darcy law g = a0."""
        return cls((a0,), (0.0,))

    @classmethod
    def two_term(cls, a: float, b: float, alpha: float) -> "GeneralizedPolynomial":
        """Two-term law g(s) = a + b s**alpha."""
        return cls((a, b), (0.0, alpha))

    @property
    def a0(self) -> float:
        """Value at the origin, g(0)."""
        return self.coefficients[0]

    def two_term_parts(self):
        """Return ``(a, b, alpha)`` for a law of the form a + b s**alpha.

        Raises
        ------
        ShapeError
            If the law does not have exactly two terms with b > 0.
        """
        if len(self.coefficients) != 2 or self.coefficients[1] <= 0.0:
            raise ShapeError("law is not of the two-term form a + b*s**alpha with b > 0")
        return self.coefficients[0], self.coefficients[1], self.exponents[1]

    # scalar fast paths, used inside the ODE right-hand side
    def value_scalar(self, s: float) -> float:
        total = 0.0
        for a, alpha in zip(self.coefficients, self.exponents):
            total += a if alpha == 0.0 else a * s ** alpha
        return total

    def slope_times_arg_scalar(self, s: float) -> float:
        """g'(s)*s, finite at s = 0 even when some exponent is below one."""
        total = 0.0
        for a, alpha in zip(self.coefficients[1:], self.exponents[1:]):
            total += a * alpha * s ** alpha
        return total

    def _powers(self, s):
        s = np.asarray(s, dtype=float)
        return s, [np.power(s, alpha) if alpha != 0.0 else np.ones_like(s) for alpha in self.exponents]

    def __call__(self, s):
        return eval_g(self, s)

    def derivative(self, s):
        return eval_g_prime(self, s)

    def slope_times_arg(self, s):
        """Vectorized g'(s)*s = sum_j a_j alpha_j s**alpha_j."""
        s = _check_nonneg(s)
        out = np.zeros_like(s)
        for a, alpha in zip(self.coefficients[1:], self.exponents[1:]):
            out = out + a * alpha * np.power(s, alpha)
        return out

    def curvature_times_arg_sq(self, s):
        """Vectorized g''(s)*s**2 = sum_j a_j alpha_j (alpha_j - 1) s**alpha_j."""
        s = _check_nonneg(s)
        out = np.zeros_like(s)
        for a, alpha in zip(self.coefficients[1:], self.exponents[1:]):
            out = out + a * alpha * (alpha - 1.0) * np.power(s, alpha)
        return out

    def to_dict(self) -> dict:
        return {"coefficients": list(self.coefficients), "exponents": list(self.exponents)}


def _check_nonneg(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise DomainError("Forchheimer polynomial evaluated at a negative argument")
    return s


def _maybe_scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def eval_g(poly: GeneralizedPolynomial, s):
    """Evaluate g(s) = sum_j a_j s**alpha_j for s >= 0 (scalar or array)."""
    s = _check_nonneg(s)
    out = np.zeros_like(s)
    for a, alpha in zip(poly.coefficients, poly.exponents):
        out = out + (a if alpha == 0.0 else a * np.power(s, alpha))
    return _maybe_scalar(out)


def eval_g_prime(poly: GeneralizedPolynomial, s):
    """Evaluate g'(s) = sum_j a_j alpha_j s**(alpha_j - 1); the constant term contributes 0.

    For exponents below one the derivative is infinite at s = 0; that value
    is returned as ``inf``.  Use :meth:`GeneralizedPolynomial.slope_times_arg`
    for the always-finite product g'(s) s.
    """
    s = _check_nonneg(s)
    out = np.zeros_like(s)
    with np.errstate(divide="ignore"):
        for a, alpha in zip(poly.coefficients[1:], poly.exponents[1:]):
            out = out + a * alpha * np.power(s, alpha - 1.0)
    return _maybe_scalar(out)


def eval_G(poly: GeneralizedPolynomial, u):
    """Scalar momentum map G(u) = g(|u|) u (odd in u)."""
    u = np.asarray(u, dtype=float)
    return _maybe_scalar(np.asarray(eval_g(poly, np.abs(u))) * u)


def eval_G_gradient(poly: GeneralizedPolynomial, u_vec) -> np.ndarray:
    """Jacobian of the vector map u -> g(|u|) u.

    Returns g(|u|) I + g'(|u|) u u^T / |u|; the rank-one part is zero at
    u = 0 because g'(s) s vanishes there.
    """
    u_vec = np.asarray(u_vec, dtype=float).reshape(-1)
    size = float(np.linalg.norm(u_vec))
    jac = poly.value_scalar(size) * np.eye(u_vec.size)
    if size > 0.0:
        # g'(|u|) u u^T / |u| = (g'(s) s) * e e^T with e = u/|u|
        direction = u_vec / size
        jac += poly.slope_times_arg_scalar(size) * np.outer(direction, direction)
    return jac


# ---------------------------------------------------------------------------
# Constitutive models
# ---------------------------------------------------------------------------

def _fd_step(S):
    """Central-difference step adapted to the distance from the endpoints."""
    S = np.asarray(S, dtype=float)
    room = np.minimum(S, 1.0 - S)
    return np.maximum(np.minimum(1e-5, 0.25 * room), 1e-14)


def central_difference(func, S):
    """Second-order central difference of ``func`` at interior points S."""
    S = np.asarray(S, dtype=float)
    h = _fd_step(S)
    return (func(S + h) - func(S - h)) / (2.0 * h)


class ConstitutiveModel:
    """Relative permeabilities f1, f2 and capillary derivative p_c'.

    Subclasses supply vectorized ``f1``, ``f2``, ``pc_prime`` and their
    derivatives.  The derived ``F`` functions are zero at both endpoints
    (analytic extension) and ``1/(p_c' f_i)`` inside.
    """

    name = "custom"

    def f1(self, S):
        raise NotImplementedError

    def f2(self, S):
        raise NotImplementedError

    def pc_prime(self, S):
        raise NotImplementedError

    def f1_prime(self, S):
        return central_difference(self.f1, S)

    def f2_prime(self, S):
        return central_difference(self.f2, S)

    def F(self, phase: int, S):
        """Vectorized F_phase on [0, 1] without domain checks."""
        S = np.asarray(S, dtype=float)
        inner = (S > 0.0) & (S < 1.0)
        Si = np.where(inner, S, 0.5)
        perm = self.f1(Si) if phase == 1 else self.f2(Si)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            vals = 1.0 / (self.pc_prime(Si) * perm)
        vals = np.where(np.isfinite(vals), vals, 0.0)
        return np.where(inner, vals, 0.0)

    def F_prime(self, phase: int, S):
        """Vectorized derivative of F_phase inside (0, 1)."""
        return central_difference(lambda z: self.F(phase, z), S)

    def scalar_F_pair(self):
        """Fast scalar callables ``(F1, F2)`` used inside ODE right-hand sides."""
        return (lambda S: float(self.F(1, S)), lambda S: float(self.F(2, S)))

    def scalar_Fprime_pair(self):
        return (lambda S: float(self.F_prime(1, S)), lambda S: float(self.F_prime(2, S)))

    def log_ratio_slope(self, S):
        """d/dS ln(f1/f2) = f1'/f1 - f2'/f2."""
        return self.f1_prime(S) / self.f1(S) - self.f2_prime(S) / self.f2(S)

    def to_dict(self) -> dict:
        return {"family": self.name}


@dataclass(frozen=True)
class PowerLawModel(ConstitutiveModel):
    """Built-in family f1 = S**theta1, f2 = (1-S)**theta2, p_c' = P0 S**(-a) (1-S)**(-b).

    Then F1 = S**(a-theta1) (1-S)**b / P0 and F2 = S**a (1-S)**(b-theta2) / P0.
    The defaults (2, 2, 3, 3, 1) give the reference model with
    F1 = S (1-S)**3 and F2 = S**3 (1-S).
    """

    theta1: float = 2.0
    theta2: float = 2.0
    a: float = 3.0
    b: float = 3.0
    P0: float = 1.0
    name: str = field(default="power", compare=False)

    def __post_init__(self):
        for key in ("theta1", "theta2", "a", "b", "P0"):
            val = float(getattr(self, key))
            if not math.isfinite(val):
                raise ShapeError(f"power-law parameter {key} must be finite")
            object.__setattr__(self, key, val)
        if self.P0 <= 0.0:
            raise ShapeError("P0 must be positive")

    # exponents of the derived functions
    @property
    def exponents_F1(self):
        return self.a - self.theta1, self.b

    @property
    def exponents_F2(self):
        return self.a, self.b - self.theta2

    def f1(self, S):
        return np.power(np.asarray(S, dtype=float), self.theta1)

    def f2(self, S):
        return np.power(1.0 - np.asarray(S, dtype=float), self.theta2)

    def f1_prime(self, S):
        S = np.asarray(S, dtype=float)
        return self.theta1 * np.power(S, self.theta1 - 1.0)

    def f2_prime(self, S):
        S = np.asarray(S, dtype=float)
        return -self.theta2 * np.power(1.0 - S, self.theta2 - 1.0)

    def pc_prime(self, S):
        S = np.asarray(S, dtype=float)
        with np.errstate(divide="ignore"):
            return self.P0 * np.power(S, -self.a) * np.power(1.0 - S, -self.b)

    def F(self, phase, S):
        S = np.asarray(S, dtype=float)
        p, q = self.exponents_F1 if phase == 1 else self.exponents_F2
        inner = (S > 0.0) & (S < 1.0)
        Si = np.where(inner, S, 0.5)
        vals = np.power(Si, p) * np.power(1.0 - Si, q) / self.P0
        return np.where(inner, vals, 0.0)

    def F_prime(self, phase, S):
        S = np.asarray(S, dtype=float)
        p, q = self.exponents_F1 if phase == 1 else self.exponents_F2
        with np.errstate(divide="ignore", invalid="ignore"):
            left = p * np.power(S, p - 1.0) * np.power(1.0 - S, q) if p != 0.0 else 0.0
            right = q * np.power(S, p) * np.power(1.0 - S, q - 1.0) if q != 0.0 else 0.0
        return (left - right) / self.P0

    def scalar_F_pair(self):
        p1, q1 = self.exponents_F1
        p2, q2 = self.exponents_F2
        inv = 1.0 / self.P0

        def F1(S):
            if S <= 0.0 or S >= 1.0:
                return 0.0
            return S ** p1 * (1.0 - S) ** q1 * inv

        def F2(S):
            if S <= 0.0 or S >= 1.0:
                return 0.0
            return S ** p2 * (1.0 - S) ** q2 * inv

        return F1, F2

    def scalar_Fprime_pair(self):
        return (lambda S: float(self.F_prime(1, S)), lambda S: float(self.F_prime(2, S)))

    def log_ratio_slope(self, S):
        S = np.asarray(S, dtype=float)
        return self.theta1 / S + self.theta2 / (1.0 - S)

    def to_dict(self) -> dict:
        return {"family": "power", "theta1": self.theta1, "theta2": self.theta2,
                "a": self.a, "b": self.b, "P0": self.P0}


M0 = PowerLawModel()


class CallableModel(ConstitutiveModel):
    """Model assembled from user callables; derivatives by central differences.

    Parameters
    ----------
    f1, f2, pc_prime : callable
        Vectorized functions of saturation.
    name : str
        Label used in reports.
    """

    def __init__(self, f1: Callable, f2: Callable, pc_prime: Callable, name: str = "callable"):
        self._f1, self._f2, self._pc = f1, f2, pc_prime
        self.name = name

    def f1(self, S):
        return np.asarray(self._f1(np.asarray(S, dtype=float)), dtype=float)

    def f2(self, S):
        return np.asarray(self._f2(np.asarray(S, dtype=float)), dtype=float)

    def pc_prime(self, S):
        return np.asarray(self._pc(np.asarray(S, dtype=float)), dtype=float)


class TabulatedModel(CallableModel):
    """Model interpolated from a table of (S, f1, f2, p_c') rows.

    Shape-preserving cubic (PCHIP) interpolation keeps monotone columns
    monotone; p_c' is interpolated in log space so it stays positive.
    """

    def __init__(self, S: Sequence[float], f1: Sequence[float], f2: Sequence[float],
                 pc_prime: Sequence[float], source: str = ""):
        S = np.asarray(S, dtype=float)
        if S.ndim != 1 or S.size < 4 or np.any(np.diff(S) <= 0):
            raise ShapeError("tabulated saturations must be strictly increasing with at least 4 rows")
        if S[0] < 0.0 or S[-1] > 1.0:
            raise ShapeError("tabulated saturations must lie in [0, 1]")
        pc = np.asarray(pc_prime, dtype=float)
        if np.any(pc <= 0) or not np.all(np.isfinite(pc)):
            raise ShapeError("tabulated pc_prime must be positive and finite")
        self.table = {"S": S, "f1": np.asarray(f1, float), "f2": np.asarray(f2, float), "pc_prime": pc}
        f1_i = PchipInterpolator(S, self.table["f1"], extrapolate=True)
        f2_i = PchipInterpolator(S, self.table["f2"], extrapolate=True)
        logpc = PchipInterpolator(S, np.log(pc), extrapolate=True)
        super().__init__(f1_i, f2_i, lambda z: np.exp(logpc(z)), name="tabulated")
        self.source = source

    @classmethod
    def from_csv(cls, path) -> "TabulatedModel":
        """Read a CSV with header columns S, f1, f2, pc_prime."""
        with open(path, newline="") as fh:
            lines = [line for line in fh if line.strip() and not line.lstrip().startswith("#")]
        reader = csv.DictReader(lines)
        missing = {"S", "f1", "f2", "pc_prime"} - {k.strip() for k in (reader.fieldnames or ())}
        if missing:
            raise ShapeError(f"tabulated model {path} lacks columns {sorted(missing)}")
        try:
            rows = [{k.strip(): float(v) for k, v in row.items()} for row in reader]
        except (TypeError, ValueError) as exc:
            raise ShapeError(f"tabulated model {path} has a non-numeric entry: {exc}") from None
        cols = {k: [row[k] for row in rows] for k in ("S", "f1", "f2", "pc_prime")}
        return cls(cols["S"], cols["f1"], cols["f2"], cols["pc_prime"], source=str(path))

    def to_dict(self) -> dict:
        return {"family": "tabulated", "path": self.source, "rows": int(self.table["S"].size)}


# ---------------------------------------------------------------------------
# checked public evaluators
# ---------------------------------------------------------------------------

def _check_phase(phase):
    if phase not in (1, 2):
        raise DomainError("phase must be 1 or 2")


def eval_F(model: ConstitutiveModel, phase: int, S):
    """F_phase(S) on the closed interval [0, 1]; exactly 0 at the endpoints."""
    _check_phase(phase)
    S = np.asarray(S, dtype=float)
    if np.any((S < 0.0) | (S > 1.0)) or np.any(np.isnan(S)):
        raise DomainError("saturation outside [0, 1]")
    return _maybe_scalar(model.F(phase, S))


def eval_F_prime(model: ConstitutiveModel, phase: int, S):
    """dF_phase/dS on the open interval (0, 1)."""
    _check_phase(phase)
    S = np.asarray(S, dtype=float)
    if np.any((S <= 0.0) | (S >= 1.0)) or np.any(np.isnan(S)):
        raise DomainError("saturation outside (0, 1)")
    return _maybe_scalar(model.F_prime(phase, S))


def f_ratio(model: ConstitutiveModel, S):
    """f(S) = f1(S)/f2(S), strictly increasing from (0,1) onto (0, inf)."""
    S = np.asarray(S, dtype=float)
    if np.any((S <= 0.0) | (S >= 1.0)):
        raise DomainError("saturation outside (0, 1)")
    return _maybe_scalar(model.f1(S) / model.f2(S))


def _log_ratio(model, S):
    with np.errstate(divide="ignore"):
        return float(np.log(model.f1(S)) - np.log(model.f2(S)))


def invert_f_ratio(model: ConstitutiveModel, y: float) -> float:
    """Solve f1(S)/f2(S) = y for S in (0, 1).

    Safeguarded Newton iteration on ln f(S) - ln y in the logit coordinate
    x = ln(S/(1-S)), falling back to bisection whenever a step leaves the
    current bracket.  Converges to relative tolerance 1e-12 in S and in 1-S.
    """
    y = float(y)
    if not y > 0.0 or not math.isfinite(y):
        raise DomainError("f-ratio inverse needs a positive finite value")
    target = math.log(y)

    def to_S(x):
        # logistic map, written to stay accurate in both tails
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        ex = math.exp(x)
        return ex / (1.0 + ex)

    lo, hi = -700.0, 700.0
    x = 0.0
    for iteration in range(INVERT_MAXITER):
        S = to_S(x)
        if S <= 0.0 or S >= 1.0:
            resid = -math.inf if S <= 0.0 else math.inf
        else:
            resid = _log_ratio(model, S) - target
        if resid == 0.0:
            return S
        if resid > 0:
            hi = x
        else:
            lo = x
        step = None
        if math.isfinite(resid) and 0.0 < S < 1.0:
            slope = float(model.log_ratio_slope(S)) * S * (1.0 - S)
            if slope > 0 and math.isfinite(slope):
                step = resid / slope
        new_x = x - step if step is not None else None
        if new_x is None or not (lo < new_x < hi):
            new_x = 0.5 * (lo + hi)
        if abs(new_x - x) <= INVERT_RTOL * 0.1 or hi - lo <= INVERT_RTOL * 0.1:
            return to_S(new_x)
        x = new_x
    raise NumericError("invert_f_ratio did not converge", {"y": y, "bracket": (lo, hi), "x": x})


# ---------------------------------------------------------------------------
# flow parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowParams:
    """Parameters of one radial steady state.

    Parameters
    ----------
    n : int
        Spatial dimension, at least 2.
    r0 : float
        Inner radius.
    c1, c2 : float
        Phase flux constants, u_i(r) = c_i r**(1-n); not both zero.
    g1, g2 : GeneralizedPolynomial
        Forchheimer laws of the two phases.
    model : ConstitutiveModel
    s0 : float
        Saturation at r0, in (0, 1).
    """

    n: int
    r0: float
    c1: float
    c2: float
    g1: GeneralizedPolynomial
    g2: GeneralizedPolynomial
    model: ConstitutiveModel = M0
    s0: float = 0.5

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError("dimension n must be an integer >= 2")
        object.__setattr__(self, "n", int(self.n))
        for key in ("r0", "c1", "c2", "s0"):
            object.__setattr__(self, key, float(getattr(self, key)))
        if not self.r0 > 0:
            raise DomainError("inner radius r0 must be positive")
        if self.c1 == 0.0 and self.c2 == 0.0:
            raise DomainError("flux constants c1 and c2 cannot both vanish")
        if not 0.0 < self.s0 < 1.0:
            raise DomainError("initial saturation s0 must lie in (0, 1)")

    def replace(self, **changes) -> "FlowParams":
        from dataclasses import replace
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"n": self.n, "r0": self.r0, "c1": self.c1, "c2": self.c2, "s0": self.s0,
                "g1": self.g1.to_dict(), "g2": self.g2.to_dict(), "model": self.model.to_dict()}


# ---------------------------------------------------------------------------
# admissibility report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> ValidationCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks]}


# sampling thresholds for the limit proxies
GRID_POINTS = 10_000
DIVERGENCE_SAMPLES = (1e-2, 1e-4, 1e-6)
DIVERGENCE_FLOOR = 1e6
APPROACH_EXPONENTS = tuple(range(2, 13))
PLATEAU_FACTOR = 10.0


def _plateau(values, upper: bool):
    """True when the approach sequence stays within a finite plateau.

    ``upper`` checks a limsup < inf proxy, otherwise a liminf > -inf proxy.
    The last four samples may not exceed PLATEAU_FACTOR * (1 + max |first four|).
    """
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        return False
    head = PLATEAU_FACTOR * (1.0 + np.max(np.abs(values[:4])))
    tail = values[-4:]
    return bool(np.max(tail) <= head) if upper else bool(np.min(tail) >= -head)


def validate_model(model: ConstitutiveModel, g1: GeneralizedPolynomial | None = None,
                   g2: GeneralizedPolynomial | None = None) -> ValidationReport:
    """Numerically certify the structural assumptions on a model.

    Failures are returned as report entries, never raised.
    """
    checks = []
    grid = np.linspace(0.0, 1.0, GRID_POINTS + 2)[1:-1]

    def add(name, ok, detail):
        checks.append(ValidationCheck(name, bool(ok), detail))

    def guarded(name, check):
        # a model that cannot be evaluated fails the check instead of raising
        try:
            with np.errstate(all="ignore"):
                check()
        except Exception as exc:
            add(name, False, f"evaluation failed: {type(exc).__name__}: {exc}")

    def endpoints():
        ends = (float(model.f1(0.0)), float(model.f2(1.0)))
        add("assumption_A_endpoints", abs(ends[0]) <= 1e-14 and abs(ends[1]) <= 1e-14,
            f"f1(0)={ends[0]:.3g}, f2(1)={ends[1]:.3g}")

    def monotone():
        d1 = np.asarray(model.f1_prime(grid), dtype=float)
        d2 = np.asarray(model.f2_prime(grid), dtype=float)
        add("assumption_A_monotone", np.all(d1 > 0) and np.all(d2 < 0),
            f"min f1'={np.min(d1):.3g}, max f2'={np.max(d2):.3g} on {GRID_POINTS} interior points")

    def positivity():
        pc = np.asarray(model.pc_prime(grid), dtype=float)
        add("assumption_B", np.all(np.isfinite(pc)) and np.all(pc > 0),
            f"min pc'={np.min(pc):.3g} on {GRID_POINTS} interior points")

    def divergence(label, phase):
        pts = np.array(DIVERGENCE_SAMPLES) if phase == 1 else 1.0 - np.array(DIVERGENCE_SAMPLES)
        perm = model.f1(pts) if phase == 1 else model.f2(pts)
        prod = np.asarray(model.pc_prime(pts) * perm, dtype=float)
        ok = np.all(np.diff(prod) > 0) and prod[-1] > DIVERGENCE_FLOOR
        add(label, ok, "pc'*f{} at distance 1e-2,1e-4,1e-6: {}".format(
            phase, ", ".join(f"{v:.3g}" for v in prod)))

    def approach(label, phase, pts, upper):
        vals = np.asarray(model.F_prime(phase, pts), dtype=float)
        kind = "limsup" if upper else "liminf"
        add(label, _plateau(vals, upper),
            f"{kind} proxy of F{phase}' on 10^-k approach, k=2..12: last={vals[-1]:.3g}")

    guarded("assumption_A_endpoints", endpoints)
    guarded("assumption_A_monotone", monotone)
    guarded("assumption_B", positivity)
    for label, phase in (("pcfcond_S0", 1), ("pcfcond_S1", 2)):
        guarded(label, lambda: divergence(label, phase))
    near0 = 10.0 ** -np.array(APPROACH_EXPONENTS, dtype=float)
    near1 = 1.0 - near0
    for label, phase, pts, upper in (("sto0_F1", 1, near0, True), ("sto1_F1", 1, near1, False),
                                     ("sto1_F2", 2, near1, False), ("sto0_F2", 2, near0, True)):
        guarded(label, lambda: approach(label, phase, pts, upper))

    for label, poly in (("g1_admissible", g1), ("g2_admissible", g2)):
        if poly is None:
            continue
        s = np.linspace(0.0, 10.0, 1001)
        vals = np.asarray(eval_g(poly, s))
        slope = poly.slope_times_arg(s)
        ok = np.all(vals > 0) and np.all(np.diff(vals) >= 0) and np.all(np.diff(slope) >= 0)
        add(label, ok, f"g(0)={poly.a0:.3g}")
    return ValidationReport(tuple(checks))
