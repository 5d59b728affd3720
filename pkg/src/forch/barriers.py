"""Landis-type barrier functions for the linearized operator and their sign checks.

The operator is  L w = w_t - div(A grad w) - b . A grad w.  For a radial
potential P with grad P = kappa * phi_coeff * x (or kappa * phi_coeff *
(r - ell) e_r for the shell family) one has A grad P = kappa x (resp.
kappa (r - ell) e_r), so every residual L W collapses to a positive
prefactor times an explicit scalar bracket.  The brackets are evaluated
exactly; only the potential itself needs quadrature.

Families
--------
growth_time  W = t^-s exp(-phi/t)             L W <= 0 on (B_R \\ B_r0) x (0, qR^2]
outer_sup    W = (T-t)^-s exp(phi/(T-t))      L W >= 0 on (B_R \\ B_r0) x (0, T)
shell_sub    W = (t+1)^-s exp(-psi/(t+1))     L W <= 0 on {|r - ell| < R} x (0, inf)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.stats import qmc

from .errors import DomainError, GeometryError
from .linearize import CoefficientField, ConstantsPack
from .quadrature import CumulativeQuadrature

__all__ = [
    "BarrierSpec",
    "RadialTestFunction",
    "SignReport",
    "growth_scalars",
    "shell_constants",
    "build_growth_barrier",
    "build_outer_barrier",
    "build_shell_barrier",
    "truncation_radius",
    "residual_bracket",
    "component_margins",
    "barrier_value",
    "apply_L",
    "verify_barrier_sign",
]

FAMILIES = ("growth_time", "outer_sup", "shell_sub")
SIGN_TOL = 1e-9
T_FLOOR = 1e-6
SHELL_T_MAX = 10.0


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def growth_scalars(constants: ConstantsPack, R: float) -> dict:
    """Scalars of the growth-in-time lemma for the annulus of outer radius R.

    Returns s, q, t0 (maximizer of h0(t) = t^-s exp(-kappa0 C0 r0^2/(2t))),
    eta = 1/h0(t0), eta0 = (r0/R)^(2s), eta1 = ln(1+eta0)/(qR^2) and the
    cycle length qR^2.  Logarithms are returned alongside the quantities
    that can over- or underflow.
    """
    r0, k0, C0 = constants.r0, constants.kappa0, constants.C0
    if not R > r0:
        raise DomainError("R must exceed r0")
    s = k0 * (constants.n + constants.C2 * R)
    q = k0 * C0 / (2 * s)
    t0 = k0 * C0 * r0 ** 2 / (2 * s)
    log_eta = s * math.log(math.e * k0 * C0 * r0 ** 2 / (2 * s))
    log_eta0 = 2 * s * math.log(r0 / R)
    eta0 = math.exp(log_eta0)
    # log1p(eta0) stays accurate when eta0 underflows toward 0
    eta1 = math.log1p(eta0) / (q * R ** 2)
    return {"s": s, "q": q, "t0": t0, "eta": _safe_exp(log_eta), "log_eta": log_eta,
            "eta0": eta0, "log_eta0": log_eta0, "eta1": eta1, "cycle": q * R ** 2}


def shell_constants(constants: ConstantsPack, T: float) -> dict:
    """Shell width R(T) = C4 (1+T) and contraction factor eta0(T).

    eta0(T) = (1 - 2^(-C5 (T+1))) (T+1)^(-2 C5 (T+1)) is formed in log
    space; it is astronomically small for moderate C5 but always in (0, 1).
    """
    if not T > 0:
        raise DomainError("T must be positive")
    C5 = constants.C5
    log_eta0 = math.log1p(-(2.0 ** (-C5 * (T + 1)))) - 2 * C5 * (T + 1) * math.log1p(T)
    return {"R": constants.C4 * (1 + T), "eta0": math.exp(log_eta0), "log_eta0": log_eta0,
            "C4": constants.C4, "C5": C5}


@dataclass(frozen=True)
class BarrierSpec:
    """One barrier function with its constants.

    ``potential`` is phi for the growth and outer families and psi for the
    shell family.  ``scalars`` holds the derived quantities of the family
    (q, eta, eta0, eta1 for growth_time; R(T), eta0(T) for shell_sub when
    built through ``shell_constants``).
    """

    family: str
    s_exponent: float
    kappa: float
    R: float
    constants: ConstantsPack
    field: CoefficientField = dc_field(repr=False, compare=False)
    ell: float | None = None
    T: float | None = None
    scalars: dict = dc_field(default_factory=dict)
    _shell_quad: CumulativeQuadrature | None = dc_field(default=None, repr=False, compare=False)

    @property
    def r_inner(self) -> float:
        return self.ell - self.R if self.family == "shell_sub" else self.constants.r0

    @property
    def r_outer(self) -> float:
        return self.ell + self.R if self.family == "shell_sub" else self.R

    def potential(self, r):
        """Barrier potential at radius r (vectorized)."""
        c = self.constants
        if self.family == "growth_time":
            return self.kappa * (c.C0 * c.r0 ** 2 / 2 + self.field.rphi_integral(r))
        if self.family == "outer_sup":
            return self.kappa * (c.C1 * c.r0 ** 2 / 2 + self.field.rphi_integral(r))
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r_inner * (1 - 1e-12)) or np.any(r > self.r_outer * (1 + 1e-12)):
            raise DomainError("shell potential evaluated outside the shell annulus")
        out = self.kappa * (self._shell_quad(r) - self._shell_quad(self.ell))
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        return {"family": self.family, "s_exponent": self.s_exponent, "kappa": self.kappa,
                "R": self.R, "ell": self.ell, "T": self.T, "scalars": dict(self.scalars)}


def build_growth_barrier(constants: ConstantsPack, R: float, field: CoefficientField) -> BarrierSpec:
    """W = t^-s exp(-phi/t) with phi = kappa0 (C0 r0^2/2 + int_{r0}^r rho phi_coeff)."""
    sc = growth_scalars(constants, R)
    _check_field(field, R)
    return BarrierSpec("growth_time", sc["s"], constants.kappa0, float(R), constants, field,
                       scalars=sc)


def build_outer_barrier(constants: ConstantsPack, R: float, T: float,
                        field: CoefficientField) -> BarrierSpec:
    """W = (T-t)^-s exp(phi/(T-t)), s = C3_outer (1+R), phi from kappa1 and C1."""
    if not T > 0:
        raise DomainError("T must be positive")
    if not R > constants.r0:
        raise DomainError("R must exceed r0")
    _check_field(field, R)
    s = constants.C3_outer * (1 + R)
    return BarrierSpec("outer_sup", s, constants.kappa1, float(R), constants, field, T=float(T),
                       scalars={"s": s, "C3": constants.C3_outer})


def build_shell_barrier(constants: ConstantsPack, R: float, ell: float,
                        field: CoefficientField) -> BarrierSpec:
    """W = (t+1)^-s exp(-psi/(t+1)) on the shell |r - ell| < R.

    psi(r) = kappa2 int_ell^r (rho - ell) phi_coeff(rho) d rho.

    Raises
    ------
    GeometryError
        If ell < R + r0, so that the shell would cross the inner sphere.
    """
    if ell < R + constants.r0 - 1e-12 * max(1.0, ell):
        raise GeometryError(f"shell center ell={ell} is below R + r0 = {R + constants.r0}")
    _check_field(field, ell + R)
    s = constants.C3_shell * (1 + R)
    quad = CumulativeQuadrature(lambda rho: (rho - ell) * field.phi_coeff(rho), ell - R, ell + R,
                                tol=1e-12, panels_per_decade=64)
    return BarrierSpec("shell_sub", s, constants.kappa2, float(R), constants, field,
                       ell=float(ell), scalars={"s": s, "C3": constants.C3_shell}, _shell_quad=quad)


def _check_field(field, r_max):
    if r_max > field.r_hi * (1 + 1e-12):
        raise DomainError(f"barrier domain reaches r={r_max} beyond coefficient coverage {field.r_hi}")


def truncation_radius(constants: ConstantsPack, T: float, ratio: float) -> float:
    """Smallest R >= r0 past which T^(-C3 (1+R)) exp(kappa1 C1 R^2/(2T)) > ratio.

    ``ratio`` plays the role of M/mu.  The log of the left side is a convex
    quadratic in R, so after its last zero crossing it stays positive;
    the crossing is bracketed by doubling and located by bisection.
    """
    if not (T > 0 and ratio > 0):
        raise DomainError("T and ratio must be positive")
    C3, a = constants.C3_outer, constants.kappa1 * constants.C1 / (2 * T)
    log_ratio = math.log(ratio)

    def excess(R):
        return -C3 * (1 + R) * math.log(T) + a * R * R - log_ratio

    lo = constants.r0
    vertex = C3 * math.log(T) / (2 * a)
    if excess(lo) > 0 and vertex <= lo:
        return lo
    lo = max(lo, vertex)
    hi = max(2 * lo, 1.0)
    while excess(hi) <= 0:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


# ---------------------------------------------------------------------------
# residual brackets
# ---------------------------------------------------------------------------

def _time_weight(spec: BarrierSpec, t):
    if spec.family == "growth_time":
        return t
    if spec.family == "outer_sup":
        return spec.T - t
    return t + 1.0


def _bracket_terms(spec: BarrierSpec, r, t):
    """(time part, potential part) of the bracket with their scales."""
    f, k, n, s = spec.field, spec.kappa, spec.constants.n, spec.s_exponent
    r = np.asarray(r, dtype=float)
    tau = _time_weight(spec, np.asarray(t, dtype=float))
    lam, phi_c = f.lambda_drift(r), f.phi_coeff(r)
    pot = spec.potential(r)
    if spec.family == "growth_time":
        inner = k * (n + lam * r ** 2)
        time_part = tau * (-s + inner)
        pot_part = pot - k ** 2 * phi_c * r ** 2
        scale = tau * (s + np.abs(inner)) + np.abs(pot) + k ** 2 * phi_c * r ** 2
    elif spec.family == "outer_sup":
        inner = k * (n + lam * r ** 2)
        time_part = tau * (s - inner)
        pot_part = pot - k ** 2 * phi_c * r ** 2
        scale = tau * (s + np.abs(inner)) + np.abs(pot) + k ** 2 * phi_c * r ** 2
    else:
        ell = spec.ell
        inner = k * (n - (n - 1) * ell / r + lam * r * (r - ell))
        time_part = tau * (-s + inner)
        pot_part = pot - k ** 2 * phi_c * (r - ell) ** 2
        scale = tau * (s + np.abs(inner)) + np.abs(pot) + k ** 2 * phi_c * (r - ell) ** 2
    return time_part, pot_part, scale


def residual_bracket(spec: BarrierSpec, r, t):
    """Scalar bracket B with L W = tau^(-s-2) exp(-+P/tau) * B.

    tau is t, T - t or t + 1 by family.  The sign of L W is the sign of B.
    """
    time_part, pot_part, _ = _bracket_terms(spec, r, t)
    return time_part + pot_part


def barrier_value(spec: BarrierSpec, r, t):
    """W(r, t) for the family (vectorized)."""
    tau = _time_weight(spec, np.asarray(t, dtype=float))
    pot = spec.potential(r)
    s = spec.s_exponent
    if spec.family == "outer_sup":
        return np.exp(-s * np.log(tau) + pot / tau)
    return np.exp(-s * np.log(tau) - pot / tau)


def component_margins(spec: BarrierSpec, r):
    """The two pointwise inequalities behind the sign of the bracket.

    Returns (drift_margin, potential_margin); both must be >= 0.

    growth_time: s - kappa0 (n + lambda r^2),  kappa0^2 phi_coeff r^2 - phi
    outer_sup:   s - kappa1 (n + lambda r^2),  phi - kappa1^2 x^T B x
    shell_sub:   s - kappa2 (n - (n-1) ell/r + lambda r (r-ell)),
                 kappa2^2 phi_coeff (r-ell)^2 - psi
    """
    f, k, n, s = spec.field, spec.kappa, spec.constants.n, spec.s_exponent
    r = np.asarray(r, dtype=float)
    lam, phi_c = f.lambda_drift(r), f.phi_coeff(r)
    pot = spec.potential(r)
    if spec.family == "growth_time":
        return s - k * (n + lam * r ** 2), k ** 2 * phi_c * r ** 2 - pot
    if spec.family == "outer_sup":
        return s - k * (n + lam * r ** 2), pot - k ** 2 * phi_c * r ** 2
    ell = spec.ell
    return (s - k * (n - (n - 1) * ell / r + lam * r * (r - ell)),
            k ** 2 * phi_c * (r - ell) ** 2 - pot)


@dataclass
class SignReport:
    family: str
    samples: int
    expected_sign: int
    max_violation: float
    max_raw_violation: float
    worst_point: tuple
    min_drift_margin: float
    min_potential_margin: float
    passed: bool
    components_passed: bool
    tolerance: float = SIGN_TOL

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _sample_domain(spec: BarrierSpec, count: int, t_max: float | None):
    pts = qmc.Halton(d=2, scramble=False).random(count + 1)[1:]
    r_lo, r_hi = spec.r_inner, spec.r_outer
    r = r_lo + (r_hi - r_lo) * pts[:, 0]
    if spec.family == "growth_time":
        t_lo, t_hi = T_FLOOR, spec.scalars["cycle"] if t_max is None else t_max
    elif spec.family == "outer_sup":
        t_lo, t_hi = T_FLOOR * spec.T, spec.T * (1 - T_FLOOR)
    else:
        t_lo, t_hi = 0.0, SHELL_T_MAX if t_max is None else t_max
    t = t_lo + (t_hi - t_lo) * pts[:, 1]
    return r, t


def verify_barrier_sign(field: CoefficientField, spec: BarrierSpec, sample_count: int = 10_000,
                        t_max: float | None = None) -> SignReport:
    """Evaluate the exact residual bracket at Halton points of the family's domain.

    A sample violates when the bracket has the wrong sign by more than
    ``SIGN_TOL`` times its local scale (sum of absolute term sizes).
    Sub-solution families must have bracket <= 0, the outer family >= 0.
    """
    if spec.field is not field:
        raise DomainError("barrier spec was built from a different coefficient field")
    r, t = _sample_domain(spec, sample_count, t_max)
    time_part, pot_part, scale = _bracket_terms(spec, r, t)
    bracket = time_part + pot_part
    sign = 1 if spec.family == "outer_sup" else -1
    raw = np.maximum(0.0, -sign * bracket)
    rel = raw / np.maximum(scale, 1e-300)
    worst = int(np.argmax(rel))
    drift, pot = component_margins(spec, r)
    drift_rel = drift / np.maximum(np.abs(spec.s_exponent), 1e-300)
    pot_rel = pot / np.maximum(np.abs(spec.potential(r)) + np.abs(pot), 1e-300)
    comps_ok = bool(np.all(drift_rel >= -SIGN_TOL) and np.all(pot_rel >= -SIGN_TOL))
    return SignReport(spec.family, sample_count, sign, float(rel[worst]), float(raw.max()),
                      (float(r[worst]), float(t[worst])), float(drift.min()), float(pot.min()),
                      bool(rel[worst] <= SIGN_TOL), comps_ok)


# ---------------------------------------------------------------------------
# operator application
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialTestFunction:
    """Radial function u(r, t) with analytic derivatives u_t, u_r, u_rr."""

    value: callable
    dt: callable
    dr: callable
    drr: callable


def _apply_radial(field: CoefficientField, u: RadialTestFunction, r: float, t: float) -> float:
    n = field.n
    phi = field.phi_coeff(r)
    dphi = field.phi_coeff_prime(r)
    ur, urr = u.dr(r, t), u.drr(r, t)
    div_flux = urr / phi - dphi * ur / phi ** 2 + (n - 1) * ur / (r * phi)
    drift = field.lambda_drift(r) * r * ur / phi
    return float(u.dt(r, t) - div_flux - drift)


def apply_L(field: CoefficientField, u, x, t: float, h: float = 1e-4) -> float:
    """Residual L u = u_t - div(A grad u) - b . A grad u at (x, t).

    ``u`` is either a RadialTestFunction (evaluated exactly through the
    radial form of L) or a callable u(x, t) on R^n, in which case all
    derivatives are central differences of step h: the flux A grad u is
    formed at x +- h e_k/2 from gradients of step h/2, so the error is
    O(h^2) plus rounding of order eps/h^2.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = field.n
    if x.size != n:
        raise DomainError(f"point must have {n} components")
    r = float(np.linalg.norm(x))
    if isinstance(u, RadialTestFunction):
        field._check(r)
        return _apply_radial(field, u, r, t)
    if r - h < field.r0 or r + h > field.r_hi:
        raise DomainError("finite-difference stencil leaves the coefficient coverage")
    eye = np.eye(n)
    half = 0.5 * h

    def grad(y):
        return np.array([(u(y + half * e, t) - u(y - half * e, t)) / h for e in eye])

    def flux(y):
        return field.matrix_A(y) @ grad(y)

    div = sum((flux(x + half * e)[k] - flux(x - half * e)[k]) / h for k, e in enumerate(eye))
    drift = field.vector_b(x) @ flux(x)
    ut = (u(x, t + h) - u(x, t - h)) / (2 * h)
    return float(ut - div - drift)
