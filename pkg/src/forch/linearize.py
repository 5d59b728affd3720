"""Coefficient fields of the linearized equation around a radial steady state.

Around S_*(x) = S(|x|) with u_i* = c_i |x|^(-n) x the linearization involves

    B(x) = beta I + gamma x x^T / |x|^2,      A = B^{-1},
    b(x) = lambda(|x|) x = grad Lambda,
    phi_coeff = beta + gamma  (eigenvalue of B along x),

all built from F_i(S(r)), F_i'(S(r)) and the Forchheimer laws evaluated at
|c_i| r^(1-n).  This module evaluates them, the gauge Lambda, and the
constants (mu, d, C, kappa families) that enter the barrier functions.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .constitutive import FlowParams, GeneralizedPolynomial, eval_F_prime, eval_g
from .errors import DomainError
from .quadrature import CumulativeQuadrature
from .steady import SteadyProfile, s_star

__all__ = [
    "CoefficientField",
    "ConstantsPack",
    "coeffs_at",
    "matrix_B",
    "matrix_A",
    "vector_b",
    "gauge_Lambda",
    "constants",
    "mu_constants",
    "eval_c_forcing",
    "negativity_condition",
]

MU_GRID_POINTS = 10_000
MU_MARGIN = 0.01
# saturation band that counts as "bounded away from 0 and 1"
SATURATION_FLOOR = 1e-8


class CoefficientField:
    """Evaluators of the linearized coefficients on [r0, r_hi].

    Parameters
    ----------
    profile : SteadyProfile
    r_hi : float, optional
        Upper radius; defaults to the profile coverage.
    quad_tol : float
        Absolute quadrature tolerance per unit length for the cached
        integrals of r*lambda (the gauge) and r*phi_coeff.
    """

    def __init__(self, profile: SteadyProfile, r_hi: float | None = None, quad_tol: float = 1e-10):
        self.profile = profile
        self.params = profile.params
        self.n = self.params.n
        self.r0 = self.params.r0
        self.r_hi = profile.coverage if r_hi is None else float(r_hi)
        if not self.r0 < self.r_hi <= profile.coverage * (1 + 1e-12):
            raise DomainError("coefficient field range exceeds the profile coverage")
        self._gauge = CumulativeQuadrature(lambda r: r * self.lambda_drift(r), self.r0, self.r_hi,
                                           tol=quad_tol, breakpoints=profile.knots)
        self._rphi = CumulativeQuadrature(lambda r: r * self.phi_coeff(r), self.r0, self.r_hi,
                                          tol=quad_tol, breakpoints=profile.knots)

    # -- pointwise ingredients -------------------------------------------
    def _check(self, r):
        r = np.asarray(r, dtype=float)
        slack = 1e-12 * self.r_hi
        if np.any(r < self.r0 - slack) or np.any(r > self.r_hi + slack):
            raise DomainError(f"radius outside coefficient coverage [{self.r0}, {self.r_hi}]")
        return np.clip(r, self.r0, self.r_hi)

    def _laws(self, r):
        """Per-phase (F, F', g, g'u, g''u^2, c) at radius r."""
        p = self.params
        xi = np.power(r, 1 - self.n)
        S = np.asarray(self.profile(r), dtype=float)
        out = []
        for phase, c, g in ((1, p.c1, p.g1), (2, p.c2, p.g2)):
            u = abs(c) * xi
            out.append((p.model.F(phase, S), p.model.F_prime(phase, S), np.asarray(eval_g(g, u)),
                        g.slope_times_arg(u), g.curvature_times_arg_sq(u), c))
        return S, out

    def _scalar(self, arr):
        arr = np.asarray(arr)
        return float(arr) if arr.ndim == 0 else arr

    def saturation(self, r):
        return self._scalar(self.profile(self._check(r)))

    def beta(self, r):
        r = self._check(r)
        _, laws = self._laws(r)
        return self._scalar(sum(F * g for F, _, g, _, _, _ in laws))

    def gamma(self, r):
        r = self._check(r)
        _, laws = self._laws(r)
        return self._scalar(sum(F * d1 for F, _, _, d1, _, _ in laws))

    def phi_coeff(self, r):
        """Radial eigenvalue of B, sum F_i (g_i + g_i'(u) u), computed on its own."""
        r = self._check(r)
        _, laws = self._laws(r)
        return self._scalar(sum(F * (g + d1) for F, _, g, d1, _, _ in laws))

    def lambda_drift(self, r):
        """lambda(r) = F2' g2 c2 r^-n - F1' g1 c1 r^-n."""
        r = self._check(r)
        _, (l1, l2) = self._laws(r)
        rn = np.power(r, -float(self.n))
        return self._scalar((l2[1] * l2[2] * l2[5] - l1[1] * l1[2] * l1[5]) * rn)

    def _saturation_slope(self, r, S):
        p = self.params
        xi = np.power(r, 1 - self.n)
        G1 = np.asarray(eval_g(p.g1, abs(p.c1) * xi)) * p.c1 * xi
        G2 = np.asarray(eval_g(p.g2, abs(p.c2) * xi)) * p.c2 * xi
        return G2 * p.model.F(2, S) - G1 * p.model.F(1, S)

    def _phi_parts(self, r):
        S, laws = self._laws(r)
        dS = self._saturation_slope(r, S)
        phi = 0.0
        dphi = 0.0
        ks = []
        for F, dF, g, d1, d2, _ in laws:
            k = g + d1
            dk = (2.0 * d1 + d2) * (1 - self.n) / r
            phi = phi + F * k
            dphi = dphi + dF * dS * k + F * dk
            ks.append((k, dk))
        return S, dS, laws, phi, dphi, ks

    def phi_coeff_prime(self, r):
        """Radial derivative of phi_coeff (closed form, uses g'')."""
        r = self._check(r)
        return self._scalar(self._phi_parts(r)[4])

    def chi(self, r):
        """chi = F1 (g1 + g1'u1) / phi_coeff, radial factor of A c."""
        r = self._check(r)
        _, _, laws, phi, _, ks = self._phi_parts(r)
        return self._scalar(laws[0][0] * ks[0][0] / phi)

    def chi_prime(self, r):
        r = self._check(r)
        _, dS, laws, phi, dphi, ks = self._phi_parts(r)
        F1, dF1 = laws[0][0], laws[0][1]
        k1, dk1 = ks[0]
        top = F1 * k1
        dtop = dF1 * dS * k1 + F1 * dk1
        return self._scalar(dtop / phi - top * dphi / phi ** 2)

    def F_sum(self, r):
        r = self._check(r)
        S = np.asarray(self.profile(r), dtype=float)
        m = self.params.model
        return self._scalar(m.F(1, S) + m.F(2, S))

    def Fprime_abs_sum(self, r):
        r = self._check(r)
        S = np.asarray(self.profile(r), dtype=float)
        m = self.params.model
        return self._scalar(np.abs(m.F_prime(1, S)) + np.abs(m.F_prime(2, S)))

    # -- integrals -------------------------------------------------------
    def Lambda(self, r):
        """Gauge Lambda(r) = int_{r0}^r rho lambda(rho) d rho."""
        return self._gauge(self._check(r))

    def rphi_integral(self, r):
        """int_{r0}^r rho phi_coeff(rho) d rho."""
        return self._rphi(self._check(r))

    # -- matrices --------------------------------------------------------
    def _point(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n:
            raise DomainError(f"point must have {self.n} components")
        r = float(np.linalg.norm(x))
        if r < self.r0 * (1 - 1e-12):
            raise DomainError("|x| below the inner radius")
        return x, r

    def matrix_B(self, x):
        x, r = self._point(x)
        e = x / r
        return self.beta(r) * np.eye(self.n) + self.gamma(r) * np.outer(e, e)

    def matrix_A(self, x):
        """Closed rank-one inverse (1/beta)(I - (gamma/phi) e e^T)."""
        x, r = self._point(x)
        e = x / r
        beta, gamma, phi = self.beta(r), self.gamma(r), self.phi_coeff(r)
        return (np.eye(self.n) - (gamma / phi) * np.outer(e, e)) / beta

    def vector_b(self, x):
        x, r = self._point(x)
        return self.lambda_drift(r) * x

    def c_forcing(self, x, V):
        """c = F1(S) G1'(u1*) V with u1* = c1 |x|^-n x."""
        x, r = self._point(x)
        V = np.asarray(V, dtype=float).reshape(-1)
        p = self.params
        S = float(self.profile(r))
        F1 = float(p.model.F(1, S))
        u = abs(p.c1) * r ** (1 - self.n)
        e = x / r
        # G1'(u1*) = g1(|u|) I + (g1'(|u|)|u|) e e^T, independent of the sign of c1
        return F1 * (p.g1.value_scalar(u) * V + p.g1.slope_times_arg_scalar(u) * np.dot(e, V) * e)


# module-level spellings of the evaluators

def coeffs_at(field: CoefficientField, r) -> dict:
    """beta, gamma, phi_coeff and lambda_drift at radius r."""
    return {"beta": field.beta(r), "gamma": field.gamma(r), "phi_coeff": field.phi_coeff(r),
            "lambda_drift": field.lambda_drift(r)}


def matrix_B(field: CoefficientField, x):
    return field.matrix_B(x)


def matrix_A(field: CoefficientField, x):
    return field.matrix_A(x)


def vector_b(field: CoefficientField, x):
    return field.vector_b(x)


def gauge_Lambda(field: CoefficientField, r):
    return field.Lambda(r)


def eval_c_forcing(field: CoefficientField, x, V):
    return field.c_forcing(x, V)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantsPack:
    """Named constants of the decay and maximum-principle arguments.

    The three barrier families use different C3 values:
    C3_growth = kappa0 (n + C2), C3_outer = kappa1 (n + C2) and
    C3_shell = kappa2 (n + C2).  C4 and C5 belong to the shell family.
    """

    n: int
    r0: float
    R: float
    s_lower: float
    s_upper: float
    mu1: float
    mu2: float
    mu3: float
    d0: float
    d1: float
    d2: float
    d3: float
    d4: float
    C0: float
    C1: float
    C2: float
    c0: float
    kappa0: float
    kappa1: float
    kappa2: float
    C3_growth: float
    C3_outer: float
    C3_shell: float
    C4: float
    C5: float
    margin: float = MU_MARGIN

    def to_dict(self) -> dict:
        return asdict(self)


def mu_constants(model, s_lower: float, s_upper: float, points: int = MU_GRID_POINTS,
                 margin: float = MU_MARGIN):
    """(mu1, mu2, mu3) from a dense saturation grid, widened by ``margin``.

    mu1 = sum max F_i, mu2 = sum min F_i, mu3 = sum max |F_i'|; maxima are
    scaled by (1 + margin) and minima by (1 - margin).
    """
    grid = np.linspace(s_lower, s_upper, points)
    F1, F2 = model.F(1, grid), model.F(2, grid)
    D1, D2 = np.abs(model.F_prime(1, grid)), np.abs(model.F_prime(2, grid))
    mu1 = (np.max(F1) + np.max(F2)) * (1 + margin)
    mu2 = (np.min(F1) + np.min(F2)) * (1 - margin)
    mu3 = (np.max(D1) + np.max(D2)) * (1 + margin)
    return float(mu1), float(mu2), float(mu3)


def law_constants(g1: GeneralizedPolynomial, g2: GeneralizedPolynomial, c1: float, c2: float,
                  n: int, r0: float):
    """d0..d4 from the laws at the inner radius, where |c_i| r^(1-n) is largest."""
    d0 = min(g1.a0, g2.a0)
    d1 = d2 = d3 = 0.0
    for c, g in ((c1, g1), (c2, g2)):
        u = abs(c) * r0 ** (1 - n)
        gv = g.value_scalar(u)
        d1 += gv
        d2 += gv * u
        d3 += g.slope_times_arg_scalar(u)
    return d0, d1, d2, d3, d1 + d3


def constants(field: CoefficientField, R: float, s_range: tuple | None = None) -> ConstantsPack:
    """Constants pack for the annulus r0 < |x| < R.

    Parameters
    ----------
    s_range : (float, float), optional
        Saturation bounds [s_lower, s_upper]; by default the range of the
        profile over [r0, R].  Outer-domain users pass the range over the
        whole coverage, including the limit s_inf.

    Raises
    ------
    DomainError
        If R is outside (r0, coverage] or the saturation range touches
        the endpoints.
    """
    p = field.params
    if not p.r0 < R <= field.r_hi * (1 + 1e-12):
        raise DomainError("R must lie in (r0, coverage]")
    lo, hi = s_range if s_range is not None else field.profile.saturation_range(p.r0, R)
    if lo <= SATURATION_FLOOR or hi >= 1.0 - SATURATION_FLOOR:
        raise DomainError("steady saturation is not bounded away from 0 and 1 on the domain")
    mu1, mu2, mu3 = mu_constants(p.model, lo, hi)
    d0, d1, d2, d3, d4 = law_constants(p.g1, p.g2, p.c1, p.c2, p.n, p.r0)
    C0, C1, C2 = d4 * mu1, d0 * mu2, d2 * mu3
    kappa0 = kappa2 = C0 / (2 * C1)
    kappa1 = C1 / (2 * C0)
    n = p.n
    C3_growth = kappa0 * (n + C2)
    C3_outer = kappa1 * (n + C2)
    C3_shell = kappa2 * (n + C2)
    C4 = max(1.0, 8 * C3_shell / (kappa2 * math.e * C0))
    C5 = C3_shell * C4
    return ConstantsPack(n, p.r0, float(R), float(lo), float(hi), mu1, mu2, mu3, d0, d1, d2, d3, d4,
                         C0, C1, C2, math.sqrt(n), kappa0, kappa1, kappa2,
                         C3_growth, C3_outer, C3_shell, C4, C5)


def negativity_condition(params: FlowParams) -> float:
    """F2'(s*) a2^0 c2 - F1'(s*) a1^0 c1 at the limit saturation s*.

    For n = 2 with c1, c2 < 0 this quantity is negative, which makes the
    gauge Lambda bounded above on the exterior domain.

    Raises
    ------
    DomainError
        If c1 c2 <= 0 (no limit saturation s*).
    """
    ss = s_star(params)
    d1 = float(eval_F_prime(params.model, 1, ss))
    d2 = float(eval_F_prime(params.model, 2, ss))
    return d2 * params.g2.a0 * params.c2 - d1 * params.g1.a0 * params.c1
