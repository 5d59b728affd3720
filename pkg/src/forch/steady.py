"""Radial steady states of the two-phase saturation equation.

With phase fluxes u_i(r) = c_i r**(1-n) the saturation obeys

    S'(r) = G2(c2 r**(1-n)) F2(S) - G1(c1 r**(1-n)) F1(S),   S(r0) = s0.

This module integrates that ODE, detects blow-up to an endpoint, computes
the equilibrium curve h(r) and its limit s*, labels the asymptotic case and
estimates s_inf = lim S(r).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constitutive import FlowParams, eval_G, invert_f_ratio
from .errors import DomainError, ShapeError, SingularPermeability, TailNotResolved
from .ode import DenseSolution, dopri5
from .quadrature import CumulativeQuadrature

__all__ = [
    "DELTA_EXIT",
    "SteadyProfile",
    "TailRecord",
    "SInftyEstimate",
    "Interval",
    "FiniteSet",
    "CaseLabel",
    "rhs",
    "integrate_profile",
    "equilibrium_h",
    "s_star",
    "delta_discriminant",
    "classify_case",
    "estimate_s_infty",
    "pressure_profiles",
]

DELTA_EXIT = 1e-9
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
# switch to the log-radius variable beyond this radius ratio
LOG_RADIUS_RATIO = 100.0
# relative tolerance under which Delta and saturation orderings count as ties
TIE_RTOL = 1e-12
RHS_SIGN_TOL = 1e-12
MIN_TAIL_KNOTS = 10
MIN_COVERAGE_RATIO = 1e3
MIN_KNOTS = 64


def _scalar_rhs(params: FlowParams):
    """Fast scalar right-hand side; stage values are clamped into [0, 1]."""
    n, c1, c2 = params.n, params.c1, params.c2
    g1, g2 = params.g1.value_scalar, params.g2.value_scalar
    F1, F2 = params.model.scalar_F_pair()
    a1, a2 = abs(c1), abs(c2)

    def fun(r, S):
        if S < 0.0:
            S = 0.0
        elif S > 1.0:
            S = 1.0
        xi = r ** (1 - n)
        return g2(a2 * xi) * c2 * xi * F2(S) - g1(a1 * xi) * c1 * xi * F1(S)

    return fun


def rhs(params: FlowParams, r, S):
    """dS/dr = G2(c2 r^(1-n)) F2(S) - G1(c1 r^(1-n)) F1(S).

    Raises
    ------
    DomainError
        If any S lies outside (0, 1).
    """
    S = np.asarray(S, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any((S <= 0.0) | (S >= 1.0)) or np.any(np.isnan(S)):
        raise DomainError("saturation outside (0, 1)")
    if np.any(r <= 0.0):
        raise DomainError("radius must be positive")
    xi = np.power(r, 1 - params.n)
    model = params.model
    out = eval_G(params.g2, params.c2 * xi) * model.F(2, S) - eval_G(params.g1, params.c1 * xi) * model.F(1, S)
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TailRecord:
    """Start radius and sign of the monotone tail."""

    R_detect: float
    sign: int
    knots: int


@dataclass(frozen=True)
class SInftyEstimate:
    value: float
    uncertainty: float
    sign: int
    R_detect: float

    def to_dict(self):
        return {"value": self.value, "uncertainty": self.uncertainty,
                "sign": self.sign, "R_detect": self.R_detect}


@dataclass(frozen=True)
class SteadyProfile:
    """Dense radial saturation profile.

    ``r_max`` is ``math.inf`` when the solution stayed inside
    (delta_exit, 1 - delta_exit) up to ``r_end``; otherwise it is the radius
    where S reached the band edge on side ``exit_side`` (-1 for 0, +1 for 1).
    """

    params: FlowParams
    knots: np.ndarray
    values: np.ndarray
    r_end: float
    r_max: float
    exit_side: int
    log_radius: bool
    dense: DenseSolution = field(repr=False)
    nfev: int = 0
    tail: TailRecord | None = None
    s_infty: SInftyEstimate | None = None

    @property
    def coverage(self) -> float:
        """Largest radius where the profile may be evaluated."""
        return self.r_max if math.isfinite(self.r_max) else self.r_end

    @property
    def r0(self) -> float:
        return self.params.r0

    def _variable(self, r):
        r = np.asarray(r, dtype=float)
        slack = 1e-12 * self.coverage
        if np.any(r < self.r0 - slack) or np.any(r > self.coverage + slack):
            raise DomainError(f"radius outside the profile coverage [{self.r0}, {self.coverage}]")
        r = np.clip(r, self.r0, self.coverage)
        return r, (np.log(r) if self.log_radius else r)

    def __call__(self, r):
        _, t = self._variable(r)
        out = self.dense(t)
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, r):
        r, t = self._variable(r)
        out = self.dense.derivative(t)
        if self.log_radius:
            out = out / r
        return float(out) if np.ndim(out) == 0 else out

    def rhs_at_knots(self) -> np.ndarray:
        fun = _scalar_rhs(self.params)
        return np.array([fun(r, s) for r, s in zip(self.knots, self.values)])

    def saturation_range(self, r_lo=None, r_hi=None, samples: int = 4001):
        """(min, max) of S over [r_lo, r_hi] using knots and dense samples."""
        r_lo = self.r0 if r_lo is None else r_lo
        r_hi = self.coverage if r_hi is None else r_hi
        grid = np.geomspace(r_lo, r_hi, samples)
        inside = self.knots[(self.knots >= r_lo) & (self.knots <= r_hi)]
        vals = np.concatenate([np.atleast_1d(self(grid)), self.values[np.isin(self.knots, inside)]])
        return float(np.min(vals)), float(np.max(vals))


def integrate_profile(params: FlowParams, r_end: float, rtol: float = DEFAULT_RTOL,
                      atol: float = DEFAULT_ATOL, delta_exit: float = DELTA_EXIT,
                      log_radius: bool | None = None, estimate_tail: bool = True) -> SteadyProfile:
    """Integrate the steady saturation ODE from r0 to ``r_end``.

    Uses an adaptive Dormand-Prince 5(4) scheme with dense output; for
    r_end/r0 > 100 the independent variable is rho = ln r.  Leaving the band
    (delta_exit, 1 - delta_exit) ends the run with a finite ``r_max``.
    When the run reaches r_end >= 1e3 r0 the monotone tail and the s_inf
    estimate are attached if they can be resolved.

    Raises
    ------
    NumericError
        On step-size underflow, carrying the last valid state.
    """
    r0 = params.r0
    if not r_end > r0:
        raise DomainError("r_end must exceed r0")
    if log_radius is None:
        log_radius = r_end / r0 > LOG_RADIUS_RATIO
    base = _scalar_rhs(params)
    if log_radius:
        def fun(t, S):
            r = math.exp(t)
            return r * base(r, S)
        t0, t1 = math.log(r0), math.log(r_end)
    else:
        fun = base
        t0, t1 = r0, float(r_end)
    res = dopri5(fun, t0, params.s0, t1, rtol=rtol, atol=atol, max_step=(t1 - t0) / MIN_KNOTS,
                 lower=delta_exit, upper=1.0 - delta_exit)
    knots = np.exp(res.t) if log_radius else res.t
    knots[0] = r0
    if res.status == "exit":
        r_max = float(knots[-1])
    else:
        r_max = math.inf
        knots[-1] = r_end
    profile = SteadyProfile(params, knots, res.y, float(r_end), r_max, res.exit_side,
                            bool(log_radius), res.dense, res.nfev)
    if estimate_tail and math.isinf(r_max) and r_end >= MIN_COVERAGE_RATIO * r0:
        try:
            est = estimate_s_infty(profile)
        except TailNotResolved:
            return profile
        tail = TailRecord(est.R_detect, est.sign, int(np.sum(knots >= est.R_detect)))
        profile = replace(profile, tail=tail, s_infty=est)
    return profile


# ---------------------------------------------------------------------------
# equilibrium curve and discriminant
# ---------------------------------------------------------------------------

def _require_equilibrium(params):
    if not params.c1 * params.c2 > 0:
        raise DomainError("no equilibrium curve: requires c1*c2 > 0")


def equilibrium_h(params: FlowParams, r):
    """h(r) = f^{-1}(c1 g1(|c1| xi) / (c2 g2(|c2| xi))) with xi = r^(1-n)."""
    _require_equilibrium(params)
    r = np.asarray(r, dtype=float)
    xi = np.power(r, 1 - params.n)
    ratio = (params.c1 * np.asarray(params.g1(abs(params.c1) * xi))) / (
        params.c2 * np.asarray(params.g2(abs(params.c2) * xi)))
    flat = np.array([invert_f_ratio(params.model, y) for y in np.atleast_1d(ratio).ravel()])
    return float(flat[0]) if r.ndim == 0 else flat.reshape(r.shape)


def s_star(params: FlowParams) -> float:
    """s* = f^{-1}(c1 a1^0 / (c2 a2^0)), the limit of h(r) as r -> inf."""
    _require_equilibrium(params)
    return invert_f_ratio(params.model, params.c1 * params.g1.a0 / (params.c2 * params.g2.a0))


def delta_discriminant(g1, g2, c1: float, c2: float) -> float:
    """Delta = a2 b1 |c1|^alpha - a1 b2 |c2|^alpha for two-term laws a + b s^alpha."""
    a1, b1, alpha1 = g1.two_term_parts()
    a2, b2, alpha2 = g2.two_term_parts()
    if alpha1 != alpha2:
        raise ShapeError("two-term laws must share the exponent alpha")
    return a2 * b1 * abs(c1) ** alpha1 - a1 * b2 * abs(c2) ** alpha1


def _delta_sign(g1, g2, c1, c2):
    a1, b1, alpha = g1.two_term_parts()
    a2, b2, _ = g2.two_term_parts()
    left, right = a2 * b1 * abs(c1) ** alpha, a1 * b2 * abs(c2) ** alpha
    delta = left - right
    if abs(delta) <= TIE_RTOL * (left + right):
        return delta, 0
    return delta, (1 if delta > 0 else -1)


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def contains(self, x: float, tol: float = 0.0) -> bool:
        """Membership; with tol > 0 both endpoints are relaxed by tol."""
        if tol > 0:
            return self.lo - tol <= x <= self.hi + tol
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below

    def to_dict(self):
        return {"interval": [self.lo, self.hi], "closed": [self.lo_closed, self.hi_closed]}

    def __str__(self):
        return "{}{:.6g}, {:.6g}{}".format("[" if self.lo_closed else "(", self.lo, self.hi,
                                           "]" if self.hi_closed else ")")


@dataclass(frozen=True)
class FiniteSet:
    values: tuple

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return any(abs(x - v) <= tol for v in self.values)

    def to_dict(self):
        return {"set": list(self.values)}

    def __str__(self):
        return "{" + ", ".join(f"{v:.6g}" for v in self.values) + "}"


@dataclass(frozen=True)
class CaseLabel:
    """Asymptotic case of a steady state and the predicted range of s_inf."""

    global_case: str
    example_case: str | None
    n2_case: str | None
    prediction: Interval | FiniteSet
    delta: float | None = None
    h0: float | None = None
    s_star: float | None = None

    @property
    def case(self) -> str:
        return self.example_case or f"global-{self.global_case}"

    def to_dict(self):
        return {"case": self.case, "global_case": self.global_case, "example_case": self.example_case,
                "n2_case": self.n2_case, "prediction": self.prediction.to_dict(), "delta": self.delta,
                "h_r0": self.h0, "s_star": self.s_star}


def _global_case(c1, c2):
    if c1 > 0 and c2 <= 0:
        return "1a"
    if c1 == 0 and c2 < 0:
        return "1b"
    if c1 <= 0 and c2 > 0:
        return "2a"
    if c1 < 0 and c2 == 0:
        return "2b"
    if c1 > 0 and c2 > 0:
        return "3"
    return "4"


def _order(s0, value):
    """-1, 0, +1 for s0 below, tied with, above ``value``."""
    if abs(s0 - value) <= TIE_RTOL * max(1.0, abs(value)):
        return 0
    return 1 if s0 > value else -1


def _example_prediction(family, dsign, s0, h0, ss):
    """Sub-case label and range for families A (c > 0) and B (c < 0)."""
    if dsign == 0:
        o = _order(s0, ss)
        roman = {1: "i", 0: "ii", -1: "iii"}[o]
        if family == "A":
            table = {1: Interval(s0, 1.0, False, True), 0: FiniteSet((ss,)), -1: Interval(0.0, s0, True, False)}
        else:
            table = {1: Interval(ss, s0, True, False), 0: FiniteSet((ss,)), -1: Interval(s0, ss, False, True)}
        return f"{family}3({roman})", table[o]
    if dsign < 0:  # h increasing, h(r0) < s*
        if _order(s0, ss) > 0:
            roman = "i"
        elif _order(s0, h0) < 0:
            roman = "iii"
        else:
            roman = "ii"
        if family == "A":
            table = {"i": Interval(s0, 1.0, False, True), "ii": Interval(0.0, 1.0, True, True),
                     "iii": Interval(0.0, s0, True, False)}
        else:
            table = {"i": Interval(h0, s0, False, False), "ii": Interval(h0, ss, False, True),
                     "iii": Interval(s0, ss, False, True)}
        return f"{family}1({roman})", table[roman]
    # dsign > 0: h decreasing, s* < h(r0)
    if _order(s0, h0) > 0:
        roman = "i"
    elif _order(s0, ss) < 0:
        roman = "iii"
    else:
        roman = "ii"
    if family == "A":
        table = {"i": Interval(s0, 1.0, False, True), "ii": Interval(0.0, 1.0, True, True),
                 "iii": Interval(0.0, s0, True, False)}
    else:
        table = {"i": Interval(ss, s0, True, False), "ii": Interval(ss, h0, True, False),
                 "iii": Interval(s0, h0, False, False)}
    return f"{family}2({roman})", table[roman]


def classify_case(params: FlowParams) -> CaseLabel:
    """Label the asymptotic case of ``params`` and predict the range of s_inf.

    The global-existence case follows from the signs of c1, c2.  For
    two-term laws a + b s^alpha with a shared alpha the finer sub-case
    (A1-A3, B1-B3 with roman index, C, D) is added.  In dimension two the
    range is reduced to the finite set {0, 1, s*} and intersected with the
    sub-case range.  Ties within a relative 1e-12 fall into the inclusive
    middle branches.
    """
    c1, c2, s0 = params.c1, params.c2, params.s0
    gcase = _global_case(c1, c2)
    try:
        delta, dsign = _delta_sign(params.g1, params.g2, c1, c2)
        two_term = params.g1.exponents[1] == params.g2.exponents[1]
    except ShapeError:
        delta, dsign, two_term = None, None, False
    if not two_term:
        delta = dsign = None

    h0 = ss = None
    if c1 * c2 > 0:
        ss = s_star(params)
        h0 = float(equilibrium_h(params, params.r0))

    example = None
    if gcase in ("1a", "1b"):
        pred = Interval(0.0, s0, True, False)
        example = "D" if two_term else None
    elif gcase in ("2a", "2b"):
        pred = Interval(s0, 1.0, False, True)
        example = "C" if two_term else None
    elif two_term:
        example, pred = _example_prediction("A" if gcase == "3" else "B", dsign, s0, h0, ss)
    else:
        pred = Interval(0.0, 1.0, True, True)

    n2_case = None
    if params.n == 2:
        if c1 <= 0 <= c2:
            n2_case, finite = "n2-one", FiniteSet((1.0,))
        elif c2 <= 0 <= c1:
            n2_case, finite = "n2-zero", FiniteSet((0.0,))
        elif c1 < 0 and c2 < 0:
            n2_case, finite = "n2-sstar", FiniteSet((ss,))
        else:
            s_m, s_M = min(h0, ss), max(h0, ss)
            if two_term and _order(s0, s_M) > 0:
                n2_case, finite = "n2(i)", FiniteSet((1.0,))
            elif two_term and _order(s0, s_m) < 0:
                n2_case, finite = "n2(iii)", FiniteSet((0.0,))
            else:
                n2_case = "n2(ii)" if two_term else "n2-trichotomy"
                finite = FiniteSet(tuple(sorted({0.0, 1.0, ss})))
        kept = tuple(v for v in finite.values if pred.contains(v))
        pred = FiniteSet(kept) if kept else finite
    return CaseLabel(gcase, example, n2_case, pred, delta, h0, ss)


# ---------------------------------------------------------------------------
# limit estimation
# ---------------------------------------------------------------------------

def _tail_start(rhs_vals):
    """Index where the longest constant-sign suffix starts, and its sign."""
    signs = np.where(np.abs(rhs_vals) <= RHS_SIGN_TOL, 0, np.sign(rhs_vals)).astype(int)
    current = 0
    start = len(signs)
    for i in range(len(signs) - 1, -1, -1):
        s = signs[i]
        if s != 0:
            if current == 0:
                current = s
            elif s != current:
                break
        start = i
    return start, current


def estimate_s_infty(profile: SteadyProfile) -> SInftyEstimate:
    """Estimate lim S(r) from the monotone tail of a global profile.

    The tail is the longest suffix of knots on which rhs has one sign
    (values below 1e-12 in magnitude are compatible with either sign).
    The limit is extrapolated with Aitken's delta-squared process on
    S(r_end/4), S(r_end/2), S(r_end); the last increment is the reported
    uncertainty.

    Raises
    ------
    DomainError
        If the profile blew up or covers less than 1e3 r0.
    TailNotResolved
        If the monotone suffix is shorter than 10 knots.
    """
    if math.isfinite(profile.r_max):
        raise DomainError("profile has a finite blow-up radius")
    if profile.r_end < MIN_COVERAGE_RATIO * profile.r0:
        raise DomainError("profile coverage below 1e3 r0")
    vals = profile.rhs_at_knots()
    start, sign = _tail_start(vals)
    if len(vals) - start < MIN_TAIL_KNOTS:
        raise TailNotResolved(f"tail not resolved: monotone suffix has {len(vals) - start} knots",
                              {"start": start, "knots": len(vals)})
    R_detect = float(profile.knots[start])
    r_end = profile.r_end
    s1, s2, s3 = (float(profile(r_end / 4)), float(profile(r_end / 2)), float(profile(r_end)))
    d1, d2 = s2 - s1, s3 - s2
    value = s3
    denom = d2 - d1
    if d1 != 0.0 and denom != 0.0:
        ratio = d2 / d1
        if 0.0 < ratio < 1.0:
            value = s3 - d2 * d2 / denom
    value = min(max(value, 0.0), 1.0)
    return SInftyEstimate(value, abs(d2), int(sign), R_detect)


# ---------------------------------------------------------------------------
# pressures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PressureProfiles:
    """Steady phase pressures p_i(r) = p_i(r0) - int G_i(c_i z^(1-n)) / f_i(S(z)) dz."""

    profile: SteadyProfile
    p1_at_r0: float
    p2_at_r0: float
    integral1: CumulativeQuadrature | None
    integral2: CumulativeQuadrature | None

    def p1(self, r):
        return self.p1_at_r0 - (self.integral1(r) if self.integral1 is not None else 0.0 * np.asarray(r))

    def p2(self, r):
        return self.p2_at_r0 - (self.integral2(r) if self.integral2 is not None else 0.0 * np.asarray(r))

    def capillary(self, r):
        """p1 - p2 along the profile."""
        return self.p1(r) - self.p2(r)


def pressure_profiles(profile: SteadyProfile, p1_at_r0: float, p2_at_r0: float,
                      r_hi: float | None = None, tol: float = 1e-10) -> PressureProfiles:
    """Reconstruct both steady pressures by cumulative quadrature.

    Raises
    ------
    SingularPermeability
        If the profile comes within delta_exit of 0 or 1 on the range.
    """
    params = profile.params
    r_hi = profile.coverage if r_hi is None else float(r_hi)
    lo, hi = profile.saturation_range(params.r0, r_hi)
    # an exit event stops on the band edge up to rounding, so compare with some room
    band = 2.0 * DELTA_EXIT
    reaches_exit = math.isfinite(profile.r_max) and r_hi >= profile.r_max * (1 - 1e-12)
    if reaches_exit or lo <= band or hi >= 1.0 - band:
        raise SingularPermeability("saturation within delta_exit of an endpoint; pressure integral is singular",
                                   {"min_S": lo, "max_S": hi})
    model, n = params.model, params.n

    def integrand(phase):
        c, g = (params.c1, params.g1) if phase == 1 else (params.c2, params.g2)
        perm = model.f1 if phase == 1 else model.f2

        def f(z):
            S = profile(z)
            return eval_G(g, c * np.power(z, 1 - n)) / perm(S)

        return f

    quads = []
    for phase, c in ((1, params.c1), (2, params.c2)):
        quads.append(None if c == 0.0 else CumulativeQuadrature(
            integrand(phase), params.r0, r_hi, tol=tol, breakpoints=profile.knots))
    return PressureProfiles(profile, float(p1_at_r0), float(p2_at_r0), quads[0], quads[1])
