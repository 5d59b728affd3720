import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import params
from forch.barriers import (RadialTestFunction, apply_L, barrier_value, build_growth_barrier,
                            build_outer_barrier, build_shell_barrier, component_margins,
                            growth_scalars, residual_bracket, shell_constants, truncation_radius,
                            verify_barrier_sign)
from forch.constitutive import GeneralizedPolynomial
from forch.errors import DomainError, GeometryError
from forch.linearize import CoefficientField, constants
from forch.steady import integrate_profile


@pytest.fixture(scope="module")
def pack(case_d_field):
    return constants(case_d_field, 2.0)


@pytest.fixture(scope="module")
def growth(pack, case_d_field):
    return build_growth_barrier(pack, 2.0, case_d_field)


@pytest.fixture(scope="module")
def outer(pack, case_d_field):
    return build_outer_barrier(pack, 2.0, 1.0, case_d_field)


@pytest.fixture(scope="module")
def shell(pack, case_d_field):
    R = shell_constants(pack, 0.5)["R"]
    return build_shell_barrier(pack, R, R + 2.0, case_d_field)


@pytest.fixture(scope="module")
def small_shell(pack, case_d_field):
    return build_shell_barrier(pack, 3.0, 5.0, case_d_field)


@pytest.fixture(scope="module")
def darcy_equilibrium_field():
    """phi_coeff is exactly constant: S = 1/2 and g1 = g2 = 1."""
    one = GeneralizedPolynomial.constant(1.0)
    return CoefficientField(integrate_profile(params(n=3, g1=one, g2=one), 200.0))


# -- growth_time ------------------------------------------------------------


def test_growth_potential_at_inner_radius(growth, pack):
    assert growth.potential(1.0) == pytest.approx(pack.kappa0 * pack.C0 / 2, rel=1e-15)


def test_growth_scalars_formulas(pack):
    R = 2.0
    sc = growth_scalars(pack, R)
    s = pack.kappa0 * (pack.n + pack.C2 * R)
    assert sc["s"] == pytest.approx(s, rel=1e-15)
    assert sc["q"] == pytest.approx(pack.kappa0 * pack.C0 / (2 * s), rel=1e-15)
    assert sc["eta0"] == pytest.approx((1.0 / R) ** (2 * s), rel=1e-12)
    assert sc["eta1"] == pytest.approx(oracles.eta1_ref(sc["eta0"], sc["q"], R), rel=1e-12)
    assert sc["cycle"] == pytest.approx(sc["q"] * R ** 2, rel=1e-15)


def test_eta1_synthetic_value():
    value = oracles.eta1_ref(0.25, 0.1, 2.0)
    assert value == pytest.approx(math.log(1.25) / 0.4, rel=1e-15)
    assert value == pytest.approx(0.5578589, abs=1e-7)
    # the commonly quoted four-digit figure
    assert value == pytest.approx(0.557899, rel=1e-4)


def test_eta_is_reciprocal_peak_of_h0(pack):
    sc = growth_scalars(pack, 2.0)
    s, t0 = sc["s"], sc["t0"]
    args = (s, pack.kappa0, pack.C0, pack.r0)
    h = 1e-6 * t0
    slope = (oracles.h0_log_ref(t0 + h, *args) - oracles.h0_log_ref(t0 - h, *args)) / (2 * h)
    assert abs(slope) < 1e-6 * s / t0
    grid = np.geomspace(t0 / 100, t0 * 100, 2001)
    peak = max(oracles.h0_log_ref(t, *args) for t in grid)
    assert peak <= oracles.h0_log_ref(t0, *args) + 1e-12
    assert sc["log_eta"] == pytest.approx(-oracles.h0_log_ref(t0, *args), rel=1e-12)


def test_eta0_below_one_and_decreasing(case_d_field):
    prev = 0.0
    for R in (1.2, 2.0, 5.0, 20.0, 100.0):
        sc = growth_scalars(constants(case_d_field, R), R)
        assert sc["eta0"] < 1.0
        assert sc["log_eta0"] < prev
        prev = sc["log_eta0"]


def test_growth_barrier_requires_R_above_r0(pack, case_d_field):
    with pytest.raises(DomainError):
        build_growth_barrier(pack, 1.0, case_d_field)


def test_growth_potential_bound(growth, pack):
    r = np.linspace(1.0, 2.0, 200)
    assert np.all(growth.potential(r) <= pack.kappa0 * pack.C0 * r ** 2 / 2 * (1 + 1e-12))
    assert np.all(np.diff(growth.potential(r)) > 0)


# -- outer_sup --------------------------------------------------------------


def test_outer_potential_at_inner_radius_and_bound(outer, pack):
    assert outer.potential(1.0) == pytest.approx(pack.kappa1 * pack.C1 / 2, rel=1e-15)
    r = np.linspace(1.0, 2.0, 200)
    assert np.all(outer.potential(r) >= pack.kappa1 * pack.C1 * r ** 2 / 2 * (1 - 1e-12))


def test_outer_exponent(outer, pack):
    assert outer.s_exponent == pytest.approx(pack.kappa1 * (pack.n + pack.C2) * 3.0, rel=1e-15)


def test_outer_barrier_blows_up_at_final_time(outer):
    t = 1.0 - np.geomspace(1e-1, 1e-4, 8)
    w = barrier_value(outer, 1.5, t)
    assert np.all(np.diff(w) > 0)
    assert w[-1] > 1e50 * w[0]
    with np.errstate(over="ignore"):
        assert barrier_value(outer, 1.5, 1.0 - 1e-8) == math.inf


def test_truncation_radius_against_scan(pack):
    R = truncation_radius(pack, 1.0, 1e6)
    ref = oracles.truncation_search_ref(pack.C3_outer, pack.kappa1, pack.C1, 1.0, 1e6, pack.r0)
    assert math.isfinite(R)
    assert R == pytest.approx(ref, abs=2e-3)


@pytest.mark.parametrize("T", [0.3, 2.0, 10.0])
def test_truncation_radius_against_scan_other_times(pack, T):
    R = truncation_radius(pack, T, 1e6)
    ref = oracles.truncation_search_ref(pack.C3_outer, pack.kappa1, pack.C1, T, 1e6, pack.r0)
    assert R == pytest.approx(ref, abs=2e-3)


def test_truncation_radius_errors(pack):
    with pytest.raises(DomainError):
        truncation_radius(pack, 0.0, 1e6)
    with pytest.raises(DomainError):
        truncation_radius(pack, 1.0, -1.0)


# -- shell_sub --------------------------------------------------------------


def test_shell_potential_vanishes_at_center(shell):
    assert shell.potential(shell.ell) == 0.0


def test_shell_potential_exact_quadratic_for_constant_phi(darcy_equilibrium_field):
    f = darcy_equilibrium_field
    pk = constants(f, 100.0)
    spec = build_shell_barrier(pk, 10.0, 30.0, f)
    phi = f.phi_coeff(25.0)
    r = np.linspace(20.0, 40.0, 41)
    np.testing.assert_allclose(spec.potential(r), pk.kappa2 * phi * (r - 30.0) ** 2 / 2,
                               rtol=1e-10, atol=1e-12)


def test_shell_potential_symmetry_is_third_order(shell):
    ell = shell.ell
    gaps = [abs(shell.potential(ell + h) - shell.potential(ell - h)) for h in (0.4, 0.2, 0.1)]
    orders = oracles.observed_order(gaps)
    assert all(o > 2.7 for o in orders)


def test_shell_potential_bound(shell, pack):
    r = np.linspace(shell.r_inner, shell.r_outer, 400)
    assert np.all(shell.potential(r) >= 0)
    assert np.all(shell.potential(r) <= pack.kappa2 * pack.C0 * (r - shell.ell) ** 2 / 2 * (1 + 1e-12))


def test_shell_geometry_error(pack, case_d_field):
    with pytest.raises(GeometryError):
        build_shell_barrier(pack, 5.0, 5.5, case_d_field)


def test_shell_potential_outside_annulus(shell):
    with pytest.raises(DomainError):
        shell.potential(shell.r_outer + 1.0)


@given(T=st.floats(0.01, 50.0))
def test_shell_eta0_in_unit_interval(pack, T):
    sc = shell_constants(pack, T)
    assert sc["log_eta0"] < 0
    assert 0.0 <= sc["eta0"] < 1.0
    assert sc["R"] == pytest.approx(pack.C4 * (1 + T))


def test_shell_constants_formula(pack):
    T = 0.5
    C5 = pack.C5
    ref = math.log(1 - 2.0 ** (-C5 * (T + 1))) - 2 * C5 * (T + 1) * math.log(T + 1)
    assert shell_constants(pack, T)["log_eta0"] == pytest.approx(ref, rel=1e-12)


# -- residual brackets against an independent application of L ----------------


def _barrier_as_radial_function(spec):
    """W with hand-derived r and t derivatives of the exponential form."""
    f, k = spec.field, spec.kappa
    s = spec.s_exponent
    if spec.family == "growth_time":
        sign, tau, dtau, centre = -1.0, (lambda t: t), 1.0, 0.0
    elif spec.family == "outer_sup":
        sign, tau, dtau, centre = 1.0, (lambda t: spec.T - t), -1.0, 0.0
    else:
        sign, tau, dtau, centre = -1.0, (lambda t: t + 1.0), 1.0, spec.ell

    def P1(r):
        d = r - centre
        return k * d * f.phi_coeff(r)

    def P2(r):
        return k * (f.phi_coeff(r) + (r - centre) * f.phi_coeff_prime(r))

    def W(r, t):
        return tau(t) ** -s * math.exp(sign * spec.potential(r) / tau(t))

    def W_t(r, t):
        tt = tau(t)
        return W(r, t) * dtau * (-s / tt - sign * spec.potential(r) / tt ** 2)

    def W_r(r, t):
        return W(r, t) * sign * P1(r) / tau(t)

    def W_rr(r, t):
        tt = tau(t)
        return W(r, t) * ((P1(r) / tt) ** 2 + sign * P2(r) / tt)

    return RadialTestFunction(W, W_t, W_r, W_rr), sign, tau


@pytest.mark.parametrize("name,points", [
    ("growth", [(1.2, 0.05), (1.7, 0.2), (2.0, 0.01)]),
    ("outer", [(1.1, 0.1), (1.5, 0.5), (1.9, 0.9)]),
    ("small_shell", [(-0.7, 0.0), (0.3, 1.0), (0.9, 4.0)]),
])
def test_bracket_matches_operator_application(name, points, request):
    spec = request.getfixturevalue(name)
    u, sign, tau = _barrier_as_radial_function(spec)
    for a, t in points:
        r = spec.ell + a * spec.R if spec.family == "shell_sub" else a
        x = np.array([r, 0.0, 0.0])
        tt = tau(t)
        pref = tt ** (-spec.s_exponent - 2) * math.exp(sign * spec.potential(r) / tt)
        LW = apply_L(spec.field, u, x, t)
        bracket = residual_bracket(spec, r, t)
        assert LW == pytest.approx(pref * bracket, rel=1e-7, abs=1e-9 * abs(pref) * spec.s_exponent)


@pytest.mark.parametrize("name", ["growth", "outer", "shell"])
def test_barrier_signs_on_ten_thousand_samples(name, request, case_d_field):
    spec = request.getfixturevalue(name)
    report = verify_barrier_sign(case_d_field, spec, 10_000)
    assert report.passed, report.to_dict()
    assert report.components_passed, report.to_dict()
    assert report.samples == 10_000
    assert report.expected_sign == (1 if name == "outer" else -1)


@pytest.mark.parametrize("name", ["growth", "outer", "shell"])
def test_component_margins_nonnegative(name, request):
    spec = request.getfixturevalue(name)
    r = np.linspace(spec.r_inner, spec.r_outer, 500)
    drift, pot = component_margins(spec, r)
    assert np.all(drift >= -1e-9 * spec.s_exponent)
    assert np.all(pot >= -1e-9 * (np.abs(spec.potential(r)) + 1.0))


def test_sign_check_rejects_foreign_field(growth, equilibrium_field_n3):
    with pytest.raises(DomainError):
        verify_barrier_sign(equilibrium_field_n3, growth, 100)


# -- apply_L ----------------------------------------------------------------


def test_apply_L_of_constant_is_zero(case_d_field):
    const = RadialTestFunction(lambda r, t: 3.0, lambda r, t: 0.0, lambda r, t: 0.0,
                               lambda r, t: 0.0)
    assert apply_L(case_d_field, const, [2.0, 1.0, 0.5], 0.3) == 0.0
    assert abs(apply_L(case_d_field, lambda x, t: 3.0, np.array([2.0, 1.0, 0.5]), 0.3)) < 1e-8


def _manufactured():
    pi = math.pi
    return RadialTestFunction(lambda r, t: math.exp(-t) * math.cos(pi * r),
                              lambda r, t: -math.exp(-t) * math.cos(pi * r),
                              lambda r, t: -pi * math.exp(-t) * math.sin(pi * r),
                              lambda r, t: -pi ** 2 * math.exp(-t) * math.cos(pi * r))


def test_apply_L_manufactured_radial(case_d_field):
    f = case_d_field
    u = _manufactured()
    for r, t in ((1.3, 0.1), (2.7, 0.5), (7.25, 1.0)):
        ref = oracles.radial_L_ref(u.dr(r, t), u.drr(r, t), u.dt(r, t), r, 3,
                                   f.phi_coeff(r), f.phi_coeff_prime(r), f.lambda_drift(r))
        x = r * np.array([0.6, 0.0, 0.8])
        assert apply_L(f, u, x, t) == pytest.approx(ref, rel=1e-8, abs=1e-10)


def test_apply_L_finite_difference_matches_radial(case_d_field):
    u = _manufactured()

    def sampled(x, t):
        return u.value(float(np.linalg.norm(x)), t)

    for x in ([1.5, 0.5, 0.2], [0.0, 2.0, 2.5]):
        r = float(np.linalg.norm(x))
        exact = apply_L(case_d_field, u, x, 0.4)
        fd = apply_L(case_d_field, sampled, x, 0.4, h=1e-3)
        assert fd == pytest.approx(exact, rel=1e-4, abs=1e-4), r


def test_apply_L_coverage_error(case_d_field):
    u = _manufactured()
    with pytest.raises(DomainError):
        apply_L(case_d_field, u, [0.5, 0.0, 0.0], 0.0)
    with pytest.raises(DomainError):
        apply_L(case_d_field, lambda x, t: 0.0, [1.0, 0.0, 0.0], 0.0)
    with pytest.raises(DomainError):
        apply_L(case_d_field, u, [2.0, 0.0], 0.0)
