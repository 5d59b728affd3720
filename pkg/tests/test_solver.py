import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from forch.barriers import growth_scalars, shell_constants
from forch.errors import ConfigurationError, DomainError, GeometryError
from forch.experiments import reference_field, reference_params
from forch.linearize import constants
from forch.solver import (GridSpec, SeparableForcing, VelocitySpec, assemble_mode_operator,
                          assemble_radial_operator, data_bounds, dichotomy_check, max_principle_check,
                          measure_decay, physical_sup, reconstruct, shell_sup_sequence, solve_ibvp,
                          spatial_decay_report)


@pytest.fixture(scope="module")
def outer_setup():
    profile, field = reference_field(reference_params(3, 1.0, -1.0))
    pack = constants(field, field.r_hi, s_range=profile.saturation_range())
    return field, pack


def small_grid(field, nodes=60, r_out=3.0, dt=0.01, T=0.5, modes=(0,)):
    return GridSpec.uniform(field.r0, r_out, nodes, dt, T, field.n, modes)


# -- grid -------------------------------------------------------------------


def test_grid_spec_errors():
    with pytest.raises(GeometryError):
        GridSpec(np.array([1.0, 1.5, 1.4, 2.0]), 0.1, 1.0, 3)
    with pytest.raises(GeometryError):
        GridSpec(np.array([1.0, 2.0]), 0.1, 1.0, 3)
    with pytest.raises(GeometryError):
        GridSpec(np.array([0.0, 1.0, 2.0]), 0.1, 1.0, 3)
    with pytest.raises(ConfigurationError):
        GridSpec.uniform(1.0, 2.0, 10, 0.0, 1.0, 3)
    with pytest.raises(ConfigurationError):
        GridSpec.uniform(1.0, 2.0, 10, 0.1, 1.0, 3, modes=(0, 1))
    with pytest.raises(ConfigurationError):
        GridSpec.uniform(1.0, 2.0, 10, 0.1, 1.0, 2, modes=(0, 0))


def test_grid_geometry():
    g = GridSpec.geometric(1.0, 100.0, 50, 0.1, 1.0, 3, first_width=0.05)
    assert g.r0 == 1.0 and g.r_out == 100.0
    h = np.diff(g.r_nodes)
    assert h[0] == pytest.approx(0.05)
    np.testing.assert_allclose(h[1:-1] / h[:-2], h[1] / h[0], rtol=1e-10)
    u = GridSpec.uniform(1.0, 2.0, 11, 0.1, 1.0, 3)
    assert u.mesh_ratio == pytest.approx(1.0)
    assert u.steps == 10 and u.times[-1] == pytest.approx(1.0)


def test_extended_grid_shares_nodes():
    g = GridSpec.geometric(1.0, 50.0, 40, 0.1, 1.0, 3)
    wide = g.extended(100.0)
    assert wide.r_out >= 100.0 * (1 - 1e-12)
    np.testing.assert_array_equal(wide.r_nodes[:g.r_nodes.size], g.r_nodes)


# -- assembly ---------------------------------------------------------------


def test_plain_laplacian_stencil():
    N, h = 21, 0.05
    r = 1.0 + h * np.arange(N)
    op = assemble_radial_operator(r, 1, np.ones(N - 1), np.zeros(N - 2))
    lower, diag, upper = oracles.laplacian_stencil_ref(N, h)
    np.testing.assert_allclose(op.lower, lower, rtol=1e-10)
    np.testing.assert_allclose(op.diag, diag, rtol=1e-10)
    np.testing.assert_allclose(op.upper, upper, rtol=1e-10)
    assert not op.upwinded.any()


def test_assembly_is_exact_on_quadratics():
    r = np.linspace(1.0, 2.0, 31)
    op = assemble_radial_operator(r, 3, np.ones(30), np.full(29, 0.7))
    w = r ** 2
    inner = r[1:-1]
    # -(1/r^2)(r^2 * 2r)' - 0.7 * 2r = -6 - 1.4 r up to the face-volume quadrature
    np.testing.assert_allclose(op.apply(w), -6.0 - 1.4 * inner, rtol=2e-3)


@given(drift=st.lists(st.floats(-1e3, 1e3), min_size=18, max_size=18),
       k=st.lists(st.floats(1e-3, 10.0), min_size=19, max_size=19))
def test_assembly_is_always_an_m_matrix(drift, k):
    r = np.geomspace(1.0, 30.0, 20)
    op = assemble_radial_operator(r, 3, np.array(k), np.array(drift))
    audit = op.audit()
    assert audit["m_matrix"], audit
    assert op.audit(1e-2)["m_matrix"]


def test_mode_operator_audit(case_d_field):
    grid = GridSpec.geometric(1.0, 500.0, 300, 0.01, 1.0, 3)
    audit = assemble_mode_operator(case_d_field, grid).audit(0.01)
    assert audit["m_matrix"] and audit["offdiag_max"] <= 0


def test_mode_shift_is_tangential_term(equilibrium_field_n2):
    f = equilibrium_field_n2
    grid = GridSpec.uniform(1.0, 5.0, 41, 0.01, 1.0, 2, modes=(0, 1, 2))
    r = grid.r_nodes[1:-1]
    base = assemble_mode_operator(f, grid, 0)
    for m in (1, 2):
        op = assemble_mode_operator(f, grid, m)
        np.testing.assert_allclose(op.diag - base.diag, m * m / (f.beta(r) * r ** 2), rtol=1e-12)
        np.testing.assert_array_equal(op.lower, base.lower)
        np.testing.assert_array_equal(op.upper, base.upper)


def test_assembly_outside_coverage(equilibrium_field_n2):
    grid = GridSpec.uniform(1.0, 200.0, 41, 0.01, 1.0, 2)
    with pytest.raises(DomainError):
        assemble_mode_operator(equilibrium_field_n2, grid)


# -- time stepping ----------------------------------------------------------


def test_zero_data_gives_zero(case_d_field):
    run = solve_ibvp(case_d_field, small_grid(case_d_field))
    assert np.all(run.w[0] == 0.0)
    assert not run.max_principle_flags


@given(a=st.floats(-2.0, 2.0), b=st.floats(-2.0, 2.0), k=st.integers(1, 4))
def test_discrete_maximum_principle(case_d_field, a, b, k):
    lo, hi = min(a, b), max(a, b)
    grid = small_grid(case_d_field, nodes=40, T=0.2)
    r0, R = grid.r0, grid.r_out

    def w0(r):
        return lo + (hi - lo) * np.sin(k * np.pi * (r - r0) / (R - r0)) ** 2

    G = lambda r, t: lo  # noqa: E731
    run = solve_ibvp(case_d_field, grid, w0, G)
    W = run.w[0]
    assert W.min() >= min(lo, 0.0) - 1e-9
    assert W.max() <= max(hi, 0.0) + 1e-9
    assert not run.max_principle_flags


def test_boundary_and_initial_rows_exact(case_d_field):
    grid = small_grid(case_d_field)
    w0 = lambda r: np.cos(r)  # noqa: E731
    G = lambda r, t: math.cos(r) * math.exp(-t)  # noqa: E731
    run = solve_ibvp(case_d_field, grid, w0, G)
    np.testing.assert_array_equal(run.w[0][0], np.cos(grid.r_nodes))
    np.testing.assert_array_equal(run.boundary_trace()[:, 0], [G(grid.r0, t) for t in grid.times])
    np.testing.assert_array_equal(run.boundary_trace()[:, 1], [G(grid.r_out, t) for t in grid.times])
    assert run.compatibility_gap == 0.0


def test_incompatible_data_warns(case_d_field):
    with pytest.warns(RuntimeWarning):
        run = solve_ibvp(case_d_field, small_grid(case_d_field), lambda r: 0.0 * r, lambda r, t: 1.0)
    assert run.compatibility_gap == 1.0


def test_mode_decoupling(equilibrium_field_n2):
    grid = GridSpec.uniform(1.0, 3.0, 41, 0.01, 0.3, 2, modes=(0, 1, 2))
    run = solve_ibvp(equilibrium_field_n2, grid, {1: lambda r: (r - 1) * (3 - r)})
    assert np.all(run.w[0] == 0.0) and np.all(run.w[2] == 0.0)
    assert np.abs(run.w[1][-1]).max() > 0


def test_homogeneous_run_sup_nonincreasing(equilibrium_field_n2):
    grid = GridSpec.uniform(1.0, 2.0, 81, 1e-3, 0.3, 2, modes=(0, 1))
    run = solve_ibvp(equilibrium_field_n2, grid,
                     {0: lambda r: np.sin(np.pi * (r - 1)), 1: lambda r: 0.3 * np.sin(2 * np.pi * (r - 1))})
    sup = physical_sup(run)
    assert np.all(np.diff(sup) <= 1e-12)


def test_manufactured_solution_accuracy(case_d_field):
    """Second-order spatial error visible against an independent residual."""
    from forch.experiments import manufactured_convergence
    out = manufactured_convergence(space_levels=(11, 21), time_steps=(0.02, 0.01), time_nodes=201)
    assert out["space_orders"][0] > 1.8
    assert out["time_orders"][0] > 0.85


# -- reconstruction ---------------------------------------------------------


def test_reconstruct_zero(equilibrium_field_n2):
    grid = GridSpec.uniform(1.0, 2.0, 21, 0.05, 0.2, 2, modes=(0, 1))
    run = solve_ibvp(equilibrium_field_n2, grid)
    rec = reconstruct(equilibrium_field_n2, run)
    for d in (rec.sigma, rec.v1, rec.v2):
        for arr in d.values():
            assert np.all(arr == 0.0)


def test_reconstruct_without_velocity(equilibrium_field_n2):
    f = equilibrium_field_n2
    grid = GridSpec.uniform(1.0, 2.0, 41, 0.01, 0.2, 2)
    run = solve_ibvp(f, grid, lambda r: np.sin(np.pi * (r - 1)))
    rec = reconstruct(f, run, VelocitySpec())
    np.testing.assert_array_equal(rec.v1[0] + rec.v2[0], 0.0)
    # gauge round trip
    back = rec.sigma[0] * np.exp(-np.asarray(f.Lambda(grid.r_nodes)))
    np.testing.assert_allclose(back, run.w[0], rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(rec.gauge, [oracles.equilibrium_gauge_closed_n2(x) for x in grid.r_nodes],
                               rtol=1e-9, atol=1e-12)


def test_reconstruct_velocity_split(equilibrium_field_n2):
    f = equilibrium_field_n2
    V = VelocitySpec("const", value=0.5)
    grid = GridSpec.uniform(1.0, 2.0, 21, 0.05, 0.2, 2)
    run = solve_ibvp(f, grid)
    rec = reconstruct(f, run, V)
    r = grid.r_nodes
    Vr = 0.5 / r
    np.testing.assert_allclose(rec.v1[0] + rec.v2[0], np.broadcast_to(Vr, rec.v1[0].shape), rtol=1e-13)
    np.testing.assert_allclose(rec.v2[0][0], f.chi(r) * Vr, rtol=1e-13)


def test_velocity_spec_values():
    V = VelocitySpec("exp_decay", rate=2.0, amplitude=3.0)
    assert V.nu(0.5) == pytest.approx(3.0 * math.exp(-1.0))
    assert V.radial(2.0, 0.0, 3) == pytest.approx(3.0 / 4.0)
    with pytest.raises(ConfigurationError):
        VelocitySpec("swirl")
    with pytest.raises(ConfigurationError):
        VelocitySpec("exp_decay", rate=-1.0)


# -- decay ------------------------------------------------------------------


@pytest.fixture(scope="module")
def annulus():
    _, field = reference_field(reference_params(2, 1.0, 1.0), 1e2)
    pack = constants(field, 2.0)
    return field, pack, growth_scalars(pack, 2.0)


def test_nonpositive_data_contract(annulus):
    field, pack, sc = annulus
    grid = GridSpec.uniform(1.0, 2.0, 81, 2e-3, 1.2 * sc["cycle"], 2)
    run = solve_ibvp(field, grid, lambda r: -np.sin(np.pi * (r - 1)), constants=pack, R_growth=2.0)
    rep = measure_decay(run)
    assert rep.contraction["checked"]
    assert rep.contraction["lhs"] == 0.0 and rep.contraction["rhs"] == 0.0
    assert rep.contraction["holds"]
    assert rep.all_ok


def test_homogeneous_envelope_and_rate(annulus):
    field, pack, sc = annulus
    grid = GridSpec.uniform(1.0, 2.0, 101, 2e-3, 3 * sc["cycle"], 2, modes=(0, 1))
    run = solve_ibvp(field, grid, {0: lambda r: np.sin(np.pi * (r - 1)), 1: lambda r: (r - 1) * (2 - r)},
                     constants=pack, R_growth=2.0)
    rep = measure_decay(run)
    assert rep.homogeneous and rep.all_ok
    assert rep.fitted_rate >= rep.eta1
    assert rep.contraction["holds"]


def test_measure_decay_needs_constants(case_d_field):
    run = solve_ibvp(case_d_field, small_grid(case_d_field))
    with pytest.raises(ConfigurationError):
        measure_decay(run)


def test_data_bounds(case_d_field):
    grid = small_grid(case_d_field)
    f0 = SeparableForcing(lambda r: np.full_like(np.asarray(r, float), 0.2), lambda t: 1.0 + t)
    run = solve_ibvp(case_d_field, grid, lambda r: 0.0 * r, lambda r, t: 0.1 * t, f0)
    b = data_bounds(run)
    assert b.forcing_sup == pytest.approx(0.2 * 1.5)
    assert b.boundary_sup == pytest.approx(0.1 * 0.5)
    assert b.delta0 == pytest.approx(b.forcing_sup + b.boundary_sup)
    early = data_bounds(run, t_window=(0.0, 0.2))
    assert early.forcing_sup <= b.forcing_sup and early.boundary_sup <= b.boundary_sup
    for val in b.to_dict().values():
        if isinstance(val, float):
            assert val >= 0


# -- outer-domain diagnostics -------------------------------------------------


def test_max_principle_constant_forcing(outer_setup):
    field, _ = outer_setup
    grid = GridSpec.geometric(1.0, 20.0, 120, 0.01, 2.0, 3)
    f0 = SeparableForcing(lambda r: np.full_like(np.asarray(r, float), 0.1), lambda t: 1.0)
    run = solve_ibvp(field, grid, lambda r: 0.0 * r, lambda r, t: 0.0, f0)
    mp = max_principle_check(run, T=2.0)
    assert mp["rhs"] == pytest.approx(0.3)
    assert mp["passed"] and mp["lhs"] <= 0.3 * (1 + 1e-6)


def test_max_principle_unit_data(outer_setup):
    field, _ = outer_setup
    grid = GridSpec.geometric(1.0, 20.0, 120, 0.01, 1.0, 3)
    run = solve_ibvp(field, grid, lambda r: np.cos(3 * r) * (r < 5), lambda r, t: math.cos(3 * r) * (r < 5))
    mp = max_principle_check(run)
    assert mp["passed"] and mp["lhs"] <= 1 + 1e-6


def test_zero_run_diagnostics(outer_setup):
    field, pack = outer_setup
    sh = shell_constants(pack, 0.5)
    r_out = 1.0 + 4 * sh["R"]
    run = solve_ibvp(field, GridSpec.geometric(1.0, r_out, 100, 0.05, 0.5, 3))
    seq = shell_sup_sequence(run, sh["R"])
    assert np.all(seq == 0.0)
    verdict = dichotomy_check(seq, sh["eta0"], sh["log_eta0"])
    assert verdict["branch"] == "decay" and verdict["part_A_holds"]
    rep = spatial_decay_report(run)
    assert max(rep["M_r"]) == 0.0
    assert rep["r_below_threshold"] == 1.0


def test_shell_sequence_needs_coverage(outer_setup):
    field, pack = outer_setup
    run = solve_ibvp(field, GridSpec.geometric(1.0, 30.0, 50, 0.1, 0.2, 3))
    with pytest.raises(DomainError):
        shell_sup_sequence(run, 20.0)


def test_dichotomy_branches():
    up = dichotomy_check([0.0, 1.0, 2.0, 4.0, 8.0], 0.5)
    assert up["branch"] == "growth"
    down = dichotomy_check([8.0, 4.0, 2.0, 1.0, 0.5], 0.5)
    assert down["branch"] == "decay" and down["decay_from"] == 0
    assert all(t["holds"] for t in down["triples"])


def test_bounded_runs_never_grow(outer_setup):
    """Twenty bounded compact-support runs all land in the decay branch."""
    field, pack = outer_setup
    sh = shell_constants(pack, 0.5)
    rng = np.random.default_rng(4)
    branches = []
    for _ in range(20):
        support = rng.uniform(1.5, 4.0)
        amp = rng.uniform(-2.0, 2.0)
        k = int(rng.integers(1, 4))
        r_out = support + 4 * sh["R"]
        grid = GridSpec.geometric(1.0, r_out, 200, 0.01, 0.5, 3)

        def w0(r, support=support, amp=amp, k=k):
            r = np.asarray(r)
            return np.where(r < support, amp * np.sin(k * np.pi * (r - 1) / (support - 1)), 0.0)

        run = solve_ibvp(field, grid, w0, lambda r, t: 0.0)
        seq = shell_sup_sequence(run, sh["R"], base_radius=support)
        branches.append(dichotomy_check(seq, sh["eta0"], sh["log_eta0"])["branch"])
    assert "growth" not in branches
    assert all(b == "decay" for b in branches)
