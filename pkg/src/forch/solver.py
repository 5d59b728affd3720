"""Implicit finite-volume solver for the gauge-transformed linearized equation.

Solves  w_t - div(A grad w) - b . A grad w = f0  on r0 < |x| < R_out with
Dirichlet data on both spheres.  In polar/spherical coordinates A has radial
eigenvalue 1/phi_coeff and tangential eigenvalue 1/beta, so a Fourier mode
w_m(r, t) cos(m theta) (n = 2) obeys the decoupled radial problem

    d_t w_m - r^(1-n) d_r(r^(n-1) d_r w_m / phi_coeff) + m^2 w_m / (beta r^2)
            - (lambda r / phi_coeff) d_r w_m = f0_m.

Space: conservative node-centred finite volumes; the drift uses the
three-point central derivative unless the cell Peclet number exceeds 2 or
an off-diagonal would turn positive, in which case it is upwinded.  Every
interior row then has non-positive off-diagonals and zero row sum (plus the
non-negative mode term), so I/dt + L is an M-matrix.
Time: backward Euler, one LAPACK tridiagonal factorization per mode.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import lapack

from .barriers import growth_scalars
from .errors import ConfigurationError, DomainError, GeometryError, NumericError
from .linearize import CoefficientField, ConstantsPack

__all__ = [
    "GridSpec",
    "TridiagonalOperator",
    "VelocitySpec",
    "SeparableForcing",
    "GridField",
    "DataBounds",
    "Reconstruction",
    "DecayReport",
    "assemble_radial_operator",
    "assemble_mode_operator",
    "velocity_forcing",
    "solve_ibvp",
    "reconstruct",
    "data_bounds",
    "measure_decay",
    "physical_sup",
    "shell_sup_sequence",
    "dichotomy_check",
    "comparison_check",
    "max_principle_check",
    "spatial_decay_report",
]

PECLET_LIMIT = 2.0
MP_TOL = 1e-9
ANGLES = 64


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Radial nodes, time step and mode list of a run.

    ``mesh_ratio`` is the largest ratio of neighbouring cell widths
    (1 for uniform grids, the stretching factor for geometric ones).
    """

    r_nodes: np.ndarray
    dt: float
    T_final: float
    n: int
    modes: tuple = (0,)

    def __post_init__(self):
        r = np.asarray(self.r_nodes, dtype=float)
        object.__setattr__(self, "r_nodes", r)
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        if r.ndim != 1 or r.size < 3:
            raise GeometryError("need at least three radial nodes")
        if not np.all(np.diff(r) > 0):
            raise GeometryError("radial nodes must be strictly increasing")
        if r[0] <= 0:
            raise GeometryError("inner radius must be positive")
        if not (self.dt > 0 and self.T_final > 0):
            raise ConfigurationError("dt and T_final must be positive")
        if any(m < 0 for m in self.modes) or len(set(self.modes)) != len(self.modes):
            raise ConfigurationError("modes must be distinct non-negative integers")
        if self.n != 2 and self.modes != (0,):
            raise ConfigurationError("angular modes are only supported for n = 2")

    @classmethod
    def uniform(cls, r0, r_out, nodes, dt, T_final, n, modes=(0,)):
        return cls(np.linspace(r0, r_out, nodes), dt, T_final, n, modes)

    @classmethod
    def geometric(cls, r0, r_out, nodes, dt, T_final, n, modes=(0,), first_width=None):
        """Cells growing geometrically from ``first_width`` (default: log-uniform nodes)."""
        if first_width is None:
            return cls(np.geomspace(r0, r_out, nodes), dt, T_final, n, modes)
        cells = nodes - 1
        span = r_out - r0
        if first_width * cells >= span:
            raise GeometryError("first_width too large for a stretched grid")
        lo, hi = 1.0, 2.0
        while first_width * (hi ** cells - 1) / (hi - 1) < span:
            hi *= 2
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if first_width * (mid ** cells - 1) / (mid - 1) < span:
                lo = mid
            else:
                hi = mid
        widths = first_width * hi ** np.arange(cells)
        r = r0 + np.concatenate([[0.0], np.cumsum(widths)])
        r[-1] = r_out
        return cls(r, dt, T_final, n, modes)

    def extended(self, r_out: float) -> "GridSpec":
        """Same nodes continued past r_out with the last cell ratio (shared-node refinement)."""
        r = list(self.r_nodes)
        ratio = (r[-1] - r[-2]) / (r[-2] - r[-3])
        width = r[-1] - r[-2]
        while r[-1] < r_out * (1 - 1e-12):
            width *= ratio
            r.append(r[-1] + width)
        return GridSpec(np.array(r), self.dt, self.T_final, self.n, self.modes)

    @property
    def steps(self) -> int:
        return max(1, int(round(self.T_final / self.dt)))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    @property
    def mesh_ratio(self) -> float:
        h = np.diff(self.r_nodes)
        ratios = h[1:] / h[:-1]
        return float(np.max(np.maximum(ratios, 1 / ratios))) if ratios.size else 1.0

    @property
    def r0(self) -> float:
        return float(self.r_nodes[0])

    @property
    def r_out(self) -> float:
        return float(self.r_nodes[-1])

    def to_dict(self) -> dict:
        return {"r0": self.r0, "r_out": self.r_out, "nodes": int(self.r_nodes.size), "dt": self.dt,
                "T_final": self.T_final, "steps": self.steps, "n": self.n, "modes": list(self.modes),
                "mesh_ratio": self.mesh_ratio}


# ---------------------------------------------------------------------------
# operator assembly
# ---------------------------------------------------------------------------

@dataclass
class TridiagonalOperator:
    """Rows of L for interior nodes 1..N-2.

    Row i (node j = i+1) reads  lower[i] w_{j-1} + diag[i] w_j + upper[i] w_{j+1};
    lower[0] and upper[-1] couple to the boundary nodes.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    upwinded: np.ndarray
    peclet: np.ndarray

    def apply(self, w: np.ndarray) -> np.ndarray:
        """L w at the interior nodes for a full nodal vector w."""
        return self.lower * w[:-2] + self.diag * w[1:-1] + self.upper * w[2:]

    def audit(self, dt: float | None = None) -> dict:
        """M-matrix audit of L (or of I/dt + L when dt is given)."""
        diag = self.diag + (1.0 / dt if dt else 0.0)
        offdiag_max = float(max(self.lower.max(), self.upper.max()))
        dominance = diag - np.abs(self.lower) - np.abs(self.upper)
        return {"offdiag_max": offdiag_max, "dominance_min": float(dominance.min()),
                "m_matrix": bool(offdiag_max <= 0.0 and dominance.min() >= -1e-12 * np.abs(diag).max()),
                "upwinded_rows": int(self.upwinded.sum()), "peclet_max": float(self.peclet.max())}


def assemble_radial_operator(r_nodes, n: int, diffusivity_faces, drift_nodes,
                             reaction_nodes=None) -> TridiagonalOperator:
    """Finite-volume rows of -r^(1-n)(r^(n-1) k w_r)_r - v w_r + c w.

    Parameters
    ----------
    r_nodes : array, shape (N,)
    n : int
        Radial weight exponent (n = 1 gives the plain 1-D operator).
    diffusivity_faces : array, shape (N-1,)
        k at the cell faces r_{j+1/2}.
    drift_nodes : array, shape (N-2,)
        v at the interior nodes.
    reaction_nodes : array, shape (N-2,), optional
        Non-negative zeroth-order coefficient c.
    """
    r = np.asarray(r_nodes, dtype=float)
    if not np.all(np.diff(r) > 0):
        raise GeometryError("radial nodes must be strictly increasing")
    k = np.asarray(diffusivity_faces, dtype=float)
    v = np.asarray(drift_nodes, dtype=float)
    h = np.diff(r)
    hm, hp = h[:-1], h[1:]
    faces = 0.5 * (r[:-1] + r[1:])
    # dual cell around node j spans [faces[j-1], faces[j]]
    volume = (faces[1:] ** n - faces[:-1] ** n) / n
    d_minus = faces[:-1] ** (n - 1) * k[:-1] / (hm * volume)
    d_plus = faces[1:] ** (n - 1) * k[1:] / (hp * volume)

    # weighted three-point central derivative on a non-uniform mesh
    a_plus = hm / (hp * (hm + hp))
    a_minus = -hp / (hm * (hm + hp))
    a_zero = (hp - hm) / (hp * hm)
    lower = -d_minus - v * a_minus
    upper = -d_plus - v * a_plus
    diag = d_minus + d_plus - v * a_zero

    k_node = 0.5 * (k[:-1] + k[1:])
    peclet = np.abs(v) * np.maximum(hm, hp) / k_node
    upwind = (peclet > PECLET_LIMIT) | (lower > 0) | (upper > 0)
    if np.any(upwind):
        fwd = upwind & (v > 0)
        bwd = upwind & (v <= 0)
        # -v w_r with v > 0: forward difference keeps the upper entry negative
        lower[fwd] = -d_minus[fwd]
        upper[fwd] = -d_plus[fwd] - v[fwd] / hp[fwd]
        diag[fwd] = d_minus[fwd] + d_plus[fwd] + v[fwd] / hp[fwd]
        lower[bwd] = -d_minus[bwd] + v[bwd] / hm[bwd]
        upper[bwd] = -d_plus[bwd]
        diag[bwd] = d_minus[bwd] + d_plus[bwd] - v[bwd] / hm[bwd]
    if reaction_nodes is not None:
        diag = diag + np.asarray(reaction_nodes, dtype=float)
    return TridiagonalOperator(lower, diag, upper, upwind, peclet)


def assemble_mode_operator(field: CoefficientField, grid: GridSpec, m: int = 0) -> TridiagonalOperator:
    """Discrete L_m for the coefficient field on the grid."""
    r = grid.r_nodes
    if r[0] < field.r0 * (1 - 1e-12) or r[-1] > field.r_hi * (1 + 1e-12):
        raise DomainError("grid extends beyond the coefficient coverage")
    if grid.n != field.n:
        raise ConfigurationError("grid dimension differs from the flow dimension")
    faces = 0.5 * (r[:-1] + r[1:])
    inner = r[1:-1]
    k_faces = 1.0 / np.asarray(field.phi_coeff(faces))
    drift = np.asarray(field.lambda_drift(inner)) * inner / np.asarray(field.phi_coeff(inner))
    reaction = None
    if m:
        reaction = m * m / (np.asarray(field.beta(inner)) * inner ** 2)
    return assemble_radial_operator(r, grid.n, k_faces, drift, reaction)


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocitySpec:
    """Total velocity V = nu(t) |x|^(-n) x, radial and divergence-free.

    family: ``zero``, ``exp_decay`` (nu = amplitude exp(-rate t)) or
    ``const`` (nu = value).
    """

    family: str = "zero"
    rate: float = 0.0
    value: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.family not in ("zero", "exp_decay", "const"):
            raise ConfigurationError(f"unknown velocity family {self.family!r}")
        if self.family == "exp_decay" and self.rate < 0:
            raise ConfigurationError("exp_decay rate must be non-negative")

    def nu(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "zero":
            return np.zeros_like(t)
        if self.family == "const":
            return np.full_like(t, self.value)
        return self.amplitude * np.exp(-self.rate * t)

    def radial(self, r, t, n):
        """Radial component nu(t) r^(1-n)."""
        return self.nu(t) * np.power(r, 1.0 - n)

    def sup_terms(self, r_lo, r_hi, t_lo, t_hi, n):
        """sup |V| and sup |grad V| over the annulus and time window."""
        ts = np.linspace(t_lo, t_hi, 257)
        nu_max = float(np.max(np.abs(self.nu(ts))))
        # grad V has eigenvalues nu r^-n (1-n) radially and nu r^-n tangentially
        grad_norm = math.sqrt((n - 1) ** 2 + (n - 1))
        return nu_max * r_lo ** (1 - n), nu_max * grad_norm * r_lo ** (-n)

    def to_dict(self):
        return {"family": self.family, "rate": self.rate, "value": self.value,
                "amplitude": self.amplitude}


@dataclass
class SeparableForcing:
    """f0(r, t) = spatial(r) * temporal(t); the solver caches the spatial part."""

    spatial: callable
    temporal: callable

    def __call__(self, r, t):
        return np.asarray(self.spatial(r)) * float(self.temporal(t))


def velocity_forcing(field: CoefficientField, V: VelocitySpec) -> SeparableForcing:
    """f0 = exp(-Lambda) div(A c) for the radial velocity family.

    With V = nu r^(1-n) e_r one has A c = chi nu r^(1-n) e_r, whence
    div(A c) = nu r^(1-n) chi'(r).
    """
    n = field.n

    def spatial(r):
        r = np.asarray(r, dtype=float)
        return np.exp(-np.asarray(field.Lambda(r))) * np.power(r, 1.0 - n) * np.asarray(field.chi_prime(r))

    return SeparableForcing(spatial, lambda t: float(V.nu(t)))


def _as_mode_map(obj, modes, kind):
    if obj is None:
        return {}
    if isinstance(obj, dict):
        unknown = set(obj) - set(modes)
        if unknown:
            raise ConfigurationError(f"{kind} given for modes {sorted(unknown)} not in the grid")
        return dict(obj)
    return {0: obj} if 0 in modes else {}


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

@dataclass
class GridField:
    """Space-time solution of one run.

    ``w[m]`` has shape (steps+1, N); rows are time levels.  ``forcing[m]``
    holds f0 sampled at every node and time level.
    """

    grid: GridSpec
    field: CoefficientField = dc_field(repr=False)
    w: dict = dc_field(default_factory=dict)
    forcing: dict = dc_field(default_factory=dict)
    audits: dict = dc_field(default_factory=dict)
    max_principle_flags: list = dc_field(default_factory=list)
    compatibility_gap: float = 0.0
    constants: ConstantsPack | None = None
    R_growth: float | None = None
    velocity: VelocitySpec | None = None
    label: str = ""

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def r(self) -> np.ndarray:
        return self.grid.r_nodes

    def boundary_trace(self, m: int = 0) -> np.ndarray:
        return self.w[m][:, [0, -1]]


def _evaluate(fn, r, t):
    if fn is None:
        return np.zeros_like(r)
    return np.broadcast_to(np.asarray(fn(r, t), dtype=float), r.shape).astype(float)


def solve_ibvp(field: CoefficientField, grid: GridSpec, w0=None, G=None, f0=None, *,
               constants: ConstantsPack | None = None, R_growth: float | None = None,
               velocity: VelocitySpec | None = None, label: str = "") -> GridField:
    """Backward-Euler solution of L w = f0 with Dirichlet data.

    Parameters
    ----------
    w0 : callable r -> values, or dict mode -> callable
        Initial data (mode amplitudes); missing modes start at zero.
    G : callable (r, t) -> value, or dict mode -> callable
        Dirichlet data, evaluated on the inner and outer sphere.
    f0 : callable (r, t) -> values, or dict mode -> callable
        Forcing; a SeparableForcing has its spatial part cached.

    Raises
    ------
    NumericError
        If a tridiagonal factorization or solve fails.
    """
    r = grid.r_nodes
    modes = grid.modes
    w0_map = _as_mode_map(w0, modes, "initial data")
    G_map = _as_mode_map(G, modes, "boundary data")
    f_map = _as_mode_map(f0, modes, "forcing")
    times = grid.times
    dt = grid.dt
    run = GridField(grid, field, constants=constants, R_growth=R_growth, velocity=velocity, label=label)
    inner = slice(1, -1)
    ends = r[[0, -1]]
    worst_gap = 0.0
    for m in modes:
        op = assemble_mode_operator(field, grid, m)
        audit = op.audit(dt)
        run.audits[m] = audit
        if not audit["m_matrix"]:
            raise NumericError(f"mode {m} operator is not an M-matrix", audit)
        dl, d, du = op.lower[1:].copy(), op.diag + 1.0 / dt, op.upper[:-1].copy()
        dl_f, d_f, du_f, du2, ipiv, info = lapack.dgttrf(dl, d, du)
        if info != 0:
            raise NumericError(f"tridiagonal factorization failed (info={info})", {"mode": m})
        W = np.empty((times.size, r.size))
        F = np.zeros((times.size, r.size))
        W[0] = np.broadcast_to(np.asarray(w0_map[m](r), dtype=float), r.shape) if m in w0_map else 0.0
        g_fn = G_map.get(m)
        if g_fn is not None:
            gap = max(abs(float(g_fn(ends[0], 0.0)) - W[0, 0]), abs(float(g_fn(ends[1], 0.0)) - W[0, -1]))
            worst_gap = max(worst_gap, gap)
        f_fn = f_map.get(m)
        spatial = None
        if isinstance(f_fn, SeparableForcing):
            spatial = np.asarray(f_fn.spatial(r), dtype=float)
        if f_fn is not None:
            F[0] = spatial * f_fn.temporal(0.0) if spatial is not None else _evaluate(f_fn, r, 0.0)
        for k in range(1, times.size):
            t = times[k]
            left = float(g_fn(ends[0], t)) if g_fn is not None else 0.0
            right = float(g_fn(ends[1], t)) if g_fn is not None else 0.0
            if f_fn is not None:
                F[k] = spatial * f_fn.temporal(t) if spatial is not None else _evaluate(f_fn, r, t)
            rhs = W[k - 1, inner] / dt + F[k, inner]
            rhs[0] -= op.lower[0] * left
            rhs[-1] -= op.upper[-1] * right
            sol, info = lapack.dgttrs(dl_f, d_f, du_f, du2, ipiv, rhs)
            if info != 0:
                raise NumericError(f"tridiagonal solve failed (info={info})", {"mode": m, "t": t})
            W[k, 0], W[k, -1] = left, right
            W[k, inner] = sol
            # one-step discrete maximum principle
            bound = max(np.abs(W[k - 1]).max(), abs(left), abs(right)) + dt * np.abs(F[k, inner]).max()
            excess = np.abs(W[k]).max() - bound
            if excess > MP_TOL * max(1.0, bound):
                run.max_principle_flags.append({"mode": m, "step": k, "excess": float(excess)})
        run.w[m] = W
        run.forcing[m] = F
    if worst_gap > 1e-10:
        warnings.warn(f"initial and boundary data disagree on the boundary by {worst_gap:.3e}",
                      RuntimeWarning, stacklevel=2)
    run.compatibility_gap = worst_gap
    return run


# ---------------------------------------------------------------------------
# post-processing
# ---------------------------------------------------------------------------

def physical_values(run: GridField, k: int | None = None) -> np.ndarray:
    """Physical field on an angular sample: shape (..., ANGLES, N) for multi-mode runs.

    Single-mode radial runs return w[0] unchanged (shape (..., N)).
    """
    if run.grid.modes == (0,):
        W = run.w[0]
        return W if k is None else W[k]
    theta = np.linspace(0.0, 2 * np.pi, ANGLES, endpoint=False)
    sl = slice(None) if k is None else k
    total = 0.0
    for m, W in run.w.items():
        total = total + np.cos(m * theta)[:, None] * W[sl][..., None, :]
    return total


def physical_sup(run: GridField) -> np.ndarray:
    """sup over x of |w(x, t_k)| for every time level."""
    vals = np.abs(physical_values(run))
    return vals.reshape(vals.shape[0], -1).max(axis=1)


def _physical_signed_max(run: GridField) -> np.ndarray:
    vals = physical_values(run)
    return vals.reshape(vals.shape[0], -1).max(axis=1)


def _radial_sup(run: GridField, signed: bool = False) -> np.ndarray:
    """sup over angles per (time, node): shape (steps+1, N)."""
    vals = physical_values(run)
    if run.grid.modes != (0,):
        vals = vals.max(axis=1) if signed else np.abs(vals).max(axis=1)
        return vals
    return vals if signed else np.abs(vals)


@dataclass
class Reconstruction:
    sigma: dict
    v1: dict
    v2: dict
    gauge: np.ndarray


def reconstruct(field: CoefficientField, run: GridField, V: VelocitySpec | None = None) -> Reconstruction:
    """sigma = e^Lambda w and the radial components of v1, v2 per mode.

    v2 = e^Lambda A grad w + A c; its radial component is
    e^Lambda w_r / phi_coeff + chi nu r^(1-n) (the A c part lives in mode 0).
    v1 = V - v2.  Gradients use second-order differences, one-sided at the
    boundary nodes.
    """
    V = V if V is not None else (run.velocity or VelocitySpec())
    r = run.r
    n = run.grid.n
    gauge = np.asarray(field.Lambda(r))
    eL = np.exp(gauge)
    phi = np.asarray(field.phi_coeff(r))
    chi = np.asarray(field.chi(r))
    nu = V.nu(run.times)[:, None]
    sigma, v1, v2 = {}, {}, {}
    for m, W in run.w.items():
        grad = np.gradient(W, r, axis=1, edge_order=2)
        sigma[m] = eL * W
        v2[m] = eL * grad / phi
        if m == 0:
            Vr = nu * np.power(r, 1.0 - n)
            v2[m] = v2[m] + chi * Vr
            v1[m] = Vr - v2[m]
        else:
            v1[m] = -v2[m]
    return Reconstruction(sigma, v1, v2, gauge)


@dataclass
class DataBounds:
    """Measured data suprema.  ``domain`` records the (r, t) window of each."""

    forcing_sup: float
    boundary_sup: float
    initial_sup: float
    delta0: float
    grad_forcing_sup: float
    V_sup: float
    gradV_sup: float
    delta3: float
    tail_delta0: float
    domain: dict

    def to_dict(self):
        return dict(self.__dict__)


def data_bounds(run: GridField, t_window: tuple | None = None, tail_fraction: float = 0.1) -> DataBounds:
    """Suprema of the forcing, boundary and velocity data of a run.

    delta0 = sup|f0| + sup|G| (interior forcing, lateral boundary);
    delta3 = sup(|V| + |grad V|) + sup|e^Lambda G| (sigma-level data);
    tail_delta0 is delta0 restricted to the last ``tail_fraction`` of the run
    (proxy for the limsup).
    """
    t = run.times
    lo, hi = (t[0], t[-1]) if t_window is None else t_window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    r = run.r
    forcing = sum(np.abs(F) for F in run.forcing.values())
    bnd = sum(np.abs(W[:, [0, -1]]) for W in run.w.values())
    f_sup = float(forcing[sel][:, 1:-1].max()) if forcing[sel][:, 1:-1].size else 0.0
    b_sel = sel & (t > 0)
    b_sup = float(bnd[b_sel].max()) if np.any(b_sel) else 0.0
    init = float(np.abs(physical_values(run, 0)).max())
    grad_f = 0.0
    for F in run.forcing.values():
        grad_f = max(grad_f, float(np.abs(np.gradient(F[sel], r, axis=1)).max()))
    V = run.velocity or VelocitySpec()
    V_sup, gradV_sup = V.sup_terms(r[0], r[-1], lo, hi, run.grid.n)
    gauge_ends = np.exp(np.asarray(run.field.Lambda(r[[0, -1]])))
    sig_b = float((bnd[b_sel] * gauge_ends).max()) if np.any(b_sel) else 0.0
    tail = t >= t[-1] - tail_fraction * (t[-1] - t[0])
    tail_delta = float(forcing[tail][:, 1:-1].max() + bnd[tail].max())
    return DataBounds(f_sup, b_sup, init, f_sup + b_sup, grad_f, V_sup, gradV_sup,
                      V_sup + gradV_sup + sig_b, tail_delta,
                      {"r": [float(r[0]), float(r[-1])], "t": [float(lo), float(hi)]})


@dataclass
class DecayReport:
    times: np.ndarray
    sup: np.ndarray
    envelope: np.ndarray
    envelope_ok: np.ndarray
    homogeneous: bool
    fitted_rate: float
    eta0: float
    eta1: float
    q: float
    cycle: float
    constant_C: float
    contraction: dict
    sigma_envelope_ok: np.ndarray | None = None

    @property
    def all_ok(self) -> bool:
        return bool(np.all(self.envelope_ok))

    def summary(self) -> dict:
        out = {"homogeneous": self.homogeneous, "fitted_rate": self.fitted_rate, "eta0": self.eta0,
               "eta1": self.eta1, "q": self.q, "cycle": self.cycle, "constant_C": self.constant_C,
               "envelope_all_ok": self.all_ok, "envelope_min_margin": float(np.min(self.envelope - self.sup)),
               "contraction": self.contraction}
        if self.sigma_envelope_ok is not None:
            out["sigma_envelope_all_ok"] = bool(np.all(self.sigma_envelope_ok))
        return out


def _fit_rate(times, sup):
    half = times >= times[0] + 0.5 * (times[-1] - times[0])
    tt, ss = times[half], sup[half]
    keep = ss > 1e-300
    if keep.sum() < 2:
        return math.inf
    slope = np.polyfit(tt[keep], np.log(ss[keep]), 1)[0]
    return float(-slope)


def measure_decay(run: GridField, constants: ConstantsPack | None = None,
                  R: float | None = None) -> DecayReport:
    """Compare sup_x |w(., t)| with the time-decay envelopes.

    Homogeneous runs (zero forcing and boundary data) use
    (1 + eta0) exp(-eta1 t) sup|w0|; otherwise
    C [exp(-eta1 t) sup|w0| + delta0] with the proof-traced
    C = 2 (1 + qR^2)(1 + eta0)/eta0 + (1 + eta0).  The single-cycle
    contraction max{0, sup w(qR^2)} <= max{0, sup w0}/(1 + eta0) is checked
    at the first time level at or beyond qR^2 for homogeneous runs.

    Raises
    ------
    ConfigurationError
        If no ConstantsPack is attached to the run or passed in.
    """
    constants = constants or run.constants
    R = R if R is not None else (run.R_growth if run.R_growth is not None else run.grid.r_out)
    if constants is None:
        raise ConfigurationError("measure_decay needs a ConstantsPack (attach constants to the run)")
    sc = growth_scalars(constants, R)
    eta0, eta1, q, cycle = sc["eta0"], sc["eta1"], sc["q"], sc["cycle"]
    times = run.times
    sup = physical_sup(run)
    w0_sup = sup[0]
    bounds = data_bounds(run)
    homogeneous = bounds.delta0 == 0.0
    decay = np.exp(-eta1 * times)
    C = 2 * (1 + q * R ** 2) * (1 + eta0) / eta0 + (1 + eta0) if eta0 > 0 else math.inf
    if homogeneous:
        envelope = (1 + eta0) * decay * w0_sup
    else:
        envelope = C * (decay * w0_sup + bounds.delta0)
    slack = 1e-12 * max(w0_sup, bounds.delta0, 1e-300)
    ok = sup <= envelope + slack
    contraction = {"checked": False}
    if homogeneous and times[-1] >= cycle:
        k = int(np.searchsorted(times, cycle - 1e-12))
        pos = np.maximum(0.0, _physical_signed_max(run))
        lhs, rhs = float(pos[k]), float(pos[0] / (1 + eta0))
        contraction = {"checked": True, "t": float(times[k]), "lhs": lhs, "rhs": rhs,
                       "holds": bool(lhs <= rhs + slack)}
    sigma_ok = None
    if not homogeneous or run.velocity is not None:
        gauge = np.asarray(run.field.Lambda(run.r))
        e_max, e_min = float(np.exp(gauge.max())), float(np.exp(gauge.min()))
        rec = reconstruct(run.field, run)
        sig = sum(np.abs(s) for s in rec.sigma.values()).max(axis=1)
        sig0 = float(sig[0])
        C_eff = C if not homogeneous else (1 + eta0)
        # sup|w0| <= e^{-min Lambda} sup|sigma0|, sup|sigma| <= e^{max Lambda} sup|w|
        sigma_env = e_max * C_eff * (decay * sig0 / e_min + bounds.delta0)
        sigma_ok = sig <= sigma_env * (1 + 1e-12) + slack
    return DecayReport(times, sup, envelope, ok, homogeneous, _fit_rate(times, sup), eta0, eta1, q,
                       cycle, C, contraction, sigma_ok)


# ---------------------------------------------------------------------------
# outer-domain diagnostics
# ---------------------------------------------------------------------------

def _sphere_history(run: GridField, radius: float, signed: bool, t_max=None):
    """Values of w on the sphere |x| = radius for all time levels (linear in r)."""
    vals = _radial_sup(run, signed=signed)
    r = run.r
    j = int(np.clip(np.searchsorted(r, radius) - 1, 0, r.size - 2))
    a = (radius - r[j]) / (r[j + 1] - r[j])
    hist = (1 - a) * vals[:, j] + a * vals[:, j + 1]
    if t_max is not None:
        hist = hist[run.times <= t_max + 1e-12]
    return hist


def shell_sup_sequence(run: GridField, R_shell: float, base_radius: float | None = None,
                       t_max: float | None = None) -> np.ndarray:
    """m_i = max{0, sup over the sphere base + i R_shell and t in [0, T] of w}.

    Reports every i with base + (i+1) R_shell inside the grid.  ``base``
    defaults to r0; pass a radius beyond the support of w0 so that the
    sequence starts where w(x, 0) <= 0.

    Raises
    ------
    DomainError
        If fewer than three spheres fit inside the grid.
    """
    base = run.grid.r0 if base_radius is None else float(base_radius)
    count = int(math.floor((run.grid.r_out - base) / R_shell + 1e-12))  # i + 1 <= count
    if count < 3:
        raise DomainError("run does not cover enough shells for the dichotomy")
    out = []
    for i in range(count):
        hist = _sphere_history(run, base + i * R_shell, signed=True, t_max=t_max)
        out.append(max(0.0, float(hist.max())))
    return np.array(out)


def dichotomy_check(sequence, eta0: float, log_eta0: float | None = None) -> dict:
    """Classify each triple (case a/b) and the sequence into growth (i) or decay (ii).

    The factor (1 + eta0) is formed as exp(log1p(eta0)); when eta0 underflows
    the checks reduce to monotonicity.
    """
    m = np.asarray(sequence, dtype=float)
    lf = math.log1p(eta0) if log_eta0 is None or log_eta0 > -700 else math.exp(log_eta0)
    factor = math.exp(lf)
    rel = 1e-12  # relative rounding allowance
    triples = []
    for i in range(1, m.size - 1):
        if m[i + 1] >= m[i - 1]:
            case, holds = "a", bool(m[i + 1] * (1 + rel) >= factor * m[i])
        else:
            case, holds = "b", bool(m[i - 1] * (1 + rel) >= factor * m[i])
        triples.append({"i": i, "case": case, "holds": holds})
    decay_from = None
    for k in range(m.size):
        j = np.arange(m.size - k)
        if np.all(m[k:] <= np.exp(-j * lf) * m[k] * (1 + rel)):
            decay_from = k
            break
    growth_from = None
    for i0 in range(1, m.size - 1):
        j = np.arange(m.size - i0)
        if m[i0] > 0 and np.all(m[i0:] * (1 + rel) >= np.exp(j * lf) * m[i0]):
            growth_from = i0
            break
    branch = "decay" if decay_from is not None and decay_from == 0 else (
        "growth" if growth_from is not None else ("decay" if decay_from is not None else "none"))
    return {"sequence": m.tolist(), "eta0": eta0, "triples": triples,
            "part_A_holds": all(t["holds"] for t in triples), "decay_from": decay_from,
            "growth_from": growth_from, "branch": branch}


def comparison_check(run: GridField, ell: float, R_shell: float, eta0: float,
                     base_radius: float | None = None, t_max: float | None = None) -> dict:
    """m_ell <= M_ell/(1 + eta0) with m on the sphere |x| = ell, M over the shell |r - ell| <= R."""
    base = run.grid.r0 if base_radius is None else base_radius
    if ell < R_shell + base - 1e-12:
        raise GeometryError("shell center must satisfy ell >= R + base radius")
    if ell + R_shell > run.grid.r_out + 1e-12:
        raise DomainError("shell leaves the computational domain")
    vals = _radial_sup(run, signed=True)
    if t_max is not None:
        vals = vals[run.times <= t_max + 1e-12]
    m_ell = max(0.0, float(_sphere_history(run, ell, True, t_max).max()))
    inside = (run.r >= ell - R_shell) & (run.r <= ell + R_shell)
    M_ell = max(0.0, float(vals[:, inside].max()), m_ell)
    rhs = M_ell / (1 + eta0)
    return {"ell": ell, "m": m_ell, "M": M_ell, "rhs": rhs,
            "holds": bool(m_ell <= rhs + 1e-14 * max(M_ell, 1e-300))}


def max_principle_check(run: GridField, bounds: DataBounds | None = None, T: float | None = None,
                        slack: float = 1e-6) -> dict:
    """sup|w| <= sup over the parabolic boundary of |w| + (T+1) sup|f0| + slack*scale."""
    bounds = bounds or data_bounds(run)
    T = run.times[-1] if T is None else T
    sel = run.times <= T + 1e-12
    vals = _radial_sup(run)[sel]
    lhs = float(vals.max())
    parabolic = max(float(vals[0].max()), float(vals[:, [0, -1]].max()))
    rhs = parabolic + (T + 1) * bounds.forcing_sup
    scale = max(rhs, 1e-300)
    return {"lhs": lhs, "rhs": float(rhs), "parabolic_sup": parabolic, "forcing_sup": bounds.forcing_sup,
            "T": float(T), "margin": float(rhs - lhs), "passed": bool(lhs <= rhs + slack * scale)}


def spatial_decay_report(run: GridField, threshold: float = 1e-6, resolve_fraction: float = 0.5) -> dict:
    """Sphere suprema M_r(T), the first radius below ``threshold``, and the escape curve.

    The escape curve follows the corollary construction: r_k is the
    smallest node with sup_{|x| >= r_k, t <= k} |w| < 1/k (made strictly
    increasing), and r(t) is piecewise linear through (k, r_{k+1}).  A
    radius counts as resolved only when it lies within ``resolve_fraction``
    of the truncation radius; otherwise the verdict is inconclusive.
    """
    r, t = run.r, run.times
    vals = _radial_sup(run)
    M_r = vals.max(axis=0)
    limit = run.grid.r0 + resolve_fraction * (run.grid.r_out - run.grid.r0)
    # first node beyond which every sphere sup (boundary node excluded) stays below threshold
    M_tail = np.maximum.accumulate(M_r[-2::-1])[::-1]
    below = np.nonzero(M_tail < threshold)[0]
    r_thr = float(r[below[0]]) if below.size else None
    # tail sup over |x| >= r_j for each time: reverse cumulative max
    tail = np.maximum.accumulate(vals[:, ::-1], axis=1)[:, ::-1]
    K = int(math.floor(t[-1] + 1e-12))
    radii = []
    resolved = True
    prev = -1
    for k in range(1, K + 1):
        window = tail[t <= k + 1e-12].max(axis=0)
        ok = np.nonzero(window < 1.0 / k)[0]
        idx = int(ok[0]) if ok.size else r.size - 1
        idx = max(idx, prev + 1)
        if idx >= r.size or r[min(idx, r.size - 1)] > limit:
            resolved = False
            idx = min(idx, r.size - 1)
        radii.append(float(r[idx]))
        prev = idx
    curve_ok = None
    worst = None
    if K >= 2 and resolved:
        # nodes (k, r_{k+1}) for k = 0..K-1; beyond K-1 the curve is held at r_K
        ks = np.arange(0, K)
        rk1 = np.array(radii[:K])
        sel = (t >= 1) & (t <= K + 1e-12)
        ratios = []
        for i in np.nonzero(sel)[0]:
            rt = float(np.interp(t[i], ks, rk1))
            outside = r >= rt - 1e-12
            s = float(vals[i, outside].max()) if np.any(outside) else 0.0
            ratios.append(s * math.floor(t[i]))
        worst = float(max(ratios)) if ratios else 0.0
        curve_ok = worst < 1.0
    verdict = "resolved" if (r_thr is not None and r_thr <= limit and resolved) else "inconclusive"
    return {"radii": r.tolist(), "M_r": M_r.tolist(), "threshold": threshold,
            "r_below_threshold": r_thr, "r_k": radii, "curve_check_max": worst,
            "curve_ok": curve_ok, "verdict": verdict}
