"""Scalar Dormand-Prince 5(4) integrator with dense output and exit events.

Kept in-house rather than delegated to ``scipy.integrate.solve_ivp`` because
the steady-state module needs the continuous extension's derivative, exact
control of which stage values the right-hand side sees, and an exit event
located on the interpolant without a terminal-event restart.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError

# Butcher tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
# difference between the 5th and embedded 4th order weights (7 stages, FSAL)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# Hairer's continuous extension, polynomial coefficients in theta
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@dataclass
class DenseSolution:
    """Piecewise quartic interpolant over accepted steps.

    y(t) = y_k + h_k * sum_j Q[k, j] theta**(j+1),  theta = (t - t_k)/h_k.
    """

    t_left: np.ndarray
    h: np.ndarray
    y_left: np.ndarray
    Q: np.ndarray

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.t_left, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.t_left) - 1)
        theta = (t - self.t_left[idx]) / self.h[idx]
        return idx, theta

    def __call__(self, t):
        idx, th = self._locate(t)
        q = self.Q[idx]
        poly = th * (q[..., 0] + th * (q[..., 1] + th * (q[..., 2] + th * q[..., 3])))
        return self.y_left[idx] + self.h[idx] * poly

    def derivative(self, t):
        idx, th = self._locate(t)
        q = self.Q[idx]
        return q[..., 0] + th * (2 * q[..., 1] + th * (3 * q[..., 2] + th * 4 * q[..., 3]))


@dataclass
class IntegrationResult:
    t: np.ndarray
    y: np.ndarray
    dense: DenseSolution
    exit_time: float | None
    exit_side: int
    nfev: int
    status: str


def _initial_step(fun, t0, y0, f0, direction, rtol, atol, order=5):
    # Hairer-Norsett-Wanner heuristic, same as the classical implementations
    scale = atol + abs(y0) * rtol
    d0 = abs(y0) / scale
    d1 = abs(f0) / scale
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = fun(t0 + h0 * direction, y1)
    d2 = abs(f1 - f0) / scale / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1)


def dopri5(fun, t0: float, y0: float, t_end: float, *, rtol=1e-10, atol=1e-12,
           max_step=math.inf, lower=None, upper=None, bisect_iter=80) -> IntegrationResult:
    """Integrate the scalar ODE y' = fun(t, y) from t0 to t_end.

    Parameters
    ----------
    fun : callable
        Scalar right-hand side; must accept any stage value the method
        produces (callers clamp internally if needed).
    lower, upper : float, optional
        Exit thresholds.  When an accepted step carries y across one of them
        the crossing time is found by bisection on the dense output, the
        solution is truncated there and ``exit_side`` is -1 (lower) or +1.

    Raises
    ------
    NumericError
        On step-size underflow; ``state`` holds the last accepted (t, y).
    """
    t, y = float(t0), float(y0)
    span = t_end - t
    if span <= 0:
        raise ValueError("t_end must exceed t0")
    nfev = 1
    f = fun(t, y)
    h = min(_initial_step(fun, t, y, f, 1.0, rtol, atol), max_step, span)
    nfev += 1
    ts, ys = [t], [y]
    t_left, hs, y_left, qs = [], [], [], []
    exit_time, exit_side, status = None, 0, "complete"
    K = np.empty(7)
    err_exp = -1.0 / 5.0
    while t < t_end:
        if h < 16 * np.spacing(max(abs(t), 1.0)):
            raise NumericError("step size underflow", {"t": t, "y": y, "h": h})
        if t + h > t_end:
            h = t_end - t
        K[0] = f
        for s in range(1, 6):
            ys_ = y + h * sum(a * K[j] for j, a in enumerate(_A[s]))
            K[s] = fun(t + _C[s] * h, ys_)
        y_new = y + h * sum(b * K[j] for j, b in enumerate(_B) if b != 0.0)
        f_new = fun(t + h, y_new)
        K[6] = f_new
        nfev += 6
        err = h * float(np.dot(_E, K))
        scale = atol + rtol * max(abs(y), abs(y_new))
        err_norm = abs(err) / scale
        if err_norm <= 1.0 and math.isfinite(y_new):
            Q = K @ _P
            t_left.append(t)
            hs.append(h)
            y_left.append(y)
            qs.append(Q)
            crossed = None
            if lower is not None and y_new <= lower:
                crossed = -1
            elif upper is not None and y_new >= upper:
                crossed = 1
            if crossed is not None:
                level = lower if crossed < 0 else upper
                a, b = 0.0, 1.0
                for _ in range(bisect_iter):
                    mid = 0.5 * (a + b)
                    val = y + h * mid * (Q[0] + mid * (Q[1] + mid * (Q[2] + mid * Q[3])))
                    if (val - level) * crossed >= 0:
                        b = mid
                    else:
                        a = mid
                # stop strictly inside the admissible band
                exit_time = t + a * h
                y_exit = y + h * a * (Q[0] + a * (Q[1] + a * (Q[2] + a * Q[3])))
                hs[-1] = max(a * h, np.spacing(t))
                ts.append(exit_time)
                ys.append(y_exit)
                exit_side, status = crossed, "exit"
                # keep the interpolant on the truncated step: rescale theta
                Q_trunc = Q * np.array([a, a ** 2, a ** 3, a ** 4]) / max(a, 1e-300)
                qs[-1] = Q_trunc
                break
            t, y, f = t + h, y_new, f_new
            ts.append(t)
            ys.append(y)
            factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** err_exp)
            h = min(h * factor, max_step)
        else:
            factor = MIN_FACTOR if not math.isfinite(err_norm) else max(MIN_FACTOR, SAFETY * err_norm ** err_exp)
            h *= factor
    dense = DenseSolution(np.array(t_left), np.array(hs), np.array(y_left), np.array(qs).reshape(-1, 4))
    return IntegrationResult(np.array(ts), np.array(ys), dense, exit_time, exit_side, nfev, status)
