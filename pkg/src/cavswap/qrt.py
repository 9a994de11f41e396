"""Two-time cavity correlations ``G(t, t') = <a^dagger(t) a(t')>`` via the quantum regression theorem.

For ``t' >= t`` the regression operator keeps a single non-zero column,
``lambda(t, t')``, which obeys the 3-dimensional equation
``d lambda / dt' = -i H(t') lambda`` from ``lambda(t, t) = R(t)[:, g1]``.  On a grid
this means ``lambda(t_i, t_j) = U_{j-1} ... U_i lambda(t_i, t_i)`` with
per-interval propagators ``U_k``, so every stored value is exact up to the
integrator tolerance and independent of the grid spacing.

:func:`correlation_moments` skips the grid altogether and integrates the
double integrals needed downstream as accumulators of a single ODE.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import NonConvergence
from .lindblad import (DEFAULT_ATOL, DEFAULT_RTOL, MAX_EXTENSIONS, MAX_STEPS,
                       RESIDUAL_TOL, DensityTrajectory, _model_arrays, _pump_off,
                       _status_check, _Stepper, initial_state, integration_window,
                       step_caps, trapezoid_weights)
from .model import PulsePolicy, SystemParams, pulse_arrays, pulse_to_dict

# The bound subtracts two terms of order 1/P_ex that nearly cancel at small
# emission, so the accumulators need a much finer absolute tolerance than
# the trajectory itself.
MOMENT_RTOL = 1e-11
MOMENT_ATOL = 1e-13


@dataclass(frozen=True)
class TwoTimeCorrelation:
    """``values[i, j] = G(t_i, t_j)`` on a shared grid.

    ``lambda_final[i]`` is ``lambda_1(t_i, t_N)``, the stand-in for
    ``lambda_1(t_i, inf)`` (the window criterion bounds the difference).
    """

    grid: np.ndarray
    values: np.ndarray
    lambda_final: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.values))

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.grid)

    def dump(self, path) -> None:
        """Write the grid as little-endian complex128 (row-major re/im pairs) plus ``<path>.json``."""
        np.ascontiguousarray(self.values, dtype="<c16").tofile(path)
        sidecar = {
            "shape": list(self.values.shape),
            "dtype": "complex128",
            "byteorder": "little",
            "layout": "row-major, (re, im) float64 pairs; values[i, j] = <a^dag(t_i) a(t_j)>",
            "t_start": float(self.grid[0]),
            "t_stop": float(self.grid[-1]),
            "uniform": bool(np.allclose(np.diff(self.grid), self.grid[1] - self.grid[0])),
            "grid": [float(t) for t in self.grid],
        }
        sidecar.update(self.meta)
        with open(str(path) + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=2)

    @classmethod
    def load(cls, path) -> "TwoTimeCorrelation":
        with open(str(path) + ".json") as fh:
            side = json.load(fh)
        n, m = side["shape"]
        values = np.fromfile(path, dtype="<c16").reshape(n, m)
        return cls(np.array(side["grid"]), values, np.full(n, np.nan + 0j), side)


def regression_initial_values(traj: DensityTrajectory) -> np.ndarray:
    """``lambda(t, t) = (rho_12, rho_22, rho_32)`` for every grid time."""
    return np.ascontiguousarray(traj.rho[:, :3, 1])


def interval_propagators(params: SystemParams, policy: PulsePolicy, grid, *,
                         rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """Propagators of ``d x / dt = -i H(t) x`` over each ``[t_k, t_{k+1}]``."""
    grid = np.ascontiguousarray(grid, dtype=float)
    pp, tab_t, tab_v = pulse_arrays(policy)
    caps = step_caps(policy)
    props, status = K.interval_propagators(grid, _model_arrays(params), pp, tab_t, tab_v,
                                           rtol, atol, min(1e-3, caps[2]), *caps, MAX_STEPS)
    _status_check(status, "the regression propagators")
    return props


def two_time_correlation(params: SystemParams, policy: PulsePolicy, traj: DensityTrajectory, *,
                         rtol: float | None = None, atol: float | None = None,
                         workers: int = 1, row_order=None) -> TwoTimeCorrelation:
    """Fill ``G`` on the trajectory grid.

    Rows (outer times) are independent; ``workers > 1`` splits them into
    disjoint blocks evaluated on a thread pool (the row kernel releases the
    GIL).  ``row_order`` permutes the evaluation order and exists for
    testing; the result does not depend on it.
    """
    rtol = traj.rtol if rtol is None else rtol
    atol = traj.atol if atol is None else atol
    grid = traj.grid
    n = grid.size
    props = interval_propagators(params, policy, grid, rtol=rtol, atol=atol)
    init = regression_initial_values(traj)
    values = np.zeros((n, n), dtype=complex)
    lam1 = np.zeros(n, dtype=complex)
    rows = np.arange(n) if row_order is None else np.asarray(row_order, dtype=np.int64)
    if sorted(rows.tolist()) != list(range(n)):
        raise ValueError("row_order must be a permutation of the grid indices")
    if workers <= 1:
        K.fill_rows(props, init, rows, values, lam1)
    else:
        # interleave so each block gets long and short rows alike
        blocks = [rows[w::workers] for w in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: K.fill_rows(props, init, b, values, lam1), blocks))
    upper = np.triu(values)
    values = upper + np.conj(np.triu(values, 1)).T
    meta = {"params": params.as_dict(), "pulse": pulse_to_dict(policy),
            "rtol": rtol, "atol": atol, "n": n}
    return TwoTimeCorrelation(grid, values, lam1, meta)


def norm_squared_double_integral(corr: TwoTimeCorrelation) -> float:
    """``iint |G(t, t')|^2 dt dt'`` by the 2-D trapezoid rule."""
    w = corr.weights
    return float(w @ (np.abs(corr.values) ** 2) @ w)


# --------------------------------------------------------------------------
# grid-free route
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationMoments:
    """Exact (integrator-accurate) scalars of one source.

    ``upper_sq``   iint_{t'>=t} |G(t,t')|^2
    ``deriv_sq``   iint_{t'>=t} |d G(t,t')/dt'|^2
    ``diag_sq``    int |G(t,t)|^2 dt
    ``lambda1_sq`` int |lambda_1(t, t_end)|^2 dt
    """

    p_ex: float
    p_pure: float
    upper_sq: float
    deriv_sq: float
    diag_sq: float
    lambda1_sq: float
    t_end: float
    residual: float
    nsteps: int
    rtol: float
    atol: float

    @property
    def full_sq(self) -> float:
        """``iint |G|^2`` over the whole quadrant (the diagonal has measure zero)."""
        return 2.0 * self.upper_sq

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _moment_residual(y) -> float:
    return max(abs(y[4].real) + abs(y[8].real), abs(y[14].real) + abs(y[18].real))


def correlation_moments(params: SystemParams, policy: PulsePolicy, *,
                        rtol: float = MOMENT_RTOL, atol: float = MOMENT_ATOL) -> CorrelationMoments:
    """Integrate the density matrix together with the regression accumulators.

    ``K(t') = int_0^t' lambda(t,t') lambda(t,t')^dagger dt`` satisfies
    ``dK/dt' = -i(H K - K H^dagger) + v v^dagger`` with ``v = R[:, g1]``;
    its ``g1`` diagonal integrates to the upper-triangle double integral of
    ``|G|^2``, ``(H K H^dagger)_11`` to that of ``|dG/dt'|^2`` and ``K_00`` at
    the end of the window to ``int |lambda_1(t, inf)|^2 dt``.
    """
    mode = K.MODE_MOMENTS
    stepper = _Stepper(mode, params, policy, rtol, atol)
    win = integration_window(params, policy)
    y = initial_state(mode)
    t = 0.0
    t_next = win.t_end
    extensions = 0
    while True:
        y = stepper.run(t, y, np.array([t_next]))[0]
        t = t_next
        residual = _moment_residual(y)
        if residual < RESIDUAL_TOL and _pump_off(policy, t):
            break
        if extensions >= MAX_EXTENSIONS:
            raise NonConvergence(f"residual {residual:.3g} at t={t:.4g} after "
                                 f"{extensions} window extensions")
        t_next = t + win.chunk
        extensions += 1
    return CorrelationMoments(
        p_ex=float(y[9].real), p_pure=float(y[25].real), upper_sq=float(y[19].real),
        deriv_sq=float(y[20].real), diag_sq=float(y[21].real), lambda1_sq=float(y[10].real),
        t_end=t, residual=residual, nsteps=stepper.nsteps, rtol=rtol, atol=atol)
