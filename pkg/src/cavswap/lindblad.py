"""Reduced master-equation integration on the ``{|u0>, |g1>, |e0>, |g0>}`` basis.

Starting from ``|u0><u0|`` the dynamics never leave the single-excitation
manifold, so the 4x4 density matrix splits into the 3x3 block ``R`` (driven by
the non-Hermitian 3x3 Hamiltonian plus the ``2 gamma_u`` recycling term) and
the emitted-photon sink ``rho44`` fed at rate ``2 kappa R_11``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import NonConvergence, StepRejection
from .model import (SystemParams, PulsePolicy, Tabulated, pulse_arrays,
                    pulse_support_end)

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
RESIDUAL_TOL = 1e-6
MAX_EXTENSIONS = 20
MAX_STEPS = 50_000_000


@dataclass(frozen=True)
class Window:
    """Initial end time and extension chunk of the automatic window."""

    t_end: float
    chunk: float


def integration_window(params: SystemParams, policy: PulsePolicy) -> Window:
    """``[0, t_c + max(10 * fall width, 10 / slowest decay rate)]``."""
    tail = 10.0 / params.slowest_decay_rate()
    if isinstance(policy, Tabulated):
        return Window(float(policy.times[-1]) + tail, tail)
    t_end = max(policy.t_c + max(10.0 * policy.fall_width, tail), pulse_support_end(policy))
    return Window(t_end, tail)


def step_caps(policy: PulsePolicy) -> tuple[float, float, float]:
    """Region ``[lo, hi)`` where steps are capped at ``h_max`` so the pulse is never skipped."""
    if isinstance(policy, Tabulated):
        return (float(policy.times[0]), float(policy.times[-1]),
                float(np.min(np.diff(policy.times))))
    sigma1 = getattr(policy, "sigma1", getattr(policy, "sigma", None))
    sigma2 = policy.fall_width
    return policy.t_c - 8.0 * sigma1, policy.t_c + 8.0 * sigma2, 0.5 * min(sigma1, sigma2)


def shortest_timescale(params: SystemParams, policy: PulsePolicy) -> float:
    """Fastest time scale the reporting grid has to resolve.

    Pulses shorter than the system time scale act as kicks whose effect is
    captured exactly by the integrator between grid nodes, so the drive
    frequency only counts when the pulse outlasts the system response.
    """
    rates = [params.g, params.kappa, params.gamma_u + params.gamma_g,
             abs(params.delta_u), abs(params.delta_e)]
    tau_sys = 1.0 / max(rates)
    tau = tau_sys
    if policy.fall_width >= tau_sys or isinstance(policy, Tabulated):
        if policy.peak > 0:
            tau = min(tau, 1.0 / policy.peak)
    return tau


def default_grid(params: SystemParams, policy: PulsePolicy, t_end: float | None = None,
                 points_per_timescale: float = 40.0, min_points: int = 600,
                 max_points: int = 4000) -> np.ndarray:
    """Uniform grid with ``max(min_points, ppt * window / shortest timescale)`` samples."""
    if t_end is None:
        t_end = integration_window(params, policy).t_end
    n = int(math.ceil(points_per_timescale * t_end / shortest_timescale(params, policy)))
    n = min(max(min_points, n), max_points)
    return np.linspace(0.0, t_end, n)


def _model_arrays(params: SystemParams):
    return np.array([params.g, params.kappa, params.gamma_u, params.gamma_g,
                     params.delta_u, params.delta_e], dtype=float)


def _status_check(status, where):
    if status == K.STATUS_STEP_TOO_SMALL:
        raise StepRejection(f"step size underflow while integrating {where}")
    if status == K.STATUS_MAX_STEPS:
        raise StepRejection(f"step budget exhausted while integrating {where}")


class _Stepper:
    """Thin stateful wrapper around the compiled integrator."""

    def __init__(self, mode, params, policy, rtol, atol):
        self.mode = mode
        self.prm = _model_arrays(params)
        self.pp, self.tab_t, self.tab_v = pulse_arrays(policy)
        self.caps = step_caps(policy)
        self.rtol, self.atol = rtol, atol
        self.h = min(1e-3, self.caps[2])
        self.nsteps = 0

    def run(self, t0, y0, t_out):
        t_out = np.ascontiguousarray(t_out, dtype=float)
        ys, h, ns, status = K.integrate(
            self.mode, float(t0), np.ascontiguousarray(y0, dtype=complex), t_out,
            self.prm, self.pp, self.tab_t, self.tab_v, self.rtol, self.atol, self.h,
            *self.caps, MAX_STEPS)
        self.nsteps += ns
        self.h = h
        _status_check(status, "the master equation")
        return ys


def initial_state(mode) -> np.ndarray:
    y = np.zeros(K.STATE_SIZE[mode], dtype=complex)
    y[0] = 1.0  # R_00 = |u0><u0|
    psi = 10 if mode == K.MODE_DENSITY else 22
    y[psi] = 1.0
    return y


def residual_population(y: np.ndarray) -> float:
    """Population left in ``|g1>`` and ``|e0>``."""
    return float(abs(y[4].real) + abs(y[8].real))


@dataclass(frozen=True)
class DensityTrajectory:
    """Density matrices sampled on ``grid`` (shape ``(N, 4, 4)``)."""

    grid: np.ndarray
    rho: np.ndarray
    pure_amplitude: np.ndarray
    params: SystemParams
    policy: PulsePolicy
    converged: bool
    residual: float
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    nsteps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.einsum("nii->ni", self.rho))

    @property
    def trace(self) -> np.ndarray:
        return np.real(np.trace(self.rho, axis1=1, axis2=2))

    def to_csv(self, path) -> None:
        """Write ``t`` plus Re/Im of the 10 upper-triangular elements."""
        idx = [(i, j) for i in range(4) for j in range(i, 4)]
        header = ["t"]
        for i, j in idx:
            header += [f"re_rho{i + 1}{j + 1}", f"im_rho{i + 1}{j + 1}"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for n, t in enumerate(self.grid):
                row = [repr(float(t))]
                for i, j in idx:
                    v = self.rho[n, i, j]
                    row += [repr(float(v.real)), repr(float(v.imag))]
                writer.writerow(row)


def _assemble(ys, mode):
    n = ys.shape[0]
    rho = np.zeros((n, 4, 4), dtype=complex)
    rho[:, :3, :3] = ys[:, :9].reshape(n, 3, 3)
    rho[:, 3, 3] = ys[:, 9].real
    psi0 = 10 if mode == K.MODE_DENSITY else 22
    return rho, ys[:, psi0:psi0 + 3].copy()


def evolve_density(params: SystemParams, policy: PulsePolicy, grid=None, *,
                   rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                   points_per_timescale: float = 40.0, max_points: int = 4000,
                   min_points: int = 600) -> DensityTrajectory:
    """Integrate the master equation from ``|u0><u0|``.

    With ``grid=None`` the window is chosen automatically and extended (with
    the same spacing) until the population outside ``{|u0>, |g0>}`` is below
    1e-6 and the pump has switched off; failing that within 20 extensions
    raises :class:`NonConvergence`.  An explicit grid is used as given and
    the trajectory records whether the residual criterion holds at its end.
    """
    mode = K.MODE_DENSITY
    stepper = _Stepper(mode, params, policy, rtol, atol)
    y0 = initial_state(mode)
    if grid is not None:
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing with at least 2 points")
        ys = np.empty((grid.size, y0.size), dtype=complex)
        ys[0] = y0
        if grid[0] != 0.0:
            ys[0] = stepper.run(0.0, y0, grid[:1])[0]
        ys[1:] = stepper.run(grid[0], ys[0], grid[1:])
        residual = residual_population(ys[-1])
        converged = residual < RESIDUAL_TOL and _pump_off(policy, grid[-1])
        rho, psi = _assemble(ys, mode)
        return DensityTrajectory(grid, rho, psi, params, policy, converged, residual,
                                 rtol, atol, stepper.nsteps)

    win = integration_window(params, policy)
    grid = default_grid(params, policy, win.t_end, points_per_timescale, min_points, max_points)
    dt = grid[1] - grid[0]
    ys = np.empty((grid.size, y0.size), dtype=complex)
    ys[0] = y0
    ys[1:] = stepper.run(0.0, y0, grid[1:])
    chunks = [ys]
    grids = [grid]
    extensions = 0
    while True:
        y_last = chunks[-1][-1]
        t_last = grids[-1][-1]
        residual = residual_population(y_last)
        if residual < RESIDUAL_TOL and _pump_off(policy, t_last):
            break
        if extensions >= MAX_EXTENSIONS:
            raise NonConvergence(
                f"residual population {residual:.3g} at t={t_last:.4g} after "
                f"{extensions} window extensions")
        n_ext = max(1, int(math.ceil(win.chunk / dt)))
        ext = t_last + dt * np.arange(1, n_ext + 1)
        chunks.append(stepper.run(t_last, y_last, ext))
        grids.append(ext)
        extensions += 1
    grid = np.concatenate(grids)
    ys = np.concatenate(chunks)
    rho, psi = _assemble(ys, mode)
    return DensityTrajectory(grid, rho, psi, params, policy, True, residual, rtol, atol,
                             stepper.nsteps, {"extensions": extensions})


def _pump_off(policy: PulsePolicy, t: float) -> bool:
    return t >= pulse_support_end(policy)


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    """Weights ``w`` with ``sum(w * f) == np.trapezoid(f, grid)``."""
    grid = np.asarray(grid, dtype=float)
    w = np.zeros_like(grid)
    d = np.diff(grid)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def photon_emission_probability(traj: DensityTrajectory, params: SystemParams | None = None) -> float:
    """``P_ex = 2 kappa * int rho_22 dt`` by trapezoid quadrature on the grid."""
    params = traj.params if params is None else params
    return float(2.0 * params.kappa * np.dot(trapezoid_weights(traj.grid),
                                             traj.rho[:, 1, 1].real))


def cumulative_emission(traj: DensityTrajectory, t: float) -> float:
    """``rho_44(t)``, the probability that a photon has left by time ``t``."""
    if math.isinf(t) and t > 0:
        return float(traj.rho[-1, 3, 3].real)
    if not (traj.grid[0] <= t <= traj.grid[-1]):
        raise ValueError(f"t={t} outside trajectory range [{traj.grid[0]}, {traj.grid[-1]}]")
    return float(np.interp(t, traj.grid, traj.rho[:, 3, 3].real))


def pure_photon_probability(params: SystemParams, policy: PulsePolicy, grid=None, *,
                            traj: DensityTrajectory | None = None, **kwargs) -> float:
    """``P0 = 2 kappa * int |<g1|psi(t)>|^2 dt`` without the recycling term.

    Quadrature on the same grid as :func:`photon_emission_probability`, so
    ``P0 == P_ex`` to integrator accuracy when ``gamma_u == 0``.
    """
    if traj is None:
        traj = evolve_density(params, policy, grid, **kwargs)
    amp = np.abs(traj.pure_amplitude[:, 1]) ** 2
    return float(2.0 * params.kappa * np.dot(trapezoid_weights(traj.grid), amp))
