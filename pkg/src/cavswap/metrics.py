"""Swap fidelity, entanglement rate and the cooperativity bound.

Two routes feed the same formulas:

* grid route: a :class:`~cavswap.qrt.TwoTimeCorrelation` and trapezoid
  quadrature (needed for non-identical sources and for inspection);
* moments route: the accumulators of :func:`~cavswap.qrt.correlation_moments`,
  which give the identical-source quantities without any grid.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmissionZero
from .lindblad import (DEFAULT_ATOL, DEFAULT_RTOL, evolve_density,
                       photon_emission_probability, pure_photon_probability,
                       trapezoid_weights)
from .model import PulsePolicy, SystemParams, cooperativity_fractions
from .qrt import MOMENT_ATOL, MOMENT_RTOL, CorrelationMoments, TwoTimeCorrelation, correlation_moments, two_time_correlation

EMISSION_FLOOR = 1e-12


def _complex_json(z: complex) -> list:
    return [float(z.real), float(z.imag)]


@dataclass(frozen=True)
class SwapResult:
    p_ex_1: float
    p_ex_2: float
    j_avg: complex
    fidelity: float
    p_ent: float

    def as_dict(self) -> dict:
        d = asdict(self)
        d["j_avg"] = _complex_json(self.j_avg)
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)


@dataclass(frozen=True)
class BoundReport:
    """Terms of the upper bound on ``<J>`` for identical sources.

    ``bound_value = first_term + term_lambda_diag - term_derivative - term_residual``.
    """

    cooperativity: float
    p_ex: float
    first_term: float
    term_lambda_diag: float
    term_derivative: float
    term_residual: float
    bound_value: float
    truncated_bound: float
    j_avg: float | None = None

    @property
    def truncated_fidelity(self) -> float:
        return 0.5 * (1.0 + self.truncated_bound)

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)


def _check_emission(p1: float, p2: float) -> None:
    if not (p1 * p2 >= EMISSION_FLOOR):
        raise EmissionZero(f"emission probabilities {p1:.3g}, {p2:.3g} too small to herald")


def correlation_J(corr1: TwoTimeCorrelation, corr2: TwoTimeCorrelation, p1: float, p2: float,
                  params: SystemParams, params2: SystemParams | None = None) -> complex:
    """``<J> = 4 k1 k2 iint G1*(t,t') G2(t,t') dt dt' / (p1 p2)``.

    ``params`` supplies ``kappa`` of the first source, ``params2`` (default:
    the same) that of the second.
    """
    _check_emission(p1, p2)
    if corr1.grid.shape != corr2.grid.shape or not np.array_equal(corr1.grid, corr2.grid):
        raise ValueError("both correlations must share one grid")
    k2 = (params if params2 is None else params2).kappa
    w = trapezoid_weights(corr1.grid)
    if corr1 is corr2:
        integral = w @ (np.abs(corr1.values) ** 2) @ w
    else:
        integral = w @ (np.conj(corr1.values) * corr2.values) @ w
    return complex(4.0 * params.kappa * k2 * integral / (p1 * p2))


def correlation_J_from_moments(params: SystemParams, m: CorrelationMoments) -> float:
    """Identical-source ``<J> = 8 kappa^2 iint_{t'>=t} |G|^2 / P_ex^2``."""
    _check_emission(m.p_ex, m.p_ex)
    return 8.0 * params.kappa ** 2 * m.upper_sq / m.p_ex ** 2


def bell_fidelity(j: complex) -> float:
    """``F = (1 + Re j) / 2``."""
    return 0.5 * (1.0 + complex(j).real)


def entanglement_rate(p_ex: float) -> float:
    """Heralding probability ``p_ex^2 / 2`` of the linear-optics Bell measurement."""
    if not 0.0 <= p_ex <= 1.0 + 1e-9:
        raise ValueError(f"p_ex must lie in [0, 1], got {p_ex}")
    return 0.5 * p_ex * p_ex


def _bound(params: SystemParams, p_ex: float, diag_sq: float, deriv_sq: float,
           lambda1_sq: float, j=None) -> BoundReport:
    _check_emission(p_ex, p_ex)
    frac_c, frac_1 = cooperativity_fractions(params)
    try:
        c = params.cooperativity()
    except ZeroDivisionError:
        c = math.inf
    p2 = p_ex * p_ex
    first = 2.0 * frac_c * (1.0 / p_ex - 0.5)
    t_diag = 8.0 * params.kappa * frac_1 * diag_sq / p2
    t_der = 8.0 * frac_1 * deriv_sq / p2
    t_res = 4.0 * params.kappa * frac_c * lambda1_sq / p2
    return BoundReport(c, p_ex, first, t_diag, t_der, t_res,
                       first + t_diag - t_der - t_res, frac_c,
                       None if j is None else float(complex(j).real))


def bound_from_moments(params: SystemParams, m: CorrelationMoments) -> BoundReport:
    return _bound(params, m.p_ex, m.diag_sq, m.deriv_sq, m.lambda1_sq,
                  correlation_J_from_moments(params, m))


def _upper_triangle_integrals(corr: TwoTimeCorrelation):
    """``iint_{t'>=t}`` of ``|G|^2`` and ``|dG/dt'|^2`` row by row."""
    grid, g = corr.grid, corr.values
    n = grid.size
    w_outer = trapezoid_weights(grid)
    upper = np.zeros(n)
    deriv = np.zeros(n)
    for i in range(n - 1):
        t = grid[i:]
        row = g[i, i:]
        wi = trapezoid_weights(t)
        if row.size >= 3:
            d = np.gradient(row, t, edge_order=2)
        else:
            d = np.full(2, (row[1] - row[0]) / (t[1] - t[0]))
        upper[i] = wi @ (np.abs(row) ** 2)
        deriv[i] = wi @ (np.abs(d) ** 2)
    return float(w_outer @ upper), float(w_outer @ deriv)


def analytic_bound(params: SystemParams, p_ex: float, corr: TwoTimeCorrelation) -> BoundReport:
    """Bound terms from a correlation grid.

    The derivative along ``t'`` uses second-order centred differences with
    one-sided end stencils; all integrals are trapezoid sums.
    """
    w = trapezoid_weights(corr.grid)
    diag_sq = float(w @ corr.diagonal ** 2)
    lam1_sq = float(w @ np.abs(corr.lambda_final) ** 2)
    _, deriv_sq = _upper_triangle_integrals(corr)
    j = correlation_J(corr, corr, p_ex, p_ex, params)
    return _bound(params, p_ex, diag_sq, deriv_sq, lam1_sq, j)


@dataclass(frozen=True)
class PointEvaluation:
    """Everything a sweep records about one ``(params, pulse)`` point."""

    swap: SwapResult
    p_pure: float
    bound: BoundReport
    method: str
    meta: dict

    @property
    def p_pure_ratio(self) -> float:
        return self.p_pure / self.swap.p_ex_1 if self.swap.p_ex_1 > 0 else float("nan")

    def as_dict(self) -> dict:
        return {"swap": self.swap.as_dict(), "p_pure": self.p_pure,
                "p_pure_ratio": self.p_pure_ratio, "bound": self.bound.as_dict(),
                "method": self.method, **self.meta}


def _swap(p1, p2, j) -> SwapResult:
    return SwapResult(p1, p2, complex(j), bell_fidelity(j), entanglement_rate(min(1.0, math.sqrt(p1 * p2))))


def evaluate_point(params: SystemParams, policy: PulsePolicy, *, method: str = "moments",
                   rtol: float | None = None, atol: float | None = None,
                   grid_points: int | None = None, workers: int = 1,
                   keep_correlation: bool = False):
    """Identical-source swap metrics and bound for one pulse.

    ``method="moments"`` integrates the accumulators (no grid);
    ``method="grid"`` builds the full correlation grid.  Tolerances default
    to the accumulator or trajectory defaults respectively.  With
    ``keep_correlation`` the grid route also returns the correlation.
    """
    if method == "moments":
        rtol = MOMENT_RTOL if rtol is None else rtol
        atol = MOMENT_ATOL if atol is None else atol
        m = correlation_moments(params, policy, rtol=rtol, atol=atol)
        j = correlation_J_from_moments(params, m)
        ev = PointEvaluation(_swap(m.p_ex, m.p_ex, j), m.p_pure, bound_from_moments(params, m),
                             "moments", {"t_end": m.t_end, "nsteps": m.nsteps,
                                         "rtol": rtol, "atol": atol})
        return (ev, None) if keep_correlation else ev
    if method != "grid":
        raise ValueError(f"unknown method {method!r}")
    rtol = DEFAULT_RTOL if rtol is None else rtol
    atol = DEFAULT_ATOL if atol is None else atol
    kw = {} if grid_points is None else {"min_points": grid_points, "max_points": grid_points}
    traj = evolve_density(params, policy, rtol=rtol, atol=atol, **kw)
    p = photon_emission_probability(traj)
    corr = two_time_correlation(params, policy, traj, workers=workers)
    bound = analytic_bound(params, p, corr)
    p_pure = pure_photon_probability(params, policy, traj=traj)
    ev = PointEvaluation(_swap(p, p, bound.j_avg), p_pure, bound, "grid",
                         {"t_end": float(traj.grid[-1]), "n_grid": int(traj.grid.size),
                          "nsteps": traj.nsteps, "rtol": rtol, "atol": atol})
    return (ev, corr) if keep_correlation else ev


def evaluate_swap(params1: SystemParams, policy1: PulsePolicy,
                  params2: SystemParams | None = None, policy2: PulsePolicy | None = None, *,
                  grid=None, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                  workers: int = 1) -> SwapResult:
    """Swap result for two (possibly different) sources on a shared grid.

    Without an explicit ``grid`` the first source's automatic grid is
    stretched to cover both windows.
    """
    params2 = params1 if params2 is None else params2
    policy2 = policy1 if policy2 is None else policy2
    if grid is None:
        g1 = evolve_density(params1, policy1, rtol=rtol, atol=atol).grid
        if params2 == params1 and policy2 == policy1:
            grid = g1
        else:
            g2 = evolve_density(params2, policy2, rtol=rtol, atol=atol).grid
            t_end = max(g1[-1], g2[-1])
            n = max(g1.size, g2.size)
            grid = np.linspace(0.0, t_end, n)
    tr1 = evolve_density(params1, policy1, grid, rtol=rtol, atol=atol)
    c1 = two_time_correlation(params1, policy1, tr1, workers=workers)
    p1 = photon_emission_probability(tr1)
    if params2 == params1 and policy2 == policy1:
        c2, p2 = c1, p1
    else:
        tr2 = evolve_density(params2, policy2, grid, rtol=rtol, atol=atol)
        c2 = two_time_correlation(params2, policy2, tr2, workers=workers)
        p2 = photon_emission_probability(tr2)
    j = correlation_J(c1, c2, p1, p2, params1, params2)
    return _swap(p1, p2, j)
