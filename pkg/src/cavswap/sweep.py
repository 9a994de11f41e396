"""Batch sweeps: constant-area width sweeps, asymmetric-pulse scans, frontier binning.

Points are independent, so they go through a process pool; results are
gathered by input index, which keeps every output file independent of the
scheduling.  A point whose integration fails is logged and skipped.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CavswapError, NoHighEmissionPoint
from .lindblad import DEFAULT_ATOL, DEFAULT_RTOL
from .metrics import EMISSION_FLOOR, evaluate_point
from .model import (AsymmetricGaussian, SymmetricGaussian, SystemParams,
                    cooperativity_fractions, pulse_to_dict)
from .qrt import MOMENT_ATOL, MOMENT_RTOL

log = logging.getLogger(__name__)

DEFAULT_AREAS = (0.3, 0.5, 0.7, 0.9, 1.0, 1.5, 2.0, 3.0, 5.0)
# areas reaching P_ex -> 1 for every Table-1 row except the weak one
BOUND_AREAS = (3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0)
SIGMA_LO, SIGMA_HI = 0.01, 50.0
POINTS_PER_DECADE = 60
HIGH_EMISSION = 0.97
BIN_WIDTH = 0.01
ORIENTATION_TOL = 1e-6

FAMILY_SYMMETRIC = "symmetric"
FAMILY_FALLING = "asym_s1_gt_s2"
FAMILY_RISING = "asym_s1_lt_s2"
FAMILIES = (FAMILY_SYMMETRIC, FAMILY_FALLING, FAMILY_RISING)


def sigma_grid(lo: float = SIGMA_LO, hi: float = SIGMA_HI, count: int | None = None,
               spacing: str = "log") -> np.ndarray:
    """Widths from ``lo`` to ``hi``; ``count`` defaults to 60 per decade."""
    if not (0 < lo <= hi):
        raise ValueError("need 0 < lo <= hi")
    if spacing == "log":
        if count is None:
            count = int(round(POINTS_PER_DECADE * math.log10(hi / lo))) + 1
        return np.logspace(math.log10(lo), math.log10(hi), max(count, 1))
    if spacing == "linear":
        return np.linspace(lo, hi, max(count or 2, 1))
    raise ValueError(f"unknown spacing {spacing!r}")


@dataclass(frozen=True)
class SweepSettings:
    method: str = "moments"
    rtol: float | None = None
    atol: float | None = None
    grid_points: int | None = None
    threads: int = 1

    def provenance(self) -> dict:
        """Settings as actually used, with defaults filled in."""
        if self.method == "moments":
            rtol, atol = MOMENT_RTOL, MOMENT_ATOL
        else:
            rtol, atol = DEFAULT_RTOL, DEFAULT_ATOL
        return {"method": self.method,
                "rtol": rtol if self.rtol is None else self.rtol,
                "atol": atol if self.atol is None else self.atol,
                "grid_points": self.grid_points}


# --------------------------------------------------------------------------
# worker pool
# --------------------------------------------------------------------------

def _evaluate(task):
    params, policy, settings = task
    t0 = time.perf_counter()
    try:
        ev = evaluate_point(params, policy, method=settings.method, rtol=settings.rtol,
                            atol=settings.atol, grid_points=settings.grid_points)
    except (CavswapError, FloatingPointError) as exc:
        return None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0
    return ev, None, time.perf_counter() - t0


def evaluate_many(params: SystemParams, policies, settings: SweepSettings):
    """Evaluate each policy; returns ``[(evaluation or None, error or None, runtime)]`` in input order."""
    tasks = [(params, pol, settings) for pol in policies]
    if settings.threads <= 1 or len(tasks) < 2:
        out = [_evaluate(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * settings.threads))
        with ProcessPoolExecutor(max_workers=settings.threads) as pool:
            out = list(pool.map(_evaluate, tasks, chunksize=chunk))
    for pol, (_, err, _) in zip(policies, out):
        if err is not None:
            log.warning("point %s failed: %s", pulse_to_dict(pol), err)
    return out


# --------------------------------------------------------------------------
# trade-off curves
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    sigma: float
    p_ex: float
    fidelity: float
    p_pure_ratio: float
    runtime: float
    j_avg: float = math.nan
    bound_value: float = math.nan


@dataclass
class TradeoffCurve:
    config_label: str
    pulse_area: float
    points: list
    orientation: str
    failures: list = field(default_factory=list)
    params: SystemParams | None = None
    settings: SweepSettings | None = None

    @property
    def p_ex(self) -> np.ndarray:
        return np.array([p.p_ex for p in self.points])

    @property
    def fidelity(self) -> np.ndarray:
        return np.array([p.fidelity for p in self.points])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([p.sigma for p in self.points])


def signed_area(xs, ys) -> float:
    """Shoelace area of the closed polygon through the points in order."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def loop_orientation(points) -> str:
    """``"counterclockwise"`` for positive signed area in the (P_ex, F) plane."""
    pts = [(float(p[0]), float(p[1])) for p in points]
    if len(pts) < 3:
        return "undefined"
    area = signed_area([p[0] for p in pts], [p[1] for p in pts])
    if abs(area) < ORIENTATION_TOL:
        return "undefined"
    return "counterclockwise" if area > 0 else "clockwise"


def run_tradeoff_sweep(params: SystemParams, areas=DEFAULT_AREAS, sigma_range=None, *,
                       label: str = "custom", settings: SweepSettings | None = None) -> list:
    """One constant-area curve per ``S`` with ``omega0 = S / sigma``.

    ``sigma_range`` is ``(lo, hi, count, spacing)``; any trailing entries may
    be omitted.
    """
    areas = list(areas)
    if not areas:
        raise ValueError("areas must be non-empty")
    settings = settings or SweepSettings()
    sigmas = sigma_grid(*(sigma_range or ()))
    policies = [SymmetricGaussian.from_area(s_area, s) for s_area in areas for s in sigmas]
    results = evaluate_many(params, policies, settings)
    curves = []
    n = sigmas.size
    for k, area in enumerate(areas):
        points, failures = [], []
        for s, (ev, err, rt) in zip(sigmas, results[k * n:(k + 1) * n]):
            if ev is None:
                failures.append((float(s), err))
                continue
            points.append(CurvePoint(float(s), ev.swap.p_ex_1, ev.swap.fidelity,
                                     ev.p_pure_ratio, rt, float(ev.swap.j_avg.real),
                                     ev.bound.bound_value))
        orient = loop_orientation([(p.p_ex, p.fidelity) for p in points])
        curves.append(TradeoffCurve(label, float(area), points, orient, failures, params, settings))
    return curves


# --------------------------------------------------------------------------
# asymmetric scans and frontiers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanSample:
    sigma1: float
    sigma2: float
    area: float
    p_ex: float
    fidelity: float
    family: str


@dataclass(frozen=True)
class FrontierEntry:
    bin_lo: float
    bin_hi: float
    fidelity: float
    sample: int  # index into ParetoScan.samples


@dataclass
class ParetoScan:
    samples: list
    frontier: dict  # family -> list (one slot per bin, None when empty)
    failures: list = field(default_factory=list)
    params: SystemParams | None = None
    settings: SweepSettings | None = None

    def family_samples(self, family: str) -> list:
        return [s for s in self.samples if s.family == family]


def bin_edges(width: float = BIN_WIDTH) -> np.ndarray:
    n = int(round(1.0 / width))
    return np.linspace(0.0, 1.0, n + 1)


def binned_frontier(samples, family: str | None = None, width: float = BIN_WIDTH) -> list:
    """Per-bin maximum fidelity over ``[0, 1]`` in ``P_ex``.

    Bins are half-open ``[lo, hi)`` except the last, which includes 1.
    """
    edges = bin_edges(width)
    nbins = edges.size - 1
    best = [None] * nbins
    for idx, s in enumerate(samples):
        if family is not None and s.family != family:
            continue
        if not (0.0 <= s.p_ex <= 1.0 + 1e-9):
            continue
        b = min(int(s.p_ex / width), nbins - 1)
        if best[b] is None or s.fidelity > best[b].fidelity:
            best[b] = FrontierEntry(float(edges[b]), float(edges[b + 1]), s.fidelity, idx)
    return best


def pareto_front(p_ex, fidelity) -> np.ndarray:
    """Indices of points not dominated in (higher P_ex, higher F), sorted by P_ex."""
    p = np.asarray(p_ex, dtype=float)
    f = np.asarray(fidelity, dtype=float)
    order = np.lexsort((-f, -p))  # descending P_ex, ties by descending F
    keep = []
    best_f = -np.inf
    for i in order:
        if f[i] > best_f:
            keep.append(i)
            best_f = f[i]
    return np.array(sorted(keep, key=lambda i: p[i]), dtype=int)


def run_asymmetric_scan(params: SystemParams, sigma1_range=(SIGMA_LO, 20.0, 20),
                        ratio_range=(0.01, 1.0, 20), areas=DEFAULT_AREAS, *,
                        symmetric_range=(SIGMA_LO, SIGMA_HI, None),
                        settings: SweepSettings | None = None) -> ParetoScan:
    """Scan falling-edge (``sigma2 = r sigma1``) and rising-edge (swapped) pulses.

    Ranges are ``(lo, hi, count)`` and log-spaced (``count=None`` means 60
    per decade).  The symmetric reference family is sampled separately over
    ``symmetric_range`` so that its frontier is not limited by the coarser
    asymmetric grid.
    """
    settings = settings or SweepSettings()
    s1 = sigma_grid(*sigma1_range[:2], count=sigma1_range[2])
    ratios = sigma_grid(*ratio_range[:2], count=ratio_range[2])
    s_sym = sigma_grid(*symmetric_range[:2], count=symmetric_range[2])
    if s1.size == 0 or ratios.size == 0:
        raise ValueError("scan ranges must be non-empty")
    specs = []
    for area in areas:
        for a in s_sym:
            specs.append((FAMILY_SYMMETRIC, float(area), float(a), float(a)))
        for a in s1:
            for r in ratios:
                specs.append((FAMILY_FALLING, float(area), float(a), float(a * r)))
                specs.append((FAMILY_RISING, float(area), float(a * r), float(a)))
    policies = []
    for fam, area, a, b in specs:
        if fam == FAMILY_SYMMETRIC:
            policies.append(SymmetricGaussian.from_area(area, a))
        else:
            policies.append(AsymmetricGaussian.from_area(area, a, b))
    results = evaluate_many(params, policies, settings)
    samples, failures = [], []
    for (fam, area, a, b), (ev, err, _) in zip(specs, results):
        if ev is None:
            failures.append(((fam, area, a, b), err))
            continue
        samples.append(ScanSample(a, b, area, ev.swap.p_ex_1, ev.swap.fidelity, fam))
    frontier = {fam: binned_frontier(samples, fam) for fam in FAMILIES}
    return ParetoScan(samples, frontier, failures, params, settings)


def frontier_gain(scan: ParetoScan, family: str = FAMILY_FALLING,
                  reference: str = FAMILY_SYMMETRIC) -> list:
    """``(bin_lo, gain, entry)`` for bins where both families have samples."""
    out = []
    for a, b in zip(scan.frontier[family], scan.frontier[reference]):
        if a is not None and b is not None:
            out.append((a.bin_lo, a.fidelity - b.fidelity, a))
    return out


# --------------------------------------------------------------------------
# bound check
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundCheck:
    config_label: str
    cooperativity: float
    reference_fidelity: float
    best_fidelity: float
    best_sigma: float
    best_area: float
    best_p_ex: float
    max_p_ex: float
    threshold: float
    n_points: int
    n_failed: int
    max_bound_violation: float

    @property
    def excess(self) -> float:
        return self.best_fidelity - self.reference_fidelity

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["excess"] = self.excess
        return d


def run_bound_check(params: SystemParams, areas=BOUND_AREAS, sigma_range=None, *,
                    label: str = "custom", threshold: float = HIGH_EMISSION,
                    settings: SweepSettings | None = None, curves=None) -> BoundCheck:
    """Best fidelity among sweep points with ``P_ex > threshold`` vs ``0.5 (1 + C/(C+1))``.

    Also records the largest ``<J> - bound_value`` seen on the sweep.
    """
    if curves is None:
        curves = run_tradeoff_sweep(params, areas, sigma_range, label=label, settings=settings)
    frac_c, _ = cooperativity_fractions(params)
    try:
        c = params.cooperativity()
    except ZeroDivisionError:
        c = math.inf
    best = None
    max_p = 0.0
    n_points = n_failed = 0
    worst = -math.inf
    for curve in curves:
        n_failed += len(curve.failures)
        for p in curve.points:
            n_points += 1
            max_p = max(max_p, p.p_ex)
            if p.p_ex ** 2 >= EMISSION_FLOOR:
                worst = max(worst, p.j_avg - p.bound_value)
            if p.p_ex > threshold and (best is None or p.fidelity > best[0].fidelity):
                best = (p, curve.pulse_area)
    if best is None:
        raise NoHighEmissionPoint(
            f"no sweep point reaches P_ex > {threshold}; largest P_ex was {max_p:.4f}")
    p, area = best
    return BoundCheck(label, c, 0.5 * (1.0 + frac_c), p.fidelity, p.sigma, area, p.p_ex,
                      max_p, threshold, n_points, n_failed, worst)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

CURVE_COLUMNS = ("sigma", "p_ex", "fidelity", "p_pure_ratio")
PROVENANCE_COLUMNS = ("j_avg", "bound_value", "area", "shape", "t_c", "g", "kappa", "gamma_u",
                      "gamma_g", "delta_u", "delta_e", "method", "rtol", "atol", "grid_points")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _area_tag(area: float) -> str:
    return f"{area:g}"


def write_curve_csv(curve: TradeoffCurve, out_dir) -> str:
    """``curve_<label>_S<area>.csv``: the four documented columns, then provenance."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"curve_{curve.config_label}_S{_area_tag(curve.pulse_area)}.csv")
    prm = curve.params.as_dict() if curve.params else {}
    prov = (curve.settings or SweepSettings()).provenance()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS + PROVENANCE_COLUMNS)
        for p in curve.points:
            pulse = SymmetricGaussian.from_area(curve.pulse_area, p.sigma)
            row = [p.sigma, p.p_ex, p.fidelity, p.p_pure_ratio, p.j_avg, p.bound_value,
                   curve.pulse_area, "symmetric", pulse.t_c]
            row += [prm.get(k) for k in ("g", "kappa", "gamma_u", "gamma_g", "delta_u", "delta_e")]
            row += [prov["method"], prov["rtol"], prov["atol"], prov["grid_points"]]
            w.writerow([_fmt(x) for x in row])
    return path


FRONTIER_COLUMNS = ("family", "bin_lo", "bin_hi", "fidelity", "p_ex", "sigma1", "sigma2", "area")


def write_frontier_csv(scan: ParetoScan, out_dir) -> str:
    """One row per non-empty (family, bin), referencing the sample that won it."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "frontier.csv")
    prm = scan.params.as_dict() if scan.params else {}
    prov = (scan.settings or SweepSettings()).provenance()
    extra = ("g", "kappa", "gamma_u", "gamma_g", "delta_u", "delta_e")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FRONTIER_COLUMNS + extra + ("method", "rtol", "atol"))
        for fam in FAMILIES:
            for e in scan.frontier[fam]:
                if e is None:
                    continue
                s = scan.samples[e.sample]
                row = [fam, e.bin_lo, e.bin_hi, e.fidelity, s.p_ex, s.sigma1, s.sigma2, s.area]
                row += [prm.get(k) for k in extra]
                row += [prov["method"], prov["rtol"], prov["atol"]]
                w.writerow([_fmt(x) for x in row])
    return path


def write_bound_report(checks, out_dir, extra: dict | None = None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "bound_report.json")
    payload = {"checks": [c.as_dict() if hasattr(c, "as_dict") else c for c in checks]}
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
    return path
