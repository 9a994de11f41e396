"""One source, one pulse: emission, purity and swap fidelity.

Row (a) parameters, a sigma = 10 pulse of area 3.  Compares the grid route
(full correlation matrix) with the grid-free accumulator route.
"""
import time

import numpy as np

from cavswap import (TABLE1, SymmetricGaussian, evaluate_point, evolve_density,
                     photon_emission_probability, pure_photon_probability, two_time_correlation)

params = TABLE1["a"]
pulse = SymmetricGaussian.from_area(3.0, 10.0)
print("C =", params.cooperativity())

traj = evolve_density(params, pulse)
p_ex = photon_emission_probability(traj)
p0 = pure_photon_probability(params, pulse, traj=traj)
print(f"grid: {traj.grid.size} points up to t = {traj.grid[-1]:.1f}")
print(f"P_ex = {p_ex:.6f}   P0 = {p0:.6f}   P0/P_ex = {p0 / p_ex:.4f}")

corr = two_time_correlation(params, pulse, traj)
print("G hermitian:", np.array_equal(corr.values, corr.values.conj().T))

for method in ("grid", "moments"):
    t0 = time.perf_counter()
    ev = evaluate_point(params, pulse, method=method)
    dt = time.perf_counter() - t0
    print(f"{method:8s} <J> = {ev.swap.j_avg.real:.6f}  F = {ev.swap.fidelity:.6f}  "
          f"bound = {ev.bound.bound_value:.6f}  ({dt:.2f} s)")
