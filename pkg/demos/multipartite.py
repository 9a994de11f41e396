"""Post-selected Bell, GHZ and W fidelities built from the same lossy source."""
from cavswap import (TABLE1, KernelTable, SymmetricGaussian, averaged_fidelity, evaluate_point,
                     evolve_density, photon_emission_probability, preset_scheme,
                     two_time_correlation)
from cavswap.multipartite import scheme_sources

params = TABLE1["b"]
pulse = SymmetricGaussian.from_area(3.0, 2.0)
traj = evolve_density(params, pulse)
corr = two_time_correlation(params, pulse, traj)
p_ex = photon_emission_probability(traj)
print(f"P_ex = {p_ex:.4f}, bipartite F = {evaluate_point(params, pulse).swap.fidelity:.5f}")

for name in ("bell", "ghz", "w"):
    scheme = preset_scheme(name)
    ids = scheme_sources(scheme)
    # every source is an identical copy; the W scheme also needs the no-jump amplitude
    table = KernelTable.from_correlations({s: (corr, p_ex, params.kappa) for s in ids},
                                          {s: traj.pure_amplitude[:, 1] for s in ids})
    print(f"{name:5s} {len(scheme.terms)} terms  F = {averaged_fidelity(scheme, table):.5f}")
