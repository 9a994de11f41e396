import math
import warnings

import numpy as np
import pytest

from cavswap import (ConfigError, KernelTable, PostSelectedScheme, PostSelectionImpossible,
                     SymmetricGaussian, SystemParams, WaveformTable, averaged_fidelity,
                     bell_fidelity, build_network_scheme, correlation_J, evolve_density,
                     overlap_matrix, photon_emission_probability, preset_scheme,
                     surviving_terms, two_time_correlation)
from cavswap.multipartite import (R2, SourceSpec, Term, bell_network, bell_sources, dft_network,
                                  ghz_network, raw_expansion_size, scheme_sources,
                                  w_scheme)
from oracles import permanent, w_state_bin_fidelity


def gaussian(grid, t0, width, phase=0.0):
    return np.exp(-((grid - t0) ** 2) / (2 * width ** 2) + 1j * phase * grid)


def test_bell_raw_expansion():
    u, _ = bell_network()
    count, total = raw_expansion_size(bell_sources(), u)
    assert count == 16
    assert total == pytest.approx(1.0)
    with pytest.warns(RuntimeWarning):
        scheme = build_network_scheme(bell_sources(), u, [4, 5])
    assert len(scheme.terms) == 12
    assert scheme.norm_squared == pytest.approx(0.75)
    assert all(abs(abs(t.amplitude) - 0.25) < 1e-15 for t in scheme.terms)


def test_bell_survivors():
    scheme = preset_scheme("bell")
    keep = surviving_terms(scheme)
    assert sorted(scheme.terms[k].atoms for k in keep) == [(0, 1), (1, 0)]
    i = overlap_matrix(scheme)
    np.testing.assert_allclose(i, np.eye(2) / 16)
    for k in keep:
        assert scheme.terms[k].amplitude == pytest.approx(-0.25)


def test_bell_fidelity_limits():
    scheme = preset_scheme("bell")
    grid = np.linspace(0, 40, 801)
    same = WaveformTable(grid, {"s0": gaussian(grid, 20, 2), "s1": gaussian(grid, 20, 2)})
    assert averaged_fidelity(scheme, same) == pytest.approx(1.0, abs=1e-12)
    apart = WaveformTable(grid, {"s0": gaussian(grid, 8, 1), "s1": gaussian(grid, 32, 1)})
    assert averaged_fidelity(scheme, apart) == pytest.approx(0.5, abs=1e-12)
    partial = WaveformTable(grid, {"s0": gaussian(grid, 18, 2), "s1": gaussian(grid, 21, 3, 0.2)})
    j = abs(partial.braket("s0", "s1")) ** 2
    assert averaged_fidelity(scheme, partial) == pytest.approx(bell_fidelity(j), abs=1e-12)
    kern = KernelTable.from_waveforms(partial)
    assert averaged_fidelity(scheme, kern) == pytest.approx(bell_fidelity(j), abs=1e-12)


def test_post_selection_impossible():
    u, names = bell_network()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        scheme = build_network_scheme(bell_sources(), u, ["3H"], names)
    with pytest.raises(PostSelectionImpossible):
        surviving_terms(scheme)
    with pytest.raises(PostSelectionImpossible):
        averaged_fidelity(scheme, WaveformTable(np.arange(3.0), {"s0": np.ones(3)}))


def test_identity_network_single_source():
    src = [SourceSpec("a", ((R2, 0, 0), (R2, 1, 1)))]
    scheme = build_network_scheme(src, np.eye(2), [0])
    assert len(surviving_terms(scheme)) == 1
    table = WaveformTable(np.linspace(0, 1, 11), {"a": np.ones(11)})
    assert averaged_fidelity(scheme, table) == pytest.approx(1.0)


def test_network_validation():
    bad = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ConfigError):
        build_network_scheme([SourceSpec("a", ((1.0, 0, 0),))], bad, [0])
    with pytest.raises(ConfigError):
        build_network_scheme([SourceSpec("a", ((1.0, 0, 0),))], np.eye(9), [0])
    with pytest.raises(ConfigError):
        preset_scheme("cluster")


def test_scheme_validation_and_roundtrip(tmp_path):
    t = Term(0.8 + 0j, (1, 0), (0,), ("a", None))
    with pytest.raises(ConfigError):
        PostSelectedScheme(2, (t, Term(0.8 + 0j, (0, 1), (1,), (None, "a"))), (0,))
    with pytest.raises(ConfigError):
        PostSelectedScheme(2, (Term(0.5, (1, 0), (0,), (None, None)),), (0,))
    with pytest.raises(ConfigError):
        PostSelectedScheme(2, (Term(0.5, (2, 0), (0,), ("a", None)),), (0,))
    with pytest.raises(ConfigError):
        PostSelectedScheme.from_dict({"n_modes": 2})
    for name in ("bell", "ghz", "w"):
        scheme = preset_scheme(name)
        path = tmp_path / f"{name}.json"
        scheme.save(path)
        back = PostSelectedScheme.load(path)
        assert back == scheme


def test_overlap_matrix_patterns():
    same = PostSelectedScheme(1, (Term(R2, (1,), (0, 1), ("a",)), Term(R2, (1,), (0, 1), ("b",))), (0,))
    np.testing.assert_allclose(overlap_matrix(same), np.full((2, 2), 0.5))
    diff = PostSelectedScheme(1, (Term(R2, (1,), (0, 1), ("a",)), Term(R2, (1,), (1, 0), ("b",))), (0,))
    np.testing.assert_allclose(overlap_matrix(diff), np.eye(2) * 0.5)


def random_table(rng, ids, n=200):
    grid = np.linspace(0, 20, n)
    wf = {k: gaussian(grid, rng.uniform(6, 14), rng.uniform(0.5, 3), rng.uniform(-1, 1))
          + 0.3 * rng.normal(size=n) * np.exp(-((grid - 10) ** 2) / 20) for k in ids}
    return WaveformTable(grid, wf)


@pytest.mark.parametrize("name", ["bell", "ghz", "w"])
def test_gram_sufficiency(name):
    rng = np.random.default_rng(3)
    scheme = preset_scheme(name)
    ids = scheme_sources(scheme)
    table = random_table(rng, ids)
    twin = WaveformTable.from_gram(ids, table.overlaps)
    np.testing.assert_allclose(twin.overlaps, table.overlaps, atol=1e-12)
    assert abs(averaged_fidelity(scheme, table) - averaged_fidelity(scheme, twin)) < 1e-10


@pytest.mark.parametrize("name", ["bell", "ghz", "w"])
def test_common_unitary_invariance(name):
    rng = np.random.default_rng(5)
    scheme = preset_scheme(name)
    ids = scheme_sources(scheme)
    table = random_table(rng, ids, n=60)
    w = np.sqrt(table.weights)
    m = rng.normal(size=(60, 60)) + 1j * rng.normal(size=(60, 60))
    q, _ = np.linalg.qr(m)
    rotated = {k: (q @ (w * table.data[i])) / w for i, k in enumerate(ids)}
    other = WaveformTable(table.grid, rotated, normalize=False)
    assert abs(averaged_fidelity(scheme, table) - averaged_fidelity(scheme, other)) < 1e-10


class ScaledKernels(KernelTable):
    """Kernel table whose mixed-source cycle traces are multiplied by ``s``."""

    def __init__(self, base, s):
        super().__init__(base.grid, base.kernels)
        self.s = s

    def cycle_trace(self, sources):
        val = super().cycle_trace(sources)
        return val * self.s if len(set(sources)) > 1 else val


def test_bell_affine_in_cross_scaling():
    rng = np.random.default_rng(11)
    base = KernelTable.from_waveforms(random_table(rng, ["s0", "s1"]))
    scheme = preset_scheme("bell")
    ss = np.linspace(0, 1, 6)
    fs = np.array([averaged_fidelity(scheme, ScaledKernels(base, s)) for s in ss])
    coef = np.polyfit(ss, fs, 1)
    assert np.max(np.abs(np.polyval(coef, ss) - fs)) < 1e-12
    assert fs[0] == pytest.approx(0.5)


def test_ghz_survivors_match_permanents():
    scheme = preset_scheme("ghz")
    u, _ = ghz_network(3)
    keep = surviving_terms(scheme)
    atoms = {scheme.terms[k].atoms for k in keep}
    assert atoms == {(0, 0, 0), (1, 1, 1)}
    clicks = list(scheme.detected_modes)
    for pattern in atoms:
        ins = [2 * k + b for k, b in enumerate(pattern)]
        expect = R2 ** 3 * permanent(u[np.ix_(clicks, ins)])
        got = sum(scheme.terms[k].amplitude for k in keep if scheme.terms[k].atoms == pattern)
        assert got == pytest.approx(expect, abs=1e-14)
    # every pattern with mixed atoms cancels or fails post-selection
    for k in range(len(scheme.terms)):
        t = scheme.terms[k]
        if set(t.atoms) == {0, 1}:
            assert k not in keep


def test_ghz_fidelity():
    scheme = preset_scheme("ghz")
    grid = np.linspace(0, 30, 601)
    same = WaveformTable(grid, {s: gaussian(grid, 15, 2) for s in ("s0", "s1", "s2")})
    assert averaged_fidelity(scheme, same) == pytest.approx(1.0, abs=1e-12)
    mixed = WaveformTable(grid, {"s0": gaussian(grid, 14, 2), "s1": gaussian(grid, 15, 2),
                                 "s2": gaussian(grid, 16, 2.5)})
    f_wave = averaged_fidelity(scheme, mixed)
    f_kern = averaged_fidelity(scheme, KernelTable.from_waveforms(mixed))
    assert 0.5 < f_wave < 1.0
    assert f_kern == pytest.approx(f_wave, abs=1e-12)


def bin_table(amps):
    # zero padding makes the trapezoid weights exactly one on every bin
    nb = len(amps[0])
    grid = np.arange(nb + 2, dtype=float)
    return WaveformTable(grid, {f"s{k}": np.concatenate([[0], a, [0]]) for k, a in enumerate(amps)})


@pytest.mark.parametrize("shift,chirp", [(0, 0.0), (0, 0.3), (2, 0.0), (12, 0.3)])
def test_w_state_against_bin_oracle(shift, chirp):
    t = np.arange(24, dtype=float)
    amps = [np.exp(-((t - 6) ** 2) / 4), np.exp(-((t - 6) ** 2) / 4),
            np.exp(-((t - 6 - shift) ** 2) / 4) * np.exp(1j * chirp * t)]
    scheme = w_scheme(3)
    fid = averaged_fidelity(scheme, bin_table(amps))
    ref = w_state_bin_fidelity(amps, dft_network(3), 0, R2)
    assert fid == pytest.approx(ref, abs=1e-8)
    if shift == 0 and chirp == 0:
        assert fid == pytest.approx(1.0, abs=1e-10)


def test_w_state_orthogonal_source():
    t = np.arange(40, dtype=float)
    amps = [np.exp(-((t - 8) ** 2)), np.exp(-((t - 8) ** 2)), np.exp(-((t - 30) ** 2))]
    assert averaged_fidelity(w_scheme(3), bin_table(amps)) == pytest.approx(5 / 9, abs=1e-10)


@pytest.mark.parametrize("shift,chirp", [(0, 0.0), (2, 0.0), (12, 0.3)])
def test_w_state_kernels_match_waveforms(shift, chirp):
    t = np.arange(24, dtype=float)
    amps = [np.exp(-((t - 6) ** 2) / 4), np.exp(-((t - 7) ** 2) / 5),
            np.exp(-((t - 6 - shift) ** 2) / 4) * np.exp(1j * chirp * t)]
    table = bin_table(amps)
    scheme = w_scheme(3)
    assert averaged_fidelity(scheme, KernelTable.from_waveforms(table)) == pytest.approx(
        averaged_fidelity(scheme, table), abs=1e-10)


def test_w_state_from_pure_correlations():
    # gamma_u = 0: kernels plus no-jump amplitudes reproduce the waveform result
    grid = np.linspace(0, 60, 500)
    prm = [SystemParams(2.0, 1.0, 0.0), SystemParams(1.5, 1.2, 0.0), SystemParams(2.0, 0.8, 0.0)]
    pol = [SymmetricGaussian.from_area(3.0, 2.0, t_c=20), SymmetricGaussian.from_area(2.0, 3.0, t_c=22),
           SymmetricGaussian.from_area(3.0, 2.5, t_c=21)]
    items, amps, waves = {}, {}, {}
    for k, (p, q) in enumerate(zip(prm, pol)):
        traj = evolve_density(p, q, grid)
        corr = two_time_correlation(p, q, traj)
        items[f"s{k}"] = (corr, photon_emission_probability(traj), p.kappa)
        amps[f"s{k}"] = traj.pure_amplitude[:, 1]
        waves[f"s{k}"] = traj.pure_amplitude[:, 1]
    scheme = w_scheme(3)
    kern = averaged_fidelity(scheme, KernelTable.from_correlations(items, amps))
    ref = averaged_fidelity(scheme, WaveformTable(grid, waves))
    assert kern == pytest.approx(ref, abs=1e-6)
    assert 0.5 < kern < 1.0
    with pytest.raises(ValueError):
        averaged_fidelity(scheme, KernelTable.from_correlations(items))


def test_w_state_lossy_sources_lose_fidelity():
    grid = np.linspace(0, 80, 500)
    pol = SymmetricGaussian.from_area(3.0, 2.0, t_c=20)
    out = []
    for gu in (0.0, 1.0):
        prm = SystemParams(2.0, 1.0, gu)
        traj = evolve_density(prm, pol, grid)
        corr = two_time_correlation(prm, pol, traj)
        item = (corr, photon_emission_probability(traj), prm.kappa)
        table = KernelTable.from_correlations({f"s{k}": item for k in range(3)},
                                              {f"s{k}": traj.pure_amplitude[:, 1] for k in range(3)})
        out.append(averaged_fidelity(w_scheme(3), table))
    assert out[0] == pytest.approx(1.0, abs=1e-6)
    assert out[1] < out[0]


def test_kernel_table_checks():
    grid = np.linspace(0, 1, 4)
    k = KernelTable(grid, {"a": np.eye(4), "b": np.eye(4)})
    with pytest.raises(ValueError):
        k.product({0: "a", 1: "a"}, {0: "a", 1: "b"})


def _source_corr(prm, pol, grid):
    traj = evolve_density(prm, pol, grid)
    return two_time_correlation(prm, pol, traj), photon_emission_probability(traj)


def test_bell_reduces_to_bipartite_pipeline():
    rng = np.random.default_rng(21)
    grid = np.linspace(0, 90, 700)
    scheme = preset_scheme("bell")
    for _ in range(3):
        p1 = SystemParams(rng.uniform(0.5, 3), rng.uniform(0.5, 3), rng.uniform(0.2, 2))
        p2 = SystemParams(rng.uniform(0.5, 3), rng.uniform(0.5, 3), rng.uniform(0.2, 2))
        q1 = SymmetricGaussian.from_area(rng.uniform(1, 4), rng.uniform(1, 5), t_c=30)
        q2 = SymmetricGaussian.from_area(rng.uniform(1, 4), rng.uniform(1, 5), t_c=32)
        c1, e1 = _source_corr(p1, q1, grid)
        c2, e2 = _source_corr(p2, q2, grid)
        table = KernelTable.from_correlations({"s0": (c1, e1, p1.kappa), "s1": (c2, e2, p2.kappa)})
        f = averaged_fidelity(scheme, table)
        ref = bell_fidelity(correlation_J(c1, c2, e1, e2, p1, p2))
        assert abs(f - ref) < 1e-8


def test_kernel_tables_need_shared_grid():
    prm = SystemParams(1.0, 1.0, 1.0)
    pol = SymmetricGaussian.from_area(2.0, 2.0)
    c1, e1 = _source_corr(prm, pol, np.linspace(0, 40, 50))
    c2, e2 = _source_corr(prm, pol, np.linspace(0, 41, 50))
    with pytest.raises(ValueError):
        KernelTable.from_correlations({"a": (c1, e1, 1.0), "b": (c2, e2, 1.0)})


def test_pure_kernels_equal_waveform_products():
    # a pure source's kernel is the rank-one product of its normalised waveform
    prm = SystemParams(2.0, 1.0, 0.0)
    pol = SymmetricGaussian.from_area(3.0, 2.0)
    grid = np.linspace(0, 60, 400)
    traj = evolve_density(prm, pol, grid)
    corr = two_time_correlation(prm, pol, traj)
    p = photon_emission_probability(traj)
    kern = KernelTable.from_correlations({"a": (corr, p, prm.kappa)})
    wave = WaveformTable(grid, {"a": traj.pure_amplitude[:, 1]})
    ref = KernelTable.from_waveforms(wave)
    assert abs(kern.cycle_trace(("a",)) - 1.0) < 1e-8
    assert abs(kern.cycle_trace(("a", "a")) - ref.cycle_trace(("a", "a"))) < 1e-6
    assert math.isclose(ref.cycle_trace(("a",)).real, 1.0, abs_tol=1e-12)
