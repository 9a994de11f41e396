import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavswap import (AsymmetricGaussian, InfiniteCooperativity, SymmetricGaussian, SystemParams,
                     TABLE1, Tabulated, adiabaticity_report, cooperativity,
                     effective_hamiltonian, eval_pulse, pulse_area)
from cavswap.errors import ConfigError
from cavswap.model import params_from_config, pulse_from_config, with_area


def quad_area(policy, lo, hi, n=200001):
    t = np.linspace(lo, hi, n)
    return np.trapezoid(np.real(eval_pulse(policy, t)), t) / math.sqrt(2 * math.pi)


def test_symmetric_pulse_values():
    p = SymmetricGaussian(1.0, 2.0, 0.0)
    assert eval_pulse(p, 0.0) == pytest.approx(1.0)
    assert eval_pulse(p, 2.0) == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_asymmetric_peak_and_continuity():
    p = AsymmetricGaussian(1.0, 4.0, 1.0, 0.0)
    left = eval_pulse(p, -1e-13)
    right = eval_pulse(p, 1e-13)
    assert abs(left - right) < 1e-12
    assert eval_pulse(p, 0.0) == pytest.approx(1.6)


def test_asymmetric_area_by_quadrature():
    # area of the asymmetric pulse equals omega0 * sigma1 for any sigma2
    for s2 in (0.1, 1.0, 2.0, 3.5):
        p = AsymmetricGaussian(1.0, 2.0, s2, 0.0)
        assert pulse_area(p) == pytest.approx(2.0, abs=1e-12)
        assert quad_area(p, -40, 40) == pytest.approx(2.0, abs=1e-8)


def test_symmetric_area():
    assert pulse_area(SymmetricGaussian(1.5, 2.0)) == pytest.approx(3.0, abs=1e-15)
    assert pulse_area(SymmetricGaussian(0.0, 5.0)) == 0.0
    p = SymmetricGaussian(0.7, 3.0, 0.0)
    assert quad_area(p, -60, 60) == pytest.approx(2.1, abs=1e-9)


def test_tabulated_pulse():
    p = Tabulated(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 0.0], dtype=complex))
    assert eval_pulse(p, 0.5) == pytest.approx(1.0)
    assert eval_pulse(p, 3.0) == 0
    assert pulse_area(p) == pytest.approx(2.0 / math.sqrt(2 * math.pi))
    with pytest.raises(ConfigError):
        Tabulated(np.array([0.0, 0.0, 1.0]), np.zeros(3, dtype=complex))


def test_default_center_is_five_widths():
    p = SymmetricGaussian(1.0, 3.0)
    assert p.t_c == pytest.approx(15.0)
    assert abs(eval_pulse(p, 0.0)) / 1.0 < 1e-5
    a = AsymmetricGaussian(1.0, 2.0, 6.0)
    assert a.t_c == pytest.approx(30.0)


def test_bad_widths_rejected():
    with pytest.raises(ConfigError):
        SymmetricGaussian(1.0, 0.0)
    with pytest.raises(ConfigError):
        AsymmetricGaussian(1.0, 1.0, -2.0)


def test_hamiltonian_resonant_no_drive():
    h = effective_hamiltonian(SystemParams(1.0, 1.0, 1.0), None, 0.0)
    expect = np.array([[0, 0, 0], [0, -1j, 1], [0, 1, -1j]])
    np.testing.assert_array_equal(h, expect)
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 2


def test_hamiltonian_at_pulse_peak():
    p = SymmetricGaussian(2.0, 3.0)
    h = effective_hamiltonian(TABLE1["b"], p, p.t_c)
    assert h[0, 2] == pytest.approx(2.0)
    assert h[2, 0] == pytest.approx(2.0)
    assert h[2, 2] == pytest.approx(-1j)
    assert h[1, 2] == pytest.approx(math.sqrt(10))


def test_hamiltonian_detunings_and_gamma_g():
    prm = SystemParams(1.0, 1.0, 1.0, gamma_g=0.25, delta_u=0.5, delta_e=0.3)
    h = effective_hamiltonian(prm, None, 0.0)
    assert h[0, 0] == pytest.approx(0.5)
    assert h[2, 2] == pytest.approx(0.3 - 1.25j)
    assert h[1, 1] == pytest.approx(-1j)
    assert prm.delta_p == pytest.approx(-0.2)
    assert prm.delta_c == pytest.approx(0.3)


def test_cooperativity_table_rows():
    assert cooperativity(TABLE1["b"]) == pytest.approx(10.0)
    assert cooperativity(TABLE1["d"]) == pytest.approx(1.0)
    assert cooperativity(TABLE1["e"]) == pytest.approx(1.0)
    assert cooperativity(TABLE1["a"]) == 1.0
    assert cooperativity(TABLE1["c"]) == pytest.approx(0.1)
    with pytest.raises(InfiniteCooperativity):
        cooperativity(SystemParams(1.0, 1.0, 0.0))


@settings(max_examples=50, deadline=None)
@given(g=st.floats(0.01, 10), k=st.floats(0.01, 30), gu=st.floats(0.01, 5), s=st.floats(0.01, 100))
def test_cooperativity_scale_invariant(g, k, gu, s):
    c1 = cooperativity(SystemParams(g, k, gu))
    c2 = cooperativity(SystemParams(s * g, s * k, s * gu))
    assert c2 == pytest.approx(c1, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(s1=st.floats(0.05, 20), s2=st.floats(0.05, 20), om=st.floats(0.01, 5))
def test_asymmetric_continuous_everywhere(s1, s2, om):
    p = AsymmetricGaussian(om, s1, s2, 0.0)
    eps = 1e-14
    assert abs(eval_pulse(p, -eps) - eval_pulse(p, eps)) < 1e-12
    assert pulse_area(p) == pytest.approx(om * s1, rel=1e-14)


def test_adiabaticity_report():
    prm = TABLE1["a"]
    flat = Tabulated(np.array([0.0, 100.0]), np.array([3.0, 3.0], dtype=complex))
    grid = np.linspace(1.0, 99.0, 50)
    rep = adiabaticity_report(prm, flat, grid)
    assert rep.adiabatic_ratio == 0.0
    assert rep.transfer_ratio == pytest.approx(1 / 3)
    assert rep.transfer_ok
    assert rep.coupling_ratio == pytest.approx(1.0)
    assert not rep.coupling_ok
    with pytest.raises(ValueError):
        adiabaticity_report(prm, flat, [])


def test_adiabaticity_slow_pulse_is_adiabatic():
    prm = TABLE1["b"]
    slow = SymmetricGaussian.from_area(20.0, 40.0)
    fast = SymmetricGaussian.from_area(3.0, 0.05)
    grid = np.linspace(0, 400, 4001)
    assert adiabaticity_report(prm, slow, grid).adiabatic_ok
    assert not adiabaticity_report(prm, fast, np.linspace(0, 0.5, 4001)).adiabatic_ok


def test_config_parsing():
    prm = params_from_config({"preset": "b", "gamma_g": 0.1})
    assert prm.g == pytest.approx(math.sqrt(10)) and prm.gamma_g == 0.1
    with pytest.raises(ConfigError):
        params_from_config({"preset": "z"})
    with pytest.raises(ConfigError):
        params_from_config({"g": 1.0})
    with pytest.raises(ConfigError):
        params_from_config({"g": -1.0, "kappa": 1, "gamma_u": 1})
    p = pulse_from_config({"shape": "symmetric", "area": 3.0, "sigma": 10.0})
    assert p.omega0 == pytest.approx(0.3)
    a = pulse_from_config({"shape": "asymmetric", "area": 2.0, "sigma1": 4.0, "sigma2": 1.0})
    assert pulse_area(a) == pytest.approx(2.0)
    with pytest.raises(ConfigError):
        pulse_from_config({"shape": "square"})
    with pytest.raises(ConfigError):
        pulse_from_config({"shape": "symmetric", "area": 1.0})


def test_with_area():
    p = with_area(SymmetricGaussian(1.0, 4.0), 2.0)
    assert pulse_area(p) == pytest.approx(2.0)
    q = with_area(AsymmetricGaussian(1.0, 4.0, 1.0), 0.5)
    assert pulse_area(q) == pytest.approx(0.5)
