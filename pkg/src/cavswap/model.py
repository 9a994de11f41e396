"""Atom-cavity parameters, pump pulse shapes and the effective Hamiltonian.

The reduced model lives on the single-excitation basis
``{|u0>, |g1>, |e0>, |g0>}``; only the upper-left 3x3 block of the effective
Hamiltonian is non-trivial, so that is what :func:`effective_hamiltonian`
returns.  Rates and times are in units of ``gamma_u`` unless a config says
otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Mapping, Union

import numpy as np

from .errors import ConfigError, InfiniteCooperativity

SQRT_2PI = math.sqrt(2.0 * math.pi)

# basis indices of the reduced density matrix
U0, G1, E0, G0 = 0, 1, 2, 3


@dataclass(frozen=True)
class SystemParams:
    g: float
    kappa: float
    gamma_u: float
    gamma_g: float = 0.0
    delta_u: float = 0.0
    delta_e: float = 0.0
    unit: str = "gamma_u"

    def __post_init__(self):
        for name in ("g", "kappa", "gamma_u", "gamma_g"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be finite and non-negative, got {value!r}")
        for name in ("delta_u", "delta_e"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    @property
    def delta_p(self) -> float:
        """Pump detuning, ``delta_e - delta_u``."""
        return self.delta_e - self.delta_u

    @property
    def delta_c(self) -> float:
        """Cavity detuning, equal to ``delta_e``."""
        return self.delta_e

    def cooperativity(self) -> float:
        return cooperativity(self)

    def as_dict(self) -> dict:
        return {
            "g": self.g, "kappa": self.kappa, "gamma_u": self.gamma_u,
            "gamma_g": self.gamma_g, "delta_u": self.delta_u,
            "delta_e": self.delta_e, "unit": self.unit,
        }

    def slowest_decay_rate(self) -> float:
        """Smallest population decay rate of the undriven {|g1>, |e0>} block.

        Sets the emission tail length once the pump has switched off.
        """
        h = effective_hamiltonian(self, None, 0.0)[1:, 1:]
        rates = -2.0 * np.linalg.eigvals(h).imag
        rate = float(rates.min())
        if rate <= 0.0:
            raise ConfigError("undriven system has no decay channel (kappa = 0?)")
        return rate


TABLE1 = {
    "a": SystemParams(g=1.0, kappa=1.0, gamma_u=1.0),
    "b": SystemParams(g=math.sqrt(10.0), kappa=1.0, gamma_u=1.0),
    "c": SystemParams(g=1.0 / math.sqrt(10.0), kappa=1.0, gamma_u=1.0),
    "d": SystemParams(g=5.0, kappa=25.0, gamma_u=1.0),
    "e": SystemParams(g=0.2, kappa=0.04, gamma_u=1.0),
}
TABLE1_NAMES = {
    "a": "intermediate", "b": "strong", "c": "weak", "d": "purcell", "e": "lossy-atom",
}


# --------------------------------------------------------------------------
# pulses
# --------------------------------------------------------------------------

def _check_width(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class SymmetricGaussian:
    """``omega0 * exp(-(t - t_c)^2 / (2 sigma^2))``.

    ``t_c`` defaults to ``5 * sigma`` so the pulse is negligible at t = 0.
    """

    omega0: float
    sigma: float
    t_c: float | None = None

    def __post_init__(self):
        _check_width("sigma", self.sigma)
        if self.t_c is None:
            object.__setattr__(self, "t_c", 5.0 * self.sigma)

    @classmethod
    def from_area(cls, area: float, sigma: float, t_c: float | None = None):
        return cls(omega0=area / sigma, sigma=sigma, t_c=t_c)

    @property
    def width(self) -> float:
        return self.sigma

    @property
    def fall_width(self) -> float:
        return self.sigma

    @property
    def peak(self) -> float:
        return abs(self.omega0)


@dataclass(frozen=True)
class AsymmetricGaussian:
    """Gaussian with rising width ``sigma1`` and falling width ``sigma2``.

    The amplitude ``2 omega0 / (1 + sqrt(r))`` with ``sqrt(r) = sigma2 / sigma1``
    keeps the pulse area equal to ``omega0 * sigma1``.
    """

    omega0: float
    sigma1: float
    sigma2: float
    t_c: float | None = None

    def __post_init__(self):
        _check_width("sigma1", self.sigma1)
        _check_width("sigma2", self.sigma2)
        if self.t_c is None:
            object.__setattr__(self, "t_c", 5.0 * max(self.sigma1, self.sigma2))

    @classmethod
    def from_area(cls, area: float, sigma1: float, sigma2: float, t_c: float | None = None):
        return cls(omega0=area / sigma1, sigma1=sigma1, sigma2=sigma2, t_c=t_c)

    @property
    def sqrt_r(self) -> float:
        return self.sigma2 / self.sigma1

    @property
    def amplitude(self) -> float:
        return 2.0 * self.omega0 / (1.0 + self.sqrt_r)

    @property
    def width(self) -> float:
        return max(self.sigma1, self.sigma2)

    @property
    def fall_width(self) -> float:
        return self.sigma2

    @property
    def peak(self) -> float:
        return abs(self.amplitude)


@dataclass(frozen=True)
class Tabulated:
    """Linearly interpolated samples; zero outside the sampled range."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if times.ndim != 1 or times.shape != values.shape or times.size < 2:
            raise ConfigError("tabulated pulse needs matching 1-D times/values with >= 2 samples")
        if not np.all(np.diff(times) > 0):
            raise ConfigError("tabulated pulse times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        return cls(np.array([s[0] for s in samples], dtype=float),
                   np.array([s[1] for s in samples], dtype=complex))

    @property
    def t_c(self) -> float:
        return float(self.times[np.argmax(np.abs(self.values))])

    @property
    def width(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def fall_width(self) -> float:
        return 0.0

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __eq__(self, other):
        return (isinstance(other, Tabulated) and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.times.tobytes(), self.values.tobytes()))


PulsePolicy = Union[SymmetricGaussian, AsymmetricGaussian, Tabulated]


def eval_pulse(policy: PulsePolicy, t):
    """Rabi frequency ``Omega(t)``; accepts scalars or arrays."""
    t_arr = np.asarray(t, dtype=float)
    if isinstance(policy, Tabulated):
        re = np.interp(t_arr, policy.times, policy.values.real, left=0.0, right=0.0)
        im = np.interp(t_arr, policy.times, policy.values.imag, left=0.0, right=0.0)
        out = re + 1j * im
    elif isinstance(policy, SymmetricGaussian):
        out = policy.omega0 * np.exp(-(t_arr - policy.t_c) ** 2 / (2.0 * policy.sigma ** 2)) + 0j
    elif isinstance(policy, AsymmetricGaussian):
        width = np.where(t_arr <= policy.t_c, policy.sigma1, policy.sigma2)
        out = policy.amplitude * np.exp(-(t_arr - policy.t_c) ** 2 / (2.0 * width ** 2)) + 0j
    else:
        raise TypeError(f"unknown pulse policy {type(policy).__name__}")
    return complex(out) if out.ndim == 0 else out


def pulse_derivative(policy: PulsePolicy, t):
    """Time derivative of ``Omega(t)`` (piecewise-constant slope for tables)."""
    t_arr = np.asarray(t, dtype=float)
    if isinstance(policy, Tabulated):
        slopes = np.diff(policy.values) / np.diff(policy.times)
        idx = np.searchsorted(policy.times, t_arr, side="right") - 1
        inside = (idx >= 0) & (idx < slopes.size)
        out = np.where(inside, slopes[np.clip(idx, 0, slopes.size - 1)], 0.0)
    else:
        if isinstance(policy, SymmetricGaussian):
            width = np.full_like(t_arr, policy.sigma)
        else:
            width = np.where(t_arr <= policy.t_c, policy.sigma1, policy.sigma2)
        out = -(t_arr - policy.t_c) / width ** 2 * eval_pulse(policy, t_arr)
    out = np.asarray(out, dtype=complex)
    return complex(out) if out.ndim == 0 else out


def pulse_area(policy: PulsePolicy):
    """``S = (1/sqrt(2 pi)) * integral of Omega(t) dt``."""
    if isinstance(policy, SymmetricGaussian):
        return policy.omega0 * policy.sigma
    if isinstance(policy, AsymmetricGaussian):
        # each half-Gaussian contributes amplitude * sigma_i / 2
        return policy.amplitude * (policy.sigma1 + policy.sigma2) / 2.0
    if isinstance(policy, Tabulated):
        area = np.trapezoid(policy.values, policy.times) / SQRT_2PI
        return float(area.real) if area.imag == 0 else complex(area)
    raise TypeError(f"unknown pulse policy {type(policy).__name__}")


def pulse_arrays(policy: PulsePolicy):
    """Flatten a policy into the arrays consumed by the compiled kernels.

    Returns ``(prm, tab_t, tab_v)``; ``prm = [kind, amplitude, sigma1,
    sigma2, t_c]`` with kind 0 for Gaussians and 1 for tables.
    """
    if isinstance(policy, Tabulated):
        return (np.array([1.0, 0.0, 1.0, 1.0, 0.0]),
                np.ascontiguousarray(policy.times), np.ascontiguousarray(policy.values))
    if isinstance(policy, SymmetricGaussian):
        prm = [0.0, policy.omega0, policy.sigma, policy.sigma, policy.t_c]
    elif isinstance(policy, AsymmetricGaussian):
        prm = [0.0, policy.amplitude, policy.sigma1, policy.sigma2, policy.t_c]
    else:
        raise TypeError(f"unknown pulse policy {type(policy).__name__}")
    return np.array(prm, dtype=float), np.zeros(1), np.zeros(1, dtype=complex)


def pulse_support_end(policy: PulsePolicy, rel: float = 1e-6) -> float:
    """Earliest time after which ``|Omega| < rel * peak`` for good."""
    if isinstance(policy, Tabulated):
        mags = np.abs(policy.values)
        above = np.nonzero(mags >= rel * mags.max())[0]
        return float(policy.times[min(above[-1] + 1, policy.times.size - 1)])
    return policy.t_c + policy.fall_width * math.sqrt(2.0 * math.log(1.0 / rel))


def pulse_to_dict(policy: PulsePolicy) -> dict:
    if isinstance(policy, SymmetricGaussian):
        return {"shape": "symmetric", "omega0": policy.omega0, "sigma": policy.sigma,
                "t_c": policy.t_c, "area": pulse_area(policy)}
    if isinstance(policy, AsymmetricGaussian):
        return {"shape": "asymmetric", "omega0": policy.omega0, "sigma1": policy.sigma1,
                "sigma2": policy.sigma2, "t_c": policy.t_c, "area": pulse_area(policy)}
    return {"shape": "tabulated",
            "samples": [[float(t), float(v.real), float(v.imag)]
                        for t, v in zip(policy.times, policy.values)]}


# --------------------------------------------------------------------------
# Hamiltonian and derived quantities
# --------------------------------------------------------------------------

def effective_hamiltonian(params: SystemParams, policy: PulsePolicy | None, t: float) -> np.ndarray:
    """Non-Hermitian 3x3 block on ``{|u0>, |g1>, |e0>}`` at time ``t``."""
    omega = 0j if policy is None else complex(eval_pulse(policy, t))
    return np.array([
        [params.delta_u, 0.0, omega],
        [0.0, -1j * params.kappa, params.g],
        [np.conj(omega), params.g, params.delta_e - 1j * (params.gamma_u + params.gamma_g)],
    ], dtype=complex)


def cooperativity(params: SystemParams) -> float:
    """``C = g^2 / (kappa * gamma_u)``.

    Raises :class:`InfiniteCooperativity` when the denominator vanishes.
    """
    denom = params.kappa * params.gamma_u
    if denom == 0.0:
        raise InfiniteCooperativity("cooperativity is infinite for gamma_u == 0 or kappa == 0")
    return params.g ** 2 / denom


def cooperativity_fractions(params: SystemParams) -> tuple[float, float]:
    """``(C/(C+1), 1/(C+1))`` with the infinite-C limit handled."""
    try:
        c = cooperativity(params)
    except InfiniteCooperativity:
        return 1.0, 0.0
    return c / (c + 1.0), 1.0 / (c + 1.0)


@dataclass(frozen=True)
class AdiabaticityReport:
    adiabatic_ratio: float
    transfer_ratio: float
    coupling_ratio: float

    @property
    def adiabatic_ok(self) -> bool:
        return self.adiabatic_ratio < 1.0

    @property
    def transfer_ok(self) -> bool:
        return self.transfer_ratio < 1.0

    @property
    def coupling_ok(self) -> bool:
        return self.coupling_ratio < 1.0

    def as_dict(self) -> dict:
        return {
            "adiabatic_ratio": self.adiabatic_ratio, "adiabatic_ok": self.adiabatic_ok,
            "transfer_ratio": self.transfer_ratio, "transfer_ok": self.transfer_ok,
            "coupling_ratio": self.coupling_ratio, "coupling_ok": self.coupling_ok,
        }


def adiabaticity_report(params: SystemParams, policy: PulsePolicy, grid) -> AdiabaticityReport:
    """Evaluate the three vSTIRAP conditions as ratios (satisfied when < 1).

    * adiabatic: max over the grid of ``|2 g dOmega/dt / (Omega^2 + g^2)|``
      divided by the smaller root ``|Delta +- sqrt(g^2 + Omega^2 + Delta^2)| / 2``
      with ``Delta = delta_e``;
    * transfer: ``g / max |Omega|``;
    * coupling: ``max(kappa, gamma_u) / g``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    g = params.g
    delta = params.delta_e
    omega = np.abs(eval_pulse(policy, grid))
    domega = np.abs(pulse_derivative(policy, grid))
    lhs = np.zeros_like(omega)
    denom = omega ** 2 + g ** 2
    np.divide(np.abs(2.0 * g * domega), denom, out=lhs, where=denom > 0)
    root = np.sqrt(g ** 2 + omega ** 2 + delta ** 2)
    rhs = 0.5 * np.minimum(np.abs(delta + root), np.abs(delta - root))
    ratio = np.where(lhs == 0.0, 0.0, lhs / np.where(rhs > 0, rhs, np.inf))
    ratio = np.where((lhs > 0) & (rhs == 0), np.inf, ratio)
    peak = omega.max()
    transfer = g / peak if peak > 0 else math.inf
    coupling = max(params.kappa, params.gamma_u) / g if g > 0 else math.inf
    return AdiabaticityReport(float(ratio.max()), float(transfer), float(coupling))


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

_PARAM_KEYS = ("g", "kappa", "gamma_u", "gamma_g", "delta_u", "delta_e")


def params_from_config(cfg: Mapping[str, Any]) -> SystemParams:
    """Build :class:`SystemParams` from a config mapping.

    ``{"preset": "a"}`` selects a Table-1 row; explicit keys override it.
    """
    base = {}
    preset = cfg.get("preset")
    if preset is not None:
        if preset not in TABLE1:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(TABLE1)}")
        base = TABLE1[preset].as_dict()
    for key in _PARAM_KEYS:
        if key in cfg:
            base[key] = cfg[key]
    if "unit" in cfg:
        base["unit"] = cfg["unit"]
    missing = [k for k in ("g", "kappa", "gamma_u") if k not in base]
    if missing:
        raise ConfigError(f"missing parameter(s): {', '.join(missing)}")
    try:
        values = {k: float(base[k]) for k in _PARAM_KEYS if k in base}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-numeric parameter: {exc}") from None
    return SystemParams(unit=str(base.get("unit", "gamma_u")), **values)


def pulse_from_config(cfg: Mapping[str, Any]) -> PulsePolicy:
    """Build a pulse from ``{"shape": ..., "omega0"|"area": ..., ...}``."""
    shape = cfg.get("shape", "symmetric")
    t_c = cfg.get("t_c")
    try:
        if shape in ("symmetric", "gaussian"):
            sigma = float(cfg["sigma"])
            if "area" in cfg:
                return SymmetricGaussian.from_area(float(cfg["area"]), sigma, t_c)
            return SymmetricGaussian(float(cfg["omega0"]), sigma, t_c)
        if shape == "asymmetric":
            s1, s2 = float(cfg["sigma1"]), float(cfg["sigma2"])
            if "area" in cfg:
                return AsymmetricGaussian.from_area(float(cfg["area"]), s1, s2, t_c)
            return AsymmetricGaussian(float(cfg["omega0"]), s1, s2, t_c)
        if shape == "tabulated":
            samples = cfg["samples"]
            return Tabulated(np.array([s[0] for s in samples], dtype=float),
                             np.array([complex(s[1], s[2] if len(s) > 2 else 0.0)
                                       for s in samples]))
    except KeyError as exc:
        raise ConfigError(f"pulse shape {shape!r} is missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad pulse config: {exc}") from None
    raise ConfigError(f"unknown pulse shape {shape!r}")


def with_area(policy: PulsePolicy, area: float) -> PulsePolicy:
    """Rescale a Gaussian pulse to a new area, keeping its widths."""
    if isinstance(policy, SymmetricGaussian):
        return replace(policy, omega0=area / policy.sigma)
    if isinstance(policy, AsymmetricGaussian):
        return replace(policy, omega0=area / policy.sigma1)
    raise TypeError("only Gaussian pulses can be rescaled by area")
