"""Post-selected multipartite fidelity from pairwise waveform overlaps.

A scheme is a superposition of terms ``c_m |atoms_m> prod_n A_mn^dagger |0>``
with at most one photon per mode.  Conditioning on clicks in the detected
modes keeps the terms whose photon pattern matches exactly; averaging the
fidelity with the ideal state over the click times leaves only overlaps
``<phi_a|phi_b>`` of single-photon waveforms.

Sources that re-excite emit mixed photons.  In that case each product of
overlaps is replaced by traces of chained correlation kernels
``K_s(t, t') = 2 kappa G_s(t, t') / P_s``, following the permutation that
maps every detected mode to the mode holding the same source's photon in the
other term.  A source that emits in only one of the two terms contributes
its no-jump amplitude instead, since a recycling jump leaves a record in the
environment and destroys coherence with the dark branch.  For pure sources
``K_s = phi_s^* phi_s^T`` and everything reduces to waveform overlaps.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PostSelectionImpossible
from .lindblad import trapezoid_weights

MAX_MODES = 8
NORM_TOL = 1e-8
UNITARY_TOL = 1e-10


# --------------------------------------------------------------------------
# scheme description
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    amplitude: complex
    photons: tuple
    atoms: tuple
    waveforms: tuple  # waveform id per mode, None where no photon

    def as_dict(self) -> dict:
        return {"amplitude": [self.amplitude.real, self.amplitude.imag],
                "photons": list(self.photons), "atoms": list(self.atoms),
                "waveforms": list(self.waveforms)}


@dataclass(frozen=True)
class PostSelectedScheme:
    n_modes: int
    terms: tuple
    detected_modes: tuple
    mode_names: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "detected_modes", tuple(sorted(int(d) for d in self.detected_modes)))
        n = self.n_modes
        for k, t in enumerate(self.terms):
            if len(t.photons) != n or len(t.waveforms) != n:
                raise ConfigError(f"term {k}: photons/waveforms must have length {n}")
            if any(s not in (0, 1) for s in t.photons) or any(a not in (0, 1) for a in t.atoms):
                raise ConfigError(f"term {k}: photon and atom entries must be 0 or 1")
            for s, w in zip(t.photons, t.waveforms):
                if (s == 1) != (w is not None):
                    raise ConfigError(f"term {k}: waveform ids must be given exactly where a photon is")
        atom_len = {len(t.atoms) for t in self.terms}
        if len(atom_len) > 1:
            raise ConfigError("all terms need the same number of atoms")
        if any(not 0 <= d < n for d in self.detected_modes):
            raise ConfigError("detected mode out of range")
        total = sum(abs(t.amplitude) ** 2 for t in self.terms)
        if total > 1.0 + NORM_TOL:
            raise ConfigError(f"sum |c_m|^2 = {total:.12g} exceeds 1")

    @property
    def norm_squared(self) -> float:
        return float(sum(abs(t.amplitude) ** 2 for t in self.terms))

    def to_dict(self) -> dict:
        d = {"n_modes": self.n_modes, "terms": [t.as_dict() for t in self.terms],
             "detected_modes": list(self.detected_modes)}
        if self.mode_names:
            d["mode_names"] = list(self.mode_names)
        return d

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "PostSelectedScheme":
        try:
            terms = []
            for t in d["terms"]:
                amp = t["amplitude"]
                amp = complex(amp[0], amp[1]) if isinstance(amp, (list, tuple)) else complex(amp)
                terms.append(Term(amp, tuple(int(x) for x in t["photons"]),
                                  tuple(int(x) for x in t["atoms"]),
                                  tuple(None if w is None else str(w) for w in t["waveforms"])))
            names = d.get("mode_names")
            return cls(int(d["n_modes"]), tuple(terms), tuple(d["detected_modes"]),
                       tuple(names) if names else None)
        except (KeyError, TypeError, IndexError) as exc:
            raise ConfigError(f"malformed scheme: {exc!r}") from None

    @classmethod
    def load(cls, path) -> "PostSelectedScheme":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def surviving_terms(scheme: PostSelectedScheme) -> list:
    """Indices of terms whose occupied modes equal the detected set."""
    want = set(scheme.detected_modes)
    keep = [m for m, t in enumerate(scheme.terms)
            if {n for n, s in enumerate(t.photons) if s} == want]
    if not keep:
        raise PostSelectionImpossible(f"no term has photons exactly in modes {sorted(want)}")
    return keep


def overlap_matrix(scheme: PostSelectedScheme, survivors=None) -> np.ndarray:
    """``I_mm' = c_m^* c_m' <atoms_m|atoms_m'>`` over the surviving terms."""
    survivors = surviving_terms(scheme) if survivors is None else survivors
    terms = [scheme.terms[k] for k in survivors]
    c = np.array([t.amplitude for t in terms], dtype=complex)
    same = np.array([[a.atoms == b.atoms for b in terms] for a in terms], dtype=float)
    return np.conj(c)[:, None] * c[None, :] * same


# --------------------------------------------------------------------------
# waveform sources
# --------------------------------------------------------------------------

class WaveformTable:
    """Pure single-photon waveforms sampled on a shared grid.

    ``overlap(a, b) = int phi_a(t) phi_b(t)^* dt`` (trapezoid); the matrix is
    computed once on construction.
    """

    def __init__(self, grid, waveforms: dict, normalize: bool = True):
        self.grid = np.asarray(grid, dtype=float)
        self.weights = trapezoid_weights(self.grid)
        self.ids = list(waveforms)
        data = np.array([np.asarray(waveforms[k], dtype=complex) for k in self.ids])
        if data.ndim != 2 or data.shape[1] != self.grid.size:
            raise ValueError("every waveform must be sampled on the grid")
        if normalize:
            norms = np.sqrt(np.real(np.einsum("kt,t,kt->k", np.conj(data), self.weights, data)))
            if np.any(norms == 0):
                raise ValueError("cannot normalise a zero waveform")
            data = data / norms[:, None]
        self.data = data
        self.index = {k: i for i, k in enumerate(self.ids)}
        self.overlaps = (data * self.weights) @ np.conj(data).T

    def overlap(self, a, b) -> complex:
        return complex(self.overlaps[self.index[a], self.index[b]])

    def braket(self, a, b) -> complex:
        """``<phi_a|phi_b> = int phi_a^* phi_b``."""
        return complex(self.overlaps[self.index[b], self.index[a]])

    def product(self, left: dict, right: dict) -> complex:
        """``prod_n <phi_left[n]|phi_right[n]>`` over the detected modes."""
        out = 1.0 + 0j
        for n, a in left.items():
            out *= self.braket(a, right[n])
        return out

    @classmethod
    def from_gram(cls, ids, gram) -> "WaveformTable":
        """Waveforms on a unit-spaced index grid whose overlap matrix equals ``gram``."""
        gram = np.asarray(gram, dtype=complex)
        vals, vecs = np.linalg.eigh(gram)
        vals = np.clip(vals, 0.0, None)
        # rows of B satisfy B B^dagger = gram; overlap(a, b) = sum_t phi_a phi_b^*
        b = vecs * np.sqrt(vals)[None, :]
        k = len(ids)
        grid = np.arange(k + 1, dtype=float)
        w = trapezoid_weights(grid)
        data = np.zeros((k, k + 1), dtype=complex)
        data[:, :k] = b / np.sqrt(w[:k])[None, :]
        return cls(grid, dict(zip(ids, data)), normalize=False)


class KernelTable:
    """Normalised correlation kernels ``K_s[i, j] = 2 kappa G_s(t_i, t_j) / P_s`` on one grid.

    ``amplitudes[s]`` is the part of source ``s``'s emission that stays
    coherent with its non-emitting branch, normalised the same way
    (``sqrt(2 kappa / P_s)`` times the no-jump ``|g1>`` amplitude).  It is
    only needed for schemes where a source emits in one term and not in the
    other, such as the W preset.
    """

    def __init__(self, grid, kernels: dict, amplitudes: dict | None = None):
        self.grid = np.asarray(grid, dtype=float)
        self.weights = trapezoid_weights(self.grid)
        self.kernels = {k: np.asarray(v, dtype=complex) for k, v in kernels.items()}
        self.amplitudes = {k: np.asarray(v, dtype=complex) for k, v in (amplitudes or {}).items()}
        self._cache = {}

    @classmethod
    def from_correlations(cls, items: dict, amplitudes: dict | None = None) -> "KernelTable":
        """``items[id] = (corr, p_ex, kappa)``; all correlations must share a grid.

        ``amplitudes[id]`` (optional) is the raw no-jump ``|g1>`` amplitude on
        the same grid; it is normalised here.
        """
        grid = None
        kernels, amps = {}, {}
        for key, (corr, p_ex, kappa) in items.items():
            if grid is None:
                grid = corr.grid
            elif not np.array_equal(grid, corr.grid):
                raise ValueError("kernels must share one grid")
            kernels[key] = 2.0 * kappa * corr.values / p_ex
            if amplitudes and key in amplitudes:
                amps[key] = math.sqrt(2.0 * kappa / p_ex) * np.asarray(amplitudes[key])
        return cls(grid, kernels, amps)

    @classmethod
    def from_waveforms(cls, table: WaveformTable) -> "KernelTable":
        """Rank-one kernels ``phi^*(t) phi(t')`` of pure waveforms."""
        return cls(table.grid, {k: np.outer(np.conj(v), v) for k, v in zip(table.ids, table.data)},
                   dict(zip(table.ids, table.data)))

    def _matrix(self, s):
        return self.kernels[s] * self.weights[None, :]

    def _amplitude(self, s):
        try:
            return self.amplitudes[s]
        except KeyError:
            raise ValueError(f"source {s!r} emits in only one of two terms; "
                             "its coherent amplitude is required") from None

    def cycle_trace(self, sources: tuple) -> complex:
        """``int K_s0(t0,t1) K_s1(t1,t2) ... K_s(L-1)(t(L-1),t0)``."""
        key = _canonical_cycle(sources)
        if ("cycle", key) not in self._cache:
            acc = None
            for s in key:
                m = self._matrix(s)
                acc = m if acc is None else acc @ m
            self._cache[("cycle", key)] = complex(np.trace(acc))
        return self._cache[("cycle", key)]

    def path_value(self, first, middle: tuple, last) -> complex:
        """``int chi_first(t0) K_m0(t0,t1) ... chi_last^*(tk)`` for an open chain."""
        key = ("path", first, middle, last)
        if key not in self._cache:
            v = self._amplitude(first) * self.weights
            for s in middle:
                v = v @ self._matrix(s)
            self._cache[key] = complex(v @ np.conj(self._amplitude(last)))
        return self._cache[key]

    def product(self, left: dict, right: dict) -> complex:
        """Kernel analogue of ``prod_n <phi_left[n]|phi_right[n]>``.

        Each mode's time appears in two factors: the left term's source there
        (first kernel argument) and the right term's source (second).  Sources
        present in both terms chain modes into cycles; a source present on one
        side only ends an open chain with its coherent amplitude.
        """
        if len(set(left.values())) != len(left) or len(set(right.values())) != len(right):
            raise ValueError("a source can fill at most one detected mode per term")
        pos_right = {s: n for n, s in right.items()}
        pos_left = {s: n for n, s in left.items()}
        out = 1.0 + 0j
        seen = set()
        # open chains start where the right source is absent from the left term
        for start, r in right.items():
            if r in pos_left:
                continue
            middle = []
            n = start
            while True:
                seen.add(n)
                s = left[n]
                if s not in pos_right:
                    break
                middle.append(s)
                n = pos_right[s]
            out *= self.path_value(r, tuple(middle), s)
        for start in left:
            if start in seen:
                continue
            cycle = []
            n = start
            while n not in seen:
                seen.add(n)
                s = left[n]
                cycle.append(s)
                n = pos_right[s]
            out *= self.cycle_trace(tuple(cycle))
        return out


def _canonical_cycle(sources: tuple) -> tuple:
    # traces are invariant under cyclic rotation
    rots = [sources[i:] + sources[:i] for i in range(len(sources))]
    return min(rots)


# --------------------------------------------------------------------------
# fidelity
# --------------------------------------------------------------------------

def _detected_ids(term: Term, detected) -> dict:
    return {n: term.waveforms[n] for n in detected}


def averaged_fidelity(scheme: PostSelectedScheme, waveforms, *, return_parts: bool = False):
    """Click-time-averaged fidelity with the ideal post-selected atomic state.

    ``F = sum I*_mm' I_pp' X_m'p' / (sum_mm' I_mm' * sum_mp I_mp X_mp)`` with
    ``X_ab = prod_n <phi_an|phi_bn>``; the second factor of the denominator
    is the heralding weight, which makes ``F`` a normalised fidelity.
    ``waveforms`` is a :class:`WaveformTable` or a :class:`KernelTable`.
    """
    keep = surviving_terms(scheme)
    i_mat = overlap_matrix(scheme, keep)
    ids = [_detected_ids(scheme.terms[k], scheme.detected_modes) for k in keep]
    k = len(keep)
    x = np.empty((k, k), dtype=complex)
    for a in range(k):
        for b in range(k):
            x[a, b] = waveforms.product(ids[a], ids[b])
    u = i_mat.sum(axis=0)  # u_m' = sum_m I_mm'
    numerator = np.conj(u) @ x @ u
    target_norm = i_mat.sum()
    herald = np.sum(i_mat * x)
    if abs(herald) == 0 or abs(target_norm) == 0:
        raise PostSelectionImpossible("heralding probability vanishes")
    fid = float((numerator / (target_norm * herald)).real)
    if return_parts:
        return fid, {"numerator": complex(numerator), "target_norm": complex(target_norm),
                     "heralding": complex(herald), "survivors": keep}
    return fid


# --------------------------------------------------------------------------
# network expansion
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceSpec:
    """One emitter: branches ``(amplitude, atom bit, input mode or None)``."""

    name: str
    branches: tuple

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(tuple(b) for b in self.branches))


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ConfigError("network must be a square matrix")
    dev = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if dev >= tol:
        raise ConfigError(f"network is not unitary (||U^dag U - 1|| = {dev:.3g})")
    return u


def build_network_scheme(sources, network, clicks, mode_names=None) -> PostSelectedScheme:
    """Expand the product of source states through a linear network.

    ``network[o, i]`` is the amplitude for input mode ``i`` to leave in
    output mode ``o``.  Terms with two photons in one output mode fall
    outside the one-excitation-per-mode form and are dropped with a warning.
    """
    u = check_unitary(network)
    n = u.shape[0]
    if n > MAX_MODES:
        raise ConfigError(f"at most {MAX_MODES} modes are supported, got {n}")
    if mode_names is not None:
        lookup = {name: i for i, name in enumerate(mode_names)}
        clicks = [lookup[c] if isinstance(c, str) else c for c in clicks]
    acc = {}
    dropped = 0
    for combo in itertools.product(*(s.branches for s in sources)):
        amp0 = complex(np.prod([b[0] for b in combo]))
        atoms = tuple(int(b[1]) for b in combo)
        photons = [(s.name, b[2]) for s, b in zip(sources, combo) if b[2] is not None]
        outs = [np.nonzero(np.abs(u[:, i]) > 0)[0] for _, i in photons]
        for assignment in itertools.product(*outs):
            if len(set(assignment)) < len(assignment):
                dropped += 1
                continue
            amp = amp0
            for (_, i), o in zip(photons, assignment):
                amp *= u[o, i]
            key = (atoms, tuple(sorted((int(o), name) for (name, _), o in zip(photons, assignment))))
            acc[key] = acc.get(key, 0j) + amp
    if dropped:
        warnings.warn(f"dropped {dropped} term(s) with two photons in one output mode",
                      RuntimeWarning, stacklevel=2)
    terms = []
    for (atoms, occ), amp in acc.items():
        if abs(amp) < 1e-15:
            continue
        photons = [0] * n
        wf = [None] * n
        for o, name in occ:
            photons[o] = 1
            wf[o] = name
        terms.append(Term(complex(amp), tuple(photons), atoms, tuple(wf)))
    return PostSelectedScheme(n, tuple(terms), tuple(clicks),
                              tuple(mode_names) if mode_names else None)


def raw_expansion_size(sources, network) -> tuple:
    """``(number of terms, sum |c|^2)`` of the expansion before collisions are removed."""
    u = check_unitary(network)
    count = 0
    total = 0.0
    for combo in itertools.product(*(s.branches for s in sources)):
        amp0 = abs(complex(np.prod([b[0] for b in combo]))) ** 2
        ins = [b[2] for b in combo if b[2] is not None]
        for assignment in itertools.product(*[np.nonzero(np.abs(u[:, i]) > 0)[0] for i in ins]):
            count += 1
            total += amp0 * float(np.prod([abs(u[o, i]) ** 2 for o, i in zip(assignment, ins)]))
    return count, total


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

R2 = 1.0 / math.sqrt(2.0)


def bell_network() -> tuple:
    """Modes ``1H 1V 2H 2V 3H 3V 4H 4V``; 50/50 splitter mixing ports 1, 2 into 3, 4."""
    names = ("1H", "1V", "2H", "2V", "3H", "3V", "4H", "4V")
    idx = {k: i for i, k in enumerate(names)}
    u = np.zeros((8, 8), dtype=complex)
    for pol in "HV":
        a1, a2, a3, a4 = (idx[f"{p}{pol}"] for p in "1234")
        u[a3, a1], u[a4, a1] = R2, -R2   # a1 -> (a3 - a4)/sqrt2
        u[a3, a2], u[a4, a2] = R2, R2    # a2 -> (a3 + a4)/sqrt2
        u[a1, a3], u[a2, a3] = R2, R2    # unused input ports complete the unitary
        u[a1, a4], u[a2, a4] = R2, -R2
    return u, names


def bell_sources() -> list:
    """``(a_H^dag |up> - a_V^dag |down>) / sqrt2`` from ports 1 and 2 (up = 0)."""
    _, names = bell_network()
    idx = {k: i for i, k in enumerate(names)}
    return [SourceSpec("s0", ((R2, 0, idx["1H"]), (-R2, 1, idx["1V"]))),
            SourceSpec("s1", ((R2, 0, idx["2H"]), (-R2, 1, idx["2V"])))]


def bell_scheme() -> PostSelectedScheme:
    u, names = bell_network()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return build_network_scheme(bell_sources(), u, ["3H", "3V"], names)


def _pbs(n_spatial, i, j):
    """Polarising beam splitter: H stays in its spatial mode, V swaps between i and j."""
    u = np.eye(2 * n_spatial, dtype=complex)
    vi, vj = 2 * i + 1, 2 * j + 1
    u[vi, vi] = u[vj, vj] = 0.0
    u[vj, vi] = u[vi, vj] = 1.0
    return u


def _hwp(n_spatial):
    """Half-wave plate at 22.5 degrees on every spatial mode: H -> (H+V)/sqrt2, V -> (H-V)/sqrt2."""
    blk = np.array([[R2, R2], [R2, -R2]], dtype=complex)
    return np.kron(np.eye(n_spatial), blk)


def ghz_network(n: int = 3) -> tuple:
    u = np.eye(2 * n, dtype=complex)
    for k in range(n - 1):
        u = _pbs(n, k, k + 1) @ u
    u = _hwp(n) @ u
    names = tuple(f"{k}{p}" for k in range(n) for p in "HV")
    return u, names


def ghz_sources(n: int = 3) -> list:
    """``(a_H^dag |up> + a_V^dag |down>) / sqrt2`` from spatial mode k (up = 0)."""
    return [SourceSpec(f"s{k}", ((R2, 0, 2 * k), (R2, 1, 2 * k + 1))) for k in range(n)]


def ghz_scheme(n: int = 3) -> PostSelectedScheme:
    u, names = ghz_network(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return build_network_scheme(ghz_sources(n), u, [f"{k}H" for k in range(n)], names)


def dft_network(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(2j * np.pi * np.outer(k, k) / n) / math.sqrt(n)


def w_sources(n: int = 3, alpha: float = R2) -> list:
    """``alpha |down>|0> + beta |up>|1>`` in spatial mode k (down = 0, up = 1)."""
    beta = math.sqrt(1.0 - alpha ** 2)
    return [SourceSpec(f"s{k}", ((alpha, 0, None), (beta, 1, k))) for k in range(n)]


def w_scheme(n: int = 3, alpha: float = R2) -> PostSelectedScheme:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return build_network_scheme(w_sources(n, alpha), dft_network(n), [0],
                                    tuple(str(k) for k in range(n)))


PRESETS = {"bell": bell_scheme, "ghz": ghz_scheme, "w": w_scheme}


def preset_scheme(name: str) -> PostSelectedScheme:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def scheme_sources(scheme: PostSelectedScheme) -> list:
    """Waveform ids used by the surviving terms, in first-seen order."""
    out = []
    for k in surviving_terms(scheme):
        for w in scheme.terms[k].waveforms:
            if w is not None and w not in out:
                out.append(w)
    return out
