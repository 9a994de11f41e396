"""Brute-force reference implementations used only by the tests.

Nothing here imports the library's integrators; pulses are plain callables.
"""
import itertools
import math

import numpy as np

# atomic levels u, g, e, f (f collects the non-re-excitable decay) x cavity {0, 1}
U, G, E, F = range(4)
DIM = 8


def idx(atom, n):
    return 2 * atom + n


def _ops():
    a = np.zeros((2, 2))
    a[0, 1] = 1.0
    i2 = np.eye(2)

    def proj(i, j):
        m = np.zeros((4, 4))
        m[i, j] = 1.0
        return m

    return a, i2, proj


def full_space_operators(g, kappa, gamma_u, gamma_g=0.0, delta_u=0.0, delta_e=0.0):
    """Static Hamiltonian, drive operator and collapse operators on the 8-dim space."""
    a, i2, proj = _ops()
    A = np.kron(np.eye(4), a)
    h0 = (delta_u * np.kron(proj(U, U), i2) + delta_e * np.kron(proj(E, E), i2)
          + g * (np.kron(proj(G, E), a.T) + np.kron(proj(E, G), a)))
    drive = np.kron(proj(U, E), i2)  # Omega |u><e| + h.c.
    cops = [math.sqrt(2 * kappa) * A,
            math.sqrt(2 * gamma_u) * np.kron(proj(U, E), i2),
            math.sqrt(2 * gamma_g) * np.kron(proj(F, E), i2)]
    return h0.astype(complex), drive.astype(complex), [c.astype(complex) for c in cops], A


def _superop(h):
    # row-major vec: vec(X rho Y) = kron(X, Y^T) vec(rho)
    i = np.eye(DIM)
    return -1j * (np.kron(h, i) - np.kron(i, h.T))


def _dissipator(cops):
    i = np.eye(DIM)
    out = np.zeros((DIM * DIM, DIM * DIM), dtype=complex)
    for c in cops:
        cd = c.conj().T
        out += np.kron(c, c.conj()) - 0.5 * (np.kron(cd @ c, i) + np.kron(i, (cd @ c).T))
    return out


class FullSpaceLindblad:
    """Fixed-step RK4 on the vectorised 64-dimensional Lindbladian."""

    def __init__(self, g, kappa, gamma_u, pulse, gamma_g=0.0, delta_u=0.0, delta_e=0.0):
        h0, drive, cops, self.a = full_space_operators(g, kappa, gamma_u, gamma_g, delta_u, delta_e)
        self.l0 = _superop(h0) + _dissipator(cops)
        self.l_drive = _superop(drive)
        self.l_drive_h = _superop(drive.conj().T)
        self.pulse = pulse

    def generator(self, t):
        om = complex(self.pulse(t))
        return self.l0 + om * self.l_drive + np.conj(om) * self.l_drive_h

    def step(self, t, v, dt):
        k1 = self.generator(t) @ v
        lm = self.generator(t + dt / 2)
        k2 = lm @ (v + dt / 2 * k1)
        k3 = lm @ (v + dt / 2 * k2)
        k4 = self.generator(t + dt) @ (v + dt * k3)
        return v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def propagate(self, v, t0, t1, dt):
        n = max(1, int(math.ceil((t1 - t0) / dt)))
        h = (t1 - t0) / n
        t = t0
        for _ in range(n):
            v = self.step(t, v, h)
            t += h
        return v

    @staticmethod
    def initial():
        rho = np.zeros((DIM, DIM), dtype=complex)
        rho[idx(U, 0), idx(U, 0)] = 1.0
        return rho.reshape(-1)

    @staticmethod
    def busy_population(v):
        rho = v.reshape(DIM, DIM)
        return float(sum(rho[i, i].real for i in range(DIM)
                         if i not in (idx(U, 0), idx(G, 0), idx(F, 0))))


def oracle_emission_probability(g, kappa, gamma_u, pulse, t_pump_end, dt, gamma_g=0.0,
                                delta_u=0.0, delta_e=0.0, chunk=None, tol=1e-9, max_chunks=400):
    """Population of ``|g, 0>`` once the pump is off and the cavity/excited state has emptied."""
    sys = FullSpaceLindblad(g, kappa, gamma_u, pulse, gamma_g, delta_u, delta_e)
    v = sys.initial()
    v = sys.propagate(v, 0.0, t_pump_end, dt)
    t = t_pump_end
    chunk = chunk or 5.0
    for _ in range(max_chunks):
        if sys.busy_population(v) < tol:
            break
        v = sys.propagate(v, t, t + chunk, dt)
        t += chunk
    rho = v.reshape(DIM, DIM)
    return float(rho[idx(G, 0), idx(G, 0)].real), t


def oracle_correlation(g, kappa, gamma_u, pulse, grid, substeps=20, gamma_g=0.0):
    """``<a^dag(t_i) a(t_j)>`` for ``j >= i`` via the regression theorem on the full space.

    ``Tr[a V(t_j, t_i)(rho(t_i) a^dag)]``; lower triangle by conjugation.
    """
    sys = FullSpaceLindblad(g, kappa, gamma_u, pulse, gamma_g)
    a = sys.a
    n = len(grid)
    rhos = []
    v = sys.initial()
    rhos.append(v)
    for k in range(n - 1):
        v = sys.propagate(v, grid[k], grid[k + 1], (grid[k + 1] - grid[k]) / substeps)
        rhos.append(v)
    out = np.zeros((n, n), dtype=complex)
    for i in range(n):
        x = (rhos[i].reshape(DIM, DIM) @ a.conj().T).reshape(-1)
        out[i, i] = np.trace(a @ x.reshape(DIM, DIM))
        for j in range(i + 1, n):
            x = sys.propagate(x, grid[j - 1], grid[j], (grid[j] - grid[j - 1]) / substeps)
            out[i, j] = np.trace(a @ x.reshape(DIM, DIM))
    return np.triu(out) + np.conj(np.triu(out, 1)).T


def permanent(m):
    m = np.asarray(m)
    n = m.shape[0]
    return sum(np.prod([m[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))


def w_state_bin_fidelity(amplitudes, network, click_mode, alpha):
    """Brute-force heralded W-state fidelity on discretised time bins.

    ``amplitudes[k]`` is source k's photon amplitude per time bin (any norm;
    normalised here).  Each source is ``alpha |0>_atom |vac> + beta |1>_atom |photon>``;
    photons pass the spatial network and one photon is detected in
    ``click_mode`` (any bin) with every other mode and bin empty.
    """
    n = len(amplitudes)
    beta = math.sqrt(1 - alpha ** 2)
    phis = [np.asarray(p, dtype=complex) / np.linalg.norm(p) for p in amplitudes]
    nb = phis[0].size
    # state as dict: (atoms, photons as sorted tuple of (mode, bin)) -> amplitude
    state = {((), ()): 1.0 + 0j}
    for k in range(n):
        new = {}
        for (atoms, photons), amp in state.items():
            key = (atoms + (0,), photons)
            new[key] = new.get(key, 0) + amp * alpha
            for b in range(nb):
                key = (atoms + (1,), tuple(sorted(photons + ((k, b),))))
                new[key] = new.get(key, 0) + amp * beta * phis[k][b]
        state = new
    out = {}
    for (atoms, photons), amp in state.items():
        for outs in itertools.product(range(n), repeat=len(photons)):
            a2 = amp
            occ = []
            for (mode, b), o in zip(photons, outs):
                a2 *= network[o, mode]
                occ.append((o, b))
            key = (atoms, tuple(sorted(occ)))
            out[key] = out.get(key, 0) + a2
    # heralded atomic vectors per click bin
    dim = 2 ** n
    rho = np.zeros((dim, dim), dtype=complex)
    for b in range(nb):
        psi = np.zeros(dim, dtype=complex)
        for (atoms, occ), amp in out.items():
            if occ == ((click_mode, b),):
                psi[int("".join(map(str, atoms)), 2)] += amp
        rho += np.outer(psi, psi.conj())
    w = np.zeros(dim)
    for k in range(n):
        bits = [0] * n
        bits[k] = 1
        w[int("".join(map(str, bits)), 2)] = 1.0
    w /= np.linalg.norm(w)
    return float((w @ rho @ w).real / np.trace(rho).real)
