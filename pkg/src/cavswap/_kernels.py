"""Compiled inner loops: pulse evaluation, right-hand sides and a Dormand-Prince 5(4) stepper.

State layouts (complex128 vectors):

MODE_DENSITY  R(3x3 block, row-major) | rho44 | psi(3) | P0 accumulator           -> 14
MODE_MOMENTS  R | rho44 | K(3x3) | A | D | Ddiag | psi | P0 accumulator           -> 26
MODE_PROP     3x3 propagator, row-major                                          ->  9

``K(t') = int_0^t' lambda(t,t') lambda(t,t')^dagger dt`` obeys a linear ODE
with source ``v v^dagger`` (``v`` = g1 column of R), so the QRT double
integrals become ordinary accumulators:

    A     = int K_11 dt'                   = iint_{t'>=t} |lambda_2|^2
    D     = int (H K H^dagger)_11 dt'      = iint_{t'>=t} |d lambda_2 / dt'|^2
    Ddiag = int R_11^2 dt                  = int |lambda_2(t,t)|^2
"""
import numpy as np
from numba import njit

MODE_DENSITY = 0
MODE_MOMENTS = 1
MODE_PROP = 2
STATE_SIZE = (14, 26, 9)

STATUS_OK = 0
STATUS_STEP_TOO_SMALL = 1
STATUS_MAX_STEPS = 2

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


@njit(cache=True)
def pulse_value(t, pp, tab_t, tab_v):
    if pp[0] == 0.0:
        dt = t - pp[4]
        s = pp[2] if dt <= 0.0 else pp[3]
        return pp[1] * np.exp(-dt * dt / (2.0 * s * s)) + 0j
    n = tab_t.size
    if t < tab_t[0] or t > tab_t[n - 1]:
        return 0j
    k = np.searchsorted(tab_t, t, side="right") - 1
    if k >= n - 1:
        return tab_v[n - 1]
    w = (t - tab_t[k]) / (tab_t[k + 1] - tab_t[k])
    return tab_v[k] * (1.0 - w) + tab_v[k + 1] * w


@njit(cache=True)
def _hamiltonian(t, prm, pp, tab_t, tab_v, h):
    om = pulse_value(t, pp, tab_t, tab_v)
    g = prm[0]
    h[0, 0] = prm[4]
    h[0, 1] = 0j
    h[0, 2] = om
    h[1, 0] = 0j
    h[1, 1] = -1j * prm[1]
    h[1, 2] = g
    h[2, 0] = np.conj(om)
    h[2, 1] = g
    h[2, 2] = prm[5] - 1j * (prm[2] + prm[3])


@njit(cache=True)
def _commutator_part(h, m, out, off):
    # out[off:off+9] = -i (H M - M H^dagger)
    for a in range(3):
        for b in range(3):
            acc = 0j
            for c in range(3):
                acc += h[a, c] * m[c, b] - m[a, c] * np.conj(h[b, c])
            out[off + 3 * a + b] = -1j * acc


@njit(cache=True)
def rhs(mode, t, y, prm, pp, tab_t, tab_v, out):
    h = np.empty((3, 3), dtype=np.complex128)
    _hamiltonian(t, prm, pp, tab_t, tab_v, h)
    if mode == MODE_PROP:
        phi = y[0:9].reshape((3, 3))
        for a in range(3):
            for b in range(3):
                acc = 0j
                for c in range(3):
                    acc += h[a, c] * phi[c, b]
                out[3 * a + b] = -1j * acc
        return
    kappa = prm[1]
    r = y[0:9].reshape((3, 3))
    _commutator_part(h, r, out, 0)
    out[0] += 2.0 * prm[2] * r[2, 2]
    out[9] = 2.0 * kappa * r[1, 1]
    if mode == MODE_MOMENTS:
        k = y[10:19].reshape((3, 3))
        _commutator_part(h, k, out, 10)
        for a in range(3):
            for b in range(3):
                out[10 + 3 * a + b] += r[a, 1] * np.conj(r[b, 1])
        out[19] = k[1, 1]
        acc = 0j
        for a in range(3):
            for b in range(3):
                acc += h[1, a] * k[a, b] * np.conj(h[1, b])
        out[20] = acc
        out[21] = r[1, 1] * r[1, 1]
        base = 22
    else:
        base = 10
    for a in range(3):
        acc = 0j
        for c in range(3):
            acc += h[a, c] * y[base + c]
        out[base + a] = -1j * acc
    out[base + 3] = 2.0 * kappa * (y[base + 1].real ** 2 + y[base + 1].imag ** 2)


@njit(cache=True)
def integrate(mode, t0, y0, t_out, prm, pp, tab_t, tab_v, rtol, atol,
              h0, hwin_lo, hwin_hi, hwin_max, max_steps):
    """Advance ``y0`` from ``t0`` through every time in ``t_out`` (ascending).

    Steps inside ``[hwin_lo, hwin_hi)`` are capped at ``hwin_max`` and never
    jump into that window from below.  Returns ``(Y, h_last, nsteps, status)``.
    """
    n = y0.size
    n_out = t_out.size
    ys = np.empty((n_out, n), dtype=np.complex128)
    k = np.empty((7, n), dtype=np.complex128)
    ytmp = np.empty(n, dtype=np.complex128)
    ynew = np.empty(n, dtype=np.complex128)
    y = y0.copy()
    t = t0
    h = h0
    nsteps = 0
    rhs(mode, t, y, prm, pp, tab_t, tab_v, k[0])
    for j in range(n_out):
        target = t_out[j]
        while t < target:
            if nsteps >= max_steps:
                return ys, h, nsteps, STATUS_MAX_STEPS
            hh = h
            if t >= hwin_lo and t < hwin_hi and hh > hwin_max:
                hh = hwin_max
            edge = False
            if t < hwin_lo and t + hh > hwin_lo:
                hh = hwin_lo - t
                edge = True
            last = False
            if t + hh >= target:
                hh = target - t
                last = True
                edge = False
            if edge and hh <= 1e-14 * max(abs(t), 1.0):
                # rounding left t a hair short of the window edge
                t = hwin_lo
                continue
            if hh <= 1e-14 * max(abs(t), 1.0):
                if last:
                    t = target
                    break
                return ys, h, nsteps, STATUS_STEP_TOO_SMALL
            for s in range(1, 7):
                for i in range(n):
                    acc = 0j
                    for q in range(s):
                        acc += _A[s, q] * k[q, i]
                    ytmp[i] = y[i] + hh * acc
                rhs(mode, t + _C[s] * hh, ytmp, prm, pp, tab_t, tab_v, k[s])
            err = 0.0
            for i in range(n):
                acc = 0j
                eacc = 0j
                for q in range(7):
                    acc += _B[q] * k[q, i]
                    eacc += _E[q] * k[q, i]
                ynew[i] = y[i] + hh * acc
                scale = atol + rtol * max(abs(y[i]), abs(ynew[i]))
                e = abs(hh * eacc) / scale
                err += e * e
            err = np.sqrt(err / n)
            nsteps += 1
            if err <= 1.0:
                if last:
                    t = target
                elif edge:
                    t = hwin_lo
                else:
                    t = t + hh
                for i in range(n):
                    y[i] = ynew[i]
                    k[0, i] = k[6, i]
                fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
                if last:
                    # a clipped step says little about the natural size
                    h = max(h, hh * fac)
                else:
                    h = hh * fac
            else:
                h = hh * max(0.2, 0.9 * err ** -0.2)
        ys[j] = y
    return ys, h, nsteps, STATUS_OK


@njit(cache=True)
def interval_propagators(grid, prm, pp, tab_t, tab_v, rtol, atol, h0,
                         hwin_lo, hwin_hi, hwin_max, max_steps):
    """3x3 propagators of ``d/dt x = -i H(t) x`` across each grid interval."""
    m = grid.size - 1
    out = np.empty((m, 3, 3), dtype=np.complex128)
    eye = np.zeros(9, dtype=np.complex128)
    eye[0] = 1.0
    eye[4] = 1.0
    eye[8] = 1.0
    tgt = np.empty(1)
    h = h0
    total = 0
    for i in range(m):
        tgt[0] = grid[i + 1]
        ys, h, ns, status = integrate(MODE_PROP, grid[i], eye, tgt, prm, pp, tab_t, tab_v,
                                     rtol, atol, h, hwin_lo, hwin_hi, hwin_max,
                                     max_steps - total)
        total += ns
        if status != STATUS_OK:
            return out, status
        out[i] = ys[0].reshape((3, 3))
    return out, STATUS_OK


@njit(cache=True, nogil=True)
def fill_rows(props, init, rows, values, lam1_final):
    """Propagate ``init[i]`` forward through ``props`` for every i in ``rows``.

    Writes ``values[i, j] = lambda_2(t_i, t_j)`` for ``j >= i`` and the
    ``lambda_1`` component at the last grid point.
    """
    n = init.shape[0]
    x = np.empty(3, dtype=np.complex128)
    xn = np.empty(3, dtype=np.complex128)
    for r in range(rows.size):
        i = rows[r]
        for a in range(3):
            x[a] = init[i, a]
        values[i, i] = x[1]
        for j in range(i + 1, n):
            u = props[j - 1]
            for a in range(3):
                xn[a] = u[a, 0] * x[0] + u[a, 1] * x[1] + u[a, 2] * x[2]
            for a in range(3):
                x[a] = xn[a]
            values[i, j] = x[1]
        lam1_final[i] = x[0]
