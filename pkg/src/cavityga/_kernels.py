"""Compiled RK4 kernel for closed dynamics over a batch of control schedules.

States are stored as real arrays of shape (2^N, d, 2P): lanes [0, P) hold the
real parts of P independent kets, lanes [P, 2P) the imaginary parts. The
control Hamiltonian is real, so d(u + iv)/dt = -iH(u + iv) splits into
du/dt = Hv and dv/dt = -Hu. Lanes never mix, so each member's arithmetic is
identical whatever batch it is propagated in.
"""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _apply_h(n_qubits, sq, c, x, out):
    # out = H x; c[k, lane] is the amplitude of control k
    nq, d, lanes = x.shape
    out[:] = 0.0
    for q in range(nq):
        for n in range(d - 1):
            s = sq[n + 1]
            for m in range(lanes):
                v = c[n_qubits, m] * s
                out[q, n, m] += v * x[q, n + 1, m]
                out[q, n + 1, m] += v * x[q, n, m]
    for j in range(n_qubits):
        mask = 1 << (n_qubits - 1 - j)
        for q in range(nq):
            if q & mask:
                q0 = q ^ mask
                for n in range(d - 1):
                    s = sq[n + 1]
                    for m in range(lanes):
                        v = c[j, m] * s
                        out[q0, n + 1, m] += v * x[q, n, m]
                        out[q, n, m] += v * x[q0, n + 1, m]


@numba.njit(cache=True, nogil=True)
def _stage(x, k, a, out):
    # out = x - i a k, in split real/imag lanes
    nq, d, lanes = x.shape
    p = lanes // 2
    for q in range(nq):
        for n in range(d):
            for m in range(p):
                out[q, n, m] = x[q, n, m] + a * k[q, n, m + p]
                out[q, n, m + p] = x[q, n, m + p] - a * k[q, n, m]


@numba.njit(cache=True, nogil=True)
def _observe(x, tr, ti, fid, top):
    # fid = sum_n |<target|_Q (x)<n|_c psi>|^2, top = population of the highest Fock level
    nq, d, lanes = x.shape
    p = lanes // 2
    for m in range(p):
        fid[m] = 0.0
        top[m] = 0.0
    for n in range(d):
        for m in range(p):
            a = 0.0
            b = 0.0
            for q in range(nq):
                a += tr[q] * x[q, n, m] + ti[q] * x[q, n, m + p]
                b += tr[q] * x[q, n, m + p] - ti[q] * x[q, n, m]
            fid[m] += a * a + b * b
    for q in range(nq):
        for m in range(p):
            top[m] += x[q, d - 1, m] ** 2 + x[q, d - 1, m + p] ** 2


@numba.njit(cache=True, nogil=True)
def rk4_batch(x0, n_qubits, coeffs, h, tr, ti, fid, top, states):
    """Propagate every lane, writing fidelity and top-level traces per step.

    coeffs has shape (2 n_steps + 1, N + 1, 2P): controls at step start, midpoint
    and end, duplicated across the real and imaginary lanes. ``states`` is
    filled when its first dimension is non-zero. A non-finite amplitude in a
    lane makes that lane's fidelity non-finite from then on (0 * nan = nan), so
    callers detect blow-ups from ``fid``.
    """
    nq, d, lanes = x0.shape
    p = lanes // 2
    sq = np.sqrt(np.arange(d).astype(np.float64))
    n_steps = fid.shape[0] - 1
    record = states.shape[0] > 0
    x = x0.copy()
    k1 = np.empty_like(x)
    k2 = np.empty_like(x)
    k3 = np.empty_like(x)
    k4 = np.empty_like(x)
    t = np.empty_like(x)
    half = 0.5 * h
    w = h / 6.0
    _observe(x, tr, ti, fid[0], top[0])
    if record:
        states[0] = x
    for s in range(n_steps):
        _apply_h(n_qubits, sq, coeffs[2 * s], x, k1)
        _stage(x, k1, half, t)
        _apply_h(n_qubits, sq, coeffs[2 * s + 1], t, k2)
        _stage(x, k2, half, t)
        _apply_h(n_qubits, sq, coeffs[2 * s + 1], t, k3)
        _stage(x, k3, h, t)
        _apply_h(n_qubits, sq, coeffs[2 * s + 2], t, k4)
        for q in range(nq):
            for n in range(d):
                for m in range(p):
                    x[q, n, m] += w * (k1[q, n, m + p] + 2.0 * k2[q, n, m + p]
                                       + 2.0 * k3[q, n, m + p] + k4[q, n, m + p])
                    x[q, n, m + p] -= w * (k1[q, n, m] + 2.0 * k2[q, n, m]
                                           + 2.0 * k3[q, n, m] + k4[q, n, m])
        _observe(x, tr, ti, fid[s + 1], top[s + 1])
        if record:
            states[s + 1] = x
