"""Compiled fixed-step RK4 integrator for a batch of dephased density matrices.

The Hamiltonian is real and banded (diagonal plus couplings at index distance
``s``), so rho = X + iY is carried as a symmetric X and an antisymmetric Y:

    dX/dt =  [H, Y] - gamma * mask o X
    dY/dt = -[H, X] - gamma * mask o Y

Arrays are padded by ``s`` zeros on each side so the stencil needs no branches;
the batch index is innermost.  Only the upper triangle is computed and mirrored,
which keeps rho exactly Hermitian, so the per-step re-Hermitisation is a no-op.
fastmath stays off: lanes of the batch must round identically.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _shapes(t, kind, center, width, out):
    for k in range(kind.shape[0]):
        if kind[k] == 0:
            x = (t - center[k]) / width[k]
            out[k] = np.exp(-0.5 * x * x)
        elif kind[k] == 1:
            out[k] = 1.0
        else:
            out[k] = 0.0


@njit(cache=True, nogil=True)
def _couplings(shape, amp, s, d, off):
    # off[i + s, g] = H[i, i + s] for member g
    G = amp.shape[1]
    for i in range(d - s):
        k = i // s
        for g in range(G):
            off[i + s, g] = -amp[k, g] * shape[k]


@njit(cache=True, nogil=True)
def _rhs(e, off, s, d, X, Y, gm, kx, ky):
    G = X.shape[2]
    for i in range(s, d + s):
        # diagonal: [H, Y]_ii = 2 (H_{i,i-s} Y_{i-s,i} + H_{i,i+s} Y_{i+s,i}); d/dt Y_ii = 0
        for g in range(G):
            kx[i, i, g] = 2.0 * (off[i - s, g] * Y[i - s, i, g] + off[i, g] * Y[i + s, i, g])
            ky[i, i, g] = 0.0
        for j in range(i + 1, d + s):
            de = e[i] - e[j]
            for g in range(G):
                a1 = off[i - s, g]
                a2 = off[i, g]
                b1 = off[j - s, g]
                b2 = off[j, g]
                cy = (de * Y[i, j, g] + a1 * Y[i - s, j, g] + a2 * Y[i + s, j, g]
                      - b1 * Y[i, j - s, g] - b2 * Y[i, j + s, g])
                cx = (de * X[i, j, g] + a1 * X[i - s, j, g] + a2 * X[i + s, j, g]
                      - b1 * X[i, j - s, g] - b2 * X[i, j + s, g])
                m = gm[i, j, g]
                u = cy - m * X[i, j, g]
                v = -cx - m * Y[i, j, g]
                kx[i, j, g] = u
                kx[j, i, g] = u
                ky[i, j, g] = v
                ky[j, i, g] = -v


@njit(cache=True, nogil=True)
def integrate(e, s, d, kind, center, width, amp, X, Y, gm, h, nsteps, record_every,
              rec_x, rec_y, max_site_pop, trace_dev, log_trace, trace_fail,
              purity_inc, purity_fail, trace_tol, purity_tol):
    """Advance X, Y (modified in place) by ``nsteps`` steps of size ``h``.

    Records every ``record_every`` steps and after the last one.  Per member it
    keeps the running maximum of every site population, the largest per-step
    trace deviation before renormalisation, the accumulated log of the trace
    corrections, the largest per-step purity increase, and the first step index
    (1-based, 0 = never) at which either tolerance was exceeded.
    """
    P = X.shape[0]
    G = X.shape[2]
    nl = kind.shape[0]
    M = P * P * G
    k1x = np.zeros_like(X); k2x = np.zeros_like(X); k3x = np.zeros_like(X); k4x = np.zeros_like(X)
    k1y = np.zeros_like(X); k2y = np.zeros_like(X); k3y = np.zeros_like(X); k4y = np.zeros_like(X)
    tx = np.zeros_like(X); ty = np.zeros_like(X)
    Xf = X.reshape(M); Yf = Y.reshape(M); txf = tx.reshape(M); tyf = ty.reshape(M)
    k1xf = k1x.reshape(M); k2xf = k2x.reshape(M); k3xf = k3x.reshape(M); k4xf = k4x.reshape(M)
    k1yf = k1y.reshape(M); k2yf = k2y.reshape(M); k3yf = k3y.reshape(M); k4yf = k4y.reshape(M)

    shape = np.empty(nl)
    off0 = np.zeros((P, G)); off1 = np.zeros((P, G)); off2 = np.zeros((P, G))
    tr = np.empty(G)
    pur = np.zeros(G)
    prev_pur = np.zeros(G)
    for i in range(P):
        for j in range(P):
            for g in range(G):
                prev_pur[g] += X[i, j, g] * X[i, j, g] + Y[i, j, g] * Y[i, j, g]

    rec_x[0] = X
    rec_y[0] = Y
    r = 1
    hh = 0.5 * h
    h6 = h / 6.0
    _shapes(0.0, kind, center, width, shape)
    _couplings(shape, amp, s, d, off0)
    for n in range(nsteps):
        t = n * h
        _shapes(t + hh, kind, center, width, shape)
        _couplings(shape, amp, s, d, off1)
        _shapes(t + h, kind, center, width, shape)
        _couplings(shape, amp, s, d, off2)

        _rhs(e, off0, s, d, X, Y, gm, k1x, k1y)
        for q in range(M):
            txf[q] = Xf[q] + hh * k1xf[q]
            tyf[q] = Yf[q] + hh * k1yf[q]
        _rhs(e, off1, s, d, tx, ty, gm, k2x, k2y)
        for q in range(M):
            txf[q] = Xf[q] + hh * k2xf[q]
            tyf[q] = Yf[q] + hh * k2yf[q]
        _rhs(e, off1, s, d, tx, ty, gm, k3x, k3y)
        for q in range(M):
            txf[q] = Xf[q] + h * k3xf[q]
            tyf[q] = Yf[q] + h * k3yf[q]
        _rhs(e, off2, s, d, tx, ty, gm, k4x, k4y)
        for q in range(M):
            Xf[q] += h6 * (k1xf[q] + 2.0 * k2xf[q] + 2.0 * k3xf[q] + k4xf[q])
            Yf[q] += h6 * (k1yf[q] + 2.0 * k2yf[q] + 2.0 * k3yf[q] + k4yf[q])

        # trace renormalisation and drift bookkeeping
        for g in range(G):
            tr[g] = 0.0
        for i in range(s, d + s):
            for g in range(G):
                tr[g] += X[i, i, g]
        for g in range(G):
            dev = abs(tr[g] - 1.0)
            if dev > trace_dev[g]:
                trace_dev[g] = dev
            if dev > trace_tol and trace_fail[g] == 0:
                trace_fail[g] = n + 1
            log_trace[g] += np.log(tr[g])
            tr[g] = 1.0 / tr[g]
            pur[g] = 0.0
        for i in range(P):
            for j in range(P):
                for g in range(G):
                    X[i, j, g] *= tr[g]
                    Y[i, j, g] *= tr[g]
                    pur[g] += X[i, j, g] * X[i, j, g] + Y[i, j, g] * Y[i, j, g]
        for g in range(G):
            inc = pur[g] - prev_pur[g]
            if inc > purity_inc[g]:
                purity_inc[g] = inc
            if inc > purity_tol and purity_fail[g] == 0:
                purity_fail[g] = n + 1
            prev_pur[g] = pur[g]

        for i in range(d):
            site = i // s
            for g in range(G):
                p = 0.0
                if i % s == 0:
                    for u in range(s):
                        p += X[i + s + u, i + s + u, g]
                    if p > max_site_pop[site, g]:
                        max_site_pop[site, g] = p

        if (n + 1) % record_every == 0 or n + 1 == nsteps:
            rec_x[r] = X
            rec_y[r] = Y
            r += 1
        for i in range(P):
            for g in range(G):
                off0[i, g] = off2[i, g]
    return r
