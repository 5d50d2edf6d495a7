"""Compiled inner loops shared by the samplers.

All routines are sequential per input row and release the GIL, so callers
parallelize over rows with threads. Accumulation order is fixed, which
keeps results independent of the number of workers.
"""

import math

import numba as nb
import numpy as np

# tolerance below which a negative step probability counts as rounding noise
NEG_TOL = 1e-12

_jit = nb.njit(cache=True, nogil=True)


@_jit
def weight_table(h, N, lg):
    """Relative weights ``gamma**-(k - hmin)`` for k = 0..N (limit mode if lg is inf)."""
    hmin = N
    for m in range(h.shape[0]):
        if h[m] < hmin:
            hmin = h[m]
    table = np.zeros(N + 1)
    if math.isinf(lg):
        table[hmin] = 1.0
    else:
        for k in range(hmin, N + 1):
            table[k] = math.exp(-(k - hmin) * lg)
    return table


@_jit
def profile(d, z, h):
    M, N = d.shape
    for m in range(M):
        c = 0
        for i in range(N):
            c += d[m, i] != z[i]
        h[m] = c


@_jit
def agreement(d, z, lg, h, s):
    """Fill ``s[i]`` with the posterior mass of rows agreeing with ``z`` at i."""
    M, N = d.shape
    profile(d, z, h)
    table = weight_table(h, N, lg)
    total = 0.0
    for i in range(N):
        s[i] = 0.0
    for m in range(M):
        w = table[h[m]]
        if w == 0.0:
            continue
        total += w
        for i in range(N):
            if d[m, i] == z[i]:
                s[i] += w
    for i in range(N):
        s[i] /= total


@_jit
def denoise(d, z, lg, h, p):
    """Fill ``p[i, x]`` with the posterior probability that the clean token is x."""
    M, N = d.shape
    profile(d, z, h)
    table = weight_table(h, N, lg)
    total = 0.0
    p[:, :] = 0.0
    for m in range(M):
        w = table[h[m]]
        if w == 0.0:
            continue
        total += w
        for i in range(N):
            p[i, d[m, i]] += w
    for i in range(N):
        for x in range(p.shape[1]):
            p[i, x] /= total


@_jit
def draw(q, u):
    """Inverse-CDF draw from nonnegative, possibly unnormalized weights ``q``."""
    K = q.shape[0]
    total = 0.0
    for x in range(K):
        total += q[x]
    target = u * total
    c = 0.0
    last = 0
    for x in range(K):
        if q[x] > 0.0:
            last = x
        c += q[x]
        if target < c:
            return x
    return last


@_jit
def sanitize(q, clamp):
    """Floor negative entries at zero.

    Returns the number of entries floored below ``-NEG_TOL``, or -1 when such
    an entry is found with clamping disabled.
    """
    n = 0
    for x in range(q.shape[0]):
        if q[x] < 0.0:
            if q[x] < -NEG_TOL:
                if not clamp:
                    return -1
                n += 1
            q[x] = 0.0
    return n


@_jit
def step_rows(probs, u, clamp, out):
    """Sample one token per row of ``probs``; returns the first bad row or -1."""
    N, K = probs.shape
    q = np.empty(K)
    for i in range(N):
        for x in range(K):
            q[x] = probs[i, x]
        if sanitize(q, clamp) < 0:
            return i
        out[i] = draw(q, u[i])
    return -1


@_jit
def invert_rows(d, starts, uniforms, kap, kdot, lg, step, K, clamp, out, clamps):
    """Backward closed-form transport of each start row to time 0.

    Step k evaluates the backward velocity at ``kap[k]`` and samples from
    ``delta_z - step * v``. Returns ``row * N + position`` of the first
    invalid step distribution, or -1. ``clamps[r]`` counts floored entries.
    """
    R, N = starts.shape
    T = kap.shape[0]
    h = np.empty(d.shape[0], np.int64)
    s = np.empty(N)
    q = np.empty(K)
    z = np.empty(N, d.dtype)
    for r in range(R):
        for i in range(N):
            z[i] = starts[r, i]
        for k in range(T):
            agreement(d, z, lg[k], h, s)
            c = kdot[k] / (1.0 + (K - 1) * kap[k])
            for i in range(N):
                a = step * c * s[i]
                zi = z[i]
                for x in range(K):
                    if x == zi:
                        q[x] = 1.0 - a * (K - 1)
                    else:
                        q[x] = a
                n = sanitize(q, clamp)
                if n < 0:
                    return r * N + i
                clamps[r] += n
                z[i] = draw(q, uniforms[r, k, i])
        for i in range(N):
            out[r, i] = z[i]
    return -1


@_jit
def forward_rows(d, starts, uniforms, kap, kdot, lg, step, K, greedy, clamp, out, clamps):
    """Forward closed-form transport from each start row to a data sample.

    ``kap`` has T - 1 entries for the Euler steps; the final draw comes from
    the limit denoiser using ``uniforms[:, T - 1]`` (or argmax if greedy).
    """
    R, N = starts.shape
    T = kap.shape[0] + 1
    h = np.empty(d.shape[0], np.int64)
    p = np.empty((N, K))
    q = np.empty(K)
    z = np.empty(N, d.dtype)
    for r in range(R):
        for i in range(N):
            z[i] = starts[r, i]
        for k in range(T - 1):
            denoise(d, z, lg[k], h, p)
            pref = step * kdot[k] / (1.0 - kap[k])
            for i in range(N):
                zi = z[i]
                for x in range(K):
                    delta = 1.0 if x == zi else 0.0
                    q[x] = delta + pref * (p[i, x] - delta)
                n = sanitize(q, clamp)
                if n < 0:
                    return r * N + i
                clamps[r] += n
                z[i] = draw(q, uniforms[r, k, i])
        denoise(d, z, math.inf, h, p)
        for i in range(N):
            if greedy:
                best = 0
                for x in range(K):
                    if p[i, x] > p[i, best]:
                        best = x
                z[i] = best
            else:
                z[i] = draw(p[i], uniforms[r, T - 1, i])
        for i in range(N):
            out[r, i] = z[i]
    return -1
