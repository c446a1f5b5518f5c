"""Dual coordinate descent for the bias-free box-constrained SVM dual.

Solves ``min_b 0.5 b'Qb - sum(b)  s.t. 0 <= b_k <= upper_k`` by exact
single-coordinate minimisation, with shrinking of variables stuck at a
bound. ``Q`` is never formed for the linear and
pair-kernel modes; the state vector carries what the gradient needs.

mode 0  linear       Q = D D'                 state = w = D'b        (p,)
mode 1  pair kernel  Q_kl from player kernel  state = u = utilities  (n,)
mode 2  dense        Q given                  state = Qb             (m,)
"""

import numpy as np
from numba import njit

LINEAR, PAIR, DENSE = 0, 1, 2


@njit(cache=True, nogil=True)
def _grad(mode, k, D, Kp, Q, a, b, state):
    if mode == 0:
        g = 0.0
        for c in range(D.shape[1]):
            g += state[c] * D[k, c]
        return g - 1.0
    if mode == 1:
        return state[a[k]] - state[b[k]] - 1.0
    return state[k] - 1.0


@njit(cache=True, nogil=True)
def _diag(mode, k, D, Kp, Q, a, b):
    if mode == 0:
        s = 0.0
        for c in range(D.shape[1]):
            s += D[k, c] * D[k, c]
        return s
    if mode == 1:
        return Kp[a[k], a[k]] + Kp[b[k], b[k]] - 2.0 * Kp[a[k], b[k]]
    return Q[k, k]


@njit(cache=True, nogil=True)
def _apply(mode, k, delta, D, Kp, Q, a, b, state):
    if mode == 0:
        for c in range(D.shape[1]):
            state[c] += delta * D[k, c]
    elif mode == 1:
        ak, bk = a[k], b[k]
        for i in range(Kp.shape[0]):
            state[i] += delta * (Kp[i, ak] - Kp[i, bk])
    else:
        for i in range(Q.shape[0]):
            state[i] += delta * Q[i, k]


@njit(cache=True, nogil=True)
def relative_gap(mode, m, D, Kp, Q, a, b, upper, beta, state):
    """(primal - dual) / |primal| for the current iterate."""
    quad = 0.0
    hinge = 0.0
    total = 0.0
    for k in range(m):
        margin = _grad(mode, k, D, Kp, Q, a, b, state) + 1.0
        quad += beta[k] * margin
        if margin < 1.0:
            hinge += upper[k] * (1.0 - margin)
        total += beta[k]
    primal = 0.5 * quad + hinge
    gap = quad + hinge - total
    return gap / max(abs(primal), 1e-300)


@njit(cache=True, nogil=True)
def _next(rng):
    # splitmix64 step; rng is a 1-element uint64 array so the stream stays local
    rng[0] += np.uint64(0x9E3779B97F4A7C15)
    z = rng[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def dcd(mode, m, D, Kp, Q, a, b, upper, tol, gap_tol, max_sweeps, beta, state, seed):
    """Run coordinate descent in place. Returns (sweeps, max_violation, converged).

    Stops when the largest projected-gradient (KKT) violation is <= ``tol``,
    or, if ``gap_tol > 0``, when the relative duality gap (checked every fifth
    sweep, it costs as much as one) is <= ``gap_tol``.
    Each sweep visits the active variables in a fresh permutation drawn from
    a private generator seeded by ``seed``.
    """
    rng = np.zeros(1, dtype=np.uint64)
    rng[0] = np.uint64(seed)
    active = np.arange(m)
    n_active = m
    pg_max_old = np.inf
    pg_min_old = -np.inf
    sweeps = 0
    violation = np.inf
    converged = False
    while sweeps < max_sweeps:
        sweeps += 1
        pg_max_new = -np.inf
        pg_min_new = np.inf
        max_abs = 0.0
        for s in range(n_active - 1, 0, -1):
            r = np.int64(_next(rng) % np.uint64(s + 1))
            t = active[s]
            active[s] = active[r]
            active[r] = t
        s = 0
        while s < n_active:
            k = active[s]
            g = _grad(mode, k, D, Kp, Q, a, b, state)
            pg = 0.0
            if beta[k] <= 0.0:
                if g > pg_max_old:
                    n_active -= 1
                    active[s] = active[n_active]
                    active[n_active] = k
                    continue
                if g < 0.0:
                    pg = g
            elif beta[k] >= upper[k]:
                if g < pg_min_old:
                    n_active -= 1
                    active[s] = active[n_active]
                    active[n_active] = k
                    continue
                if g > 0.0:
                    pg = g
            else:
                pg = g
            if pg > pg_max_new:
                pg_max_new = pg
            if pg < pg_min_new:
                pg_min_new = pg
            if abs(pg) > max_abs:
                max_abs = abs(pg)
            if pg != 0.0:
                qkk = _diag(mode, k, D, Kp, Q, a, b)
                old = beta[k]
                if qkk > 1e-12:
                    new = old - g / qkk
                    if new < 0.0:
                        new = 0.0
                    elif new > upper[k]:
                        new = upper[k]
                else:
                    # flat direction: objective decreases linearly towards the upper bound
                    new = upper[k] if g < 0.0 else 0.0
                if new != old:
                    beta[k] = new
                    _apply(mode, k, new - old, D, Kp, Q, a, b, state)
            s += 1

        if max_abs <= tol:
            if n_active == m:
                violation = max_abs
                converged = True
                break
            # re-check everything before declaring convergence
            n_active = m
            pg_max_old = np.inf
            pg_min_old = -np.inf
            continue
        violation = max_abs
        if gap_tol > 0.0 and sweeps % 5 == 0 and relative_gap(mode, m, D, Kp, Q, a, b, upper, beta, state) <= gap_tol:
            converged = True
            break
        pg_max_old = pg_max_new if pg_max_new > 0.0 else np.inf
        pg_min_old = pg_min_new if pg_min_new < 0.0 else -np.inf
    return sweeps, violation, converged
