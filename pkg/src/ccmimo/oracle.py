"""Brute-force baseline maximizer for the per-transmission rate objective.

Deliberately independent of the production solver: the worst-user rate
is evaluated through the closed-form per-stream MMSE SINR (no explicit
receive vectors), and maximized by plain projected gradient ascent with
numerical gradients and many random restarts.  Only meant for desk-scale
validation problems.
"""

from __future__ import annotations

import numpy as np


def rate_with_ideal_receivers(W, H, groups, q, N0) -> float:
    """Worst-user sum of per-slot multicast rates under optimal linear reception.

    W: (n_streams, L) transmit vectors, stream s carries substream s % q of
    group s // q.  H: (n_users, G, L).  groups: tuples of local user indices.
    """
    n_users = H.shape[0]
    n_streams = W.shape[0]
    rates = np.zeros((n_users, n_streams))
    for u in range(n_users):
        heff = H[u] @ W.T  # (G, n_streams)
        B = heff @ heff.conj().T + N0 * np.eye(H.shape[1])
        X = np.linalg.solve(B, heff)
        x = np.real(np.einsum("gs,gs->s", heff.conj(), X))
        x = np.clip(x, 0.0, 1.0 - 1e-300)
        rates[u] = -np.log2(1.0 - x)  # log2(1 + x/(1-x))

    worst = np.inf
    for u in range(n_users):
        mine = [g for g, T in enumerate(groups) if u in T]
        if not mine:
            continue
        total = 0.0
        for j in range(q):
            total += min(rates[u, g * q + j] for g in mine)
        worst = min(worst, total)
    return float(worst)


def _project(W, P_T):
    p = float(np.sum(np.abs(W) ** 2))
    if p > P_T:
        W = W * np.sqrt(P_T / p)
    return W


def max_rate_projected_gradient(H, groups, q, P_T, N0, restarts=200, seed=0,
                                max_steps=80):
    """Maximize the worst-user rate over the transmit power ball.

    Forward-difference gradient on the real/imaginary parts of all
    transmit vectors, normalized-gradient steps with backtracking, and
    seeded random restarts.  Returns (best rate, best W).
    """
    n_streams = len(groups) * q
    L = H.shape[2]
    scale = np.sqrt(P_T)
    fd = 1e-6 * scale

    def f(vec):
        W = vec.view(np.complex128).reshape(n_streams, L)
        return rate_with_ideal_receivers(_project(W, P_T), H, groups, q, N0)

    best_val, best_W = -np.inf, None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
        W = rng.standard_normal((n_streams, L)) + 1j * rng.standard_normal((n_streams, L))
        W *= np.sqrt(P_T / np.sum(np.abs(W) ** 2))
        vec = np.ascontiguousarray(W).view(np.float64).ravel().copy()
        val = f(vec)
        step = 0.25 * scale
        for _ in range(max_steps):
            grad = np.zeros_like(vec)
            for j in range(vec.size):
                vec[j] += fd
                grad[j] = (f(vec) - val) / fd
                vec[j] -= fd
            norm = np.linalg.norm(grad)
            if norm < 1e-12:
                break
            improved = False
            while step > 1e-7 * scale:
                cand = vec + step * grad / norm
                cval = f(cand)
                if cval > val:
                    vec, val = cand, cval
                    step *= 1.3
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
        if val > best_val:
            W = _project(vec.view(np.complex128).reshape(n_streams, L), P_T)
            best_val, best_W = val, W
    return best_val, best_W
