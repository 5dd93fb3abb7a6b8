"""Transmit/receive beamformer design for one multicast transmission.

A transmission serves an omega-user subset with one codeword per
(t+1)-user group, each split into q substreams with its own transmit
vector.  This module provides the LMMSE receive beamformers, per-stream
SINR/MSE bookkeeping, the alternating closed-form/subgradient solver
that maximizes the worst-user sum rate under a total power budget, and a
zero-forcing baseline.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SolverError

LN2 = math.log(2.0)
MU_FLOOR = 1e-12
EPS_FLOOR = 1e-30


# ---------------------------------------------------------------------------
# Stream layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StreamLayout:
    """Group structure of one transmission.

    ``users`` are global user ids; ``groups`` hold local indices into
    ``users``.  Stream s carries substream s % q of group s // q.
    """

    users: tuple[int, ...]
    groups: tuple[tuple[int, ...], ...]
    q: int

    def __post_init__(self):
        nU, nG, q = len(self.users), len(self.groups), self.q
        member_groups = np.zeros((nU, nG), dtype=bool)
        for g, T in enumerate(self.groups):
            for u in T:
                member_groups[u, g] = True
        object.__setattr__(self, "n_users", nU)
        object.__setattr__(self, "n_groups", nG)
        object.__setattr__(self, "n_streams", nG * q)
        object.__setattr__(self, "member_groups", member_groups)
        object.__setattr__(self, "member", np.repeat(member_groups, q, axis=1))
        object.__setattr__(self, "stream_group", np.repeat(np.arange(nG), q))
        object.__setattr__(self, "stream_slot", np.tile(np.arange(q), nG))


def layout_for_subset(plan, i: int) -> StreamLayout:
    """Stream layout of transmission i of a delivery plan."""
    users = plan.serving_subsets[i]
    pos = {k: j for j, k in enumerate(users)}
    groups = tuple(tuple(pos[k] for k in T) for T in plan.groups[i])
    return StreamLayout(users, groups, plan.q)


# ---------------------------------------------------------------------------
# Receivers, SINR, MSE
# ---------------------------------------------------------------------------

def lmmse_receivers(W, H, N0, member=None):
    """MMSE receive vectors for every (user, stream) pair.

    W: (n_streams, L) transmit vectors; H: (n_users, G, L).  Returns
    (n_users, n_streams, G); rows outside ``member`` are zeroed when a
    mask is given.
    """
    if N0 <= 0:
        raise ConfigError(f"N0 must be positive, got {N0}")
    nU, G, _ = H.shape
    heff = np.einsum("ugl,sl->ugs", H, W)
    cov = heff @ heff.conj().transpose(0, 2, 1) + N0 * np.eye(G)
    U = np.linalg.solve(cov, heff).transpose(0, 2, 1)  # (nU, nS, G)
    if member is not None:
        U = np.where(member[:, :, None], U, 0.0)
    return U


def _cross_gains(W, H, U):
    heff = np.einsum("ugl,sl->ugs", H, W)
    return np.einsum("usg,ugt->ust", U.conj(), heff)  # P[u,s,s'] = u_s^H H_u w_s'


def sinr(W, H, U, N0):
    """Per-stream SINR at every user; interference sums over all other streams."""
    P = _cross_gains(W, H, U)
    p2 = np.abs(P) ** 2
    sig = np.einsum("uss->us", p2).copy()
    interf = p2.sum(axis=2) - sig
    den = interf + N0 * np.sum(np.abs(U) ** 2, axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(den > 0, sig / den, 0.0)
    return g


def mse(W, H, U, N0):
    """Quadratic-form estimation error of every stream at every user.

    Equals 1/(1+SINR) exactly when U came from lmmse_receivers for this W.
    """
    P = _cross_gains(W, H, U)
    p2 = np.abs(P) ** 2
    diag = np.einsum("uss->us", P)
    interf = p2.sum(axis=2) - np.abs(diag) ** 2
    return np.abs(1.0 - diag) ** 2 + interf + N0 * np.sum(np.abs(U) ** 2, axis=2)


def sca_coefficients(t_bar):
    """Tangent coefficients of the convex rate-to-MSE map 2**(-t) at t_bar.

    Returns (alpha, zeta) with zeta - alpha * t the tangent line; the
    tangency identity zeta - alpha * t_bar == 2**(-t_bar) holds exactly.
    """
    t_bar = np.asarray(t_bar, dtype=float)
    f = np.exp2(t_bar)
    alpha = LN2 / f
    zeta = (1.0 + t_bar * LN2) / f
    if alpha.ndim == 0:
        return float(alpha), float(zeta)
    return alpha, zeta


# ---------------------------------------------------------------------------
# Rate objective
# ---------------------------------------------------------------------------

def per_user_rates(W, H, layout, N0, U=None):
    """Each served user's sum over substream slots of its worst group rate."""
    if U is None:
        U = lmmse_receivers(W, H, N0, layout.member)
    g = sinr(W, H, U, N0)
    vals = np.log2(1.0 + g).reshape(layout.n_users, layout.n_groups, layout.q)
    masked = np.where(layout.member_groups[:, :, None], vals, np.inf)
    return masked.min(axis=1).sum(axis=1)


def rate_objective(W, H, layout, N0, U=None) -> float:
    """Worst-user rate of one transmission, the quantity the solver maximizes."""
    return float(per_user_rates(W, H, layout, N0, U=U).min())


# ---------------------------------------------------------------------------
# Closed-form primal/dual updates
# ---------------------------------------------------------------------------

def update_tx_beamformers(U, lam, mu, H):
    """Transmit vectors minimizing the weighted-MSE Lagrangian at fixed receivers.

    Stationarity puts the multipliers inside the accumulation matrix:
    (sum_{k,s'} lam[k,s'] b b^H + mu I) w_s = sum_{k in group(s)} lam[k,s] b,
    with b = H_k^H u_{k,s'}.  The (L x L) left-hand matrix is shared by
    all streams and factored once per call.
    """
    B = np.einsum("ugl,usg->usl", H.conj(), U)  # H_u^H u_{u,s}
    A = np.einsum("us,usl,usm->lm", lam, B, B.conj())
    rhs = np.einsum("us,usl->sl", lam, B)
    if mu <= 0 and np.linalg.matrix_rank(A) < A.shape[0]:
        raise SolverError(f"regularizer mu={mu} with rank-deficient accumulation")
    return np.linalg.solve(A + mu * np.eye(A.shape[0]), rhs.T).T


def closed_form_mu(lam, U, P_T) -> float:
    """Power-constraint multiplier from the dual stationarity identity."""
    return float(np.sum(lam * np.sum(np.abs(U) ** 2, axis=2))) / P_T


def tx_power(W) -> float:
    return float(np.sum(np.abs(W) ** 2))


def solve_tx_with_power(U, lam, H, P_T, mode="closed_form"):
    """Transmit update with the multiplier chosen to respect the power budget.

    closed_form: multiplier from the dual identity, refined by bisection
    whenever the resulting power overshoots the budget.  bisection:
    direct search for the multiplier putting total power at P_T (within
    1e-6 relative).  Returns (W, mu, power, stationarity residual).
    """
    if mode not in ("closed_form", "bisection"):
        raise ConfigError(f"unknown mu mode {mode!r}")
    B = np.einsum("ugl,usg->usl", H.conj(), U)
    A = np.einsum("us,usl,usm->lm", lam, B, B.conj())
    rhs = np.einsum("us,usl->sl", lam, B)  # (nS, L)
    rhs_norm = np.linalg.norm(rhs, axis=1)

    if not np.any(rhs_norm > 0):
        mu = max(closed_form_mu(lam, U, P_T), MU_FLOOR)
        return np.zeros_like(rhs), mu, 0.0, 0.0

    evals, Q = np.linalg.eigh(A)
    evals = np.maximum(evals, 0.0)
    Rt = Q.conj().T @ rhs.T  # (L, nS)
    R2 = np.abs(Rt) ** 2

    def w_of(mu):
        return (Q @ (Rt / (evals + mu)[:, None])).T

    def power_of(mu):
        return float(np.sum(R2 / (evals + mu)[:, None] ** 2))

    def bisect():
        lo = MU_FLOOR
        if power_of(lo) <= P_T:
            return lo
        hi = max(1.0, 2 * lo)
        for _ in range(200):
            if power_of(hi) <= P_T:
                break
            hi *= 2.0
        else:
            raise SolverError(f"power bisection bracket failed: power({hi}) > {P_T}")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            p = power_of(mid)
            # half the documented 1e-6 relative window, so the power budget
            # invariant holds strictly even after float rounding
            if abs(p - P_T) <= 5e-7 * P_T:
                return mid
            if p > P_T:
                lo = mid
            else:
                hi = mid
        raise SolverError(
            f"power bisection did not converge: bracket [{lo}, {hi}], "
            f"power {power_of(0.5 * (lo + hi))}, target {P_T}"
        )

    if mode == "bisection":
        mu = bisect()
    else:
        mu = max(closed_form_mu(lam, U, P_T), MU_FLOOR)
        if power_of(mu) > P_T * (1 + 1e-6):
            mu = bisect()

    W = w_of(mu)
    resid = np.linalg.norm(W @ (A + mu * np.eye(A.shape[0])).T - rhs, axis=1)
    rel = float(np.max(resid[rhs_norm > 0] / rhs_norm[rhs_norm > 0]))
    return W, mu, power_of(mu), rel


def update_rates(v, eps, layout, zeta=None):
    """Per-(user, slot) rates as dual-weighted means of the group log rates,
    and the common rate as their weighted per-user aggregate."""
    nU, nG, q = layout.n_users, layout.n_groups, layout.q
    eps_safe = np.clip(eps, EPS_FLOOR, None)
    linv = np.where(layout.member, -np.log2(eps_safe), 0.0)
    v_r = np.where(layout.member, v, 0.0).reshape(nU, nG, q)
    l_r = linv.reshape(nU, nG, q)
    den = v_r.sum(axis=1)
    num = (v_r * l_r).sum(axis=1)
    counts = layout.member_groups.sum(axis=1).astype(float)
    if np.any(den <= 0):
        warnings.warn("all dual weights of a (user, slot) pair hit zero; using uniform weights",
                      RuntimeWarning, stacklevel=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(den > 0, num / den, l_r.sum(axis=1) / counts[:, None])
    if zeta is None:
        r_c = float(np.mean(r.sum(axis=1)))
    else:
        r_c = float(np.sum(np.asarray(zeta) * r.sum(axis=1)))
    return r, r_c


def update_duals(v, eps, r_c, eta, layout, rates=None, variant="common_rate"):
    """Projected subgradient step on the per-stream dual weights.

    After the step each user's weights are renormalized so their sum is
    exactly q, and the MSE multipliers are refreshed from the weights.
    """
    member = layout.member
    eps_safe = np.clip(eps, EPS_FLOOR, None)
    log_eps = np.log2(eps_safe)
    if variant == "common_rate":
        grad = r_c + log_eps
    elif variant == "per_user":
        if rates is None:
            raise ConfigError("per_user gradient variant needs the per-slot rates")
        grad = rates[:, layout.stream_slot] + log_eps
    else:
        raise ConfigError(f"unknown gradient variant {variant!r}")

    v2 = np.where(member, np.maximum(0.0, v + eta * grad), 0.0)
    tot = v2.sum(axis=1)
    dead = tot <= 0
    if np.any(dead):
        warnings.warn("dual weights of a user collapsed to zero; resetting to uniform",
                      RuntimeWarning, stacklevel=2)
        counts = layout.member_groups.sum(axis=1).astype(float)
        v2[dead] = np.where(member[dead], 1.0 / counts[dead, None], 0.0)
        tot = v2.sum(axis=1)
    v2 = v2 * (layout.q / tot)[:, None]
    lam = np.where(member, v2 / (eps_safe * LN2), 0.0)
    return v2, lam


# ---------------------------------------------------------------------------
# Alternating solver
# ---------------------------------------------------------------------------

@dataclass
class SolverOptions:
    """Knobs of the alternating solver; defaults suit desk-scale scenarios."""

    max_outer: int = 30
    max_inner: int = 20
    step_size: float | None = None  # subgradient step, defaults to 0.1 * q
    tol_inner: float = 1e-4
    tol_outer: float = 1e-4
    patience: int = 3  # consecutive sub-tolerance refreshes before stopping
    mu_mode: str = "closed_form"  # or "bisection"
    gradient: str = "common_rate"  # or "per_user"
    user_weights: str = "adaptive"  # or "uniform"
    user_weight_step: float = 0.5
    n_restarts: int = 1
    init_seed: int = 0
    keep_trace: bool = True


@dataclass(eq=False)
class BeamformerState:
    """Final iterates and diagnostics of one solver run."""

    W: np.ndarray
    U: np.ndarray
    lam: np.ndarray
    v: np.ndarray
    mu: float
    t_bar: np.ndarray
    eps: np.ndarray
    rates: np.ndarray  # per-(user, slot) dual-weighted rates of the last inner pass
    r_c: float
    user_priorities: np.ndarray
    user_rates: np.ndarray  # per-user totals from the final SINRs
    objective: float
    power: float
    diagnostics: dict
    trace: list = field(repr=False, default_factory=list)


def group_svd_init(layout: StreamLayout, H, P_T):
    """Structured start: each substream along a right singular vector of its
    group's stacked channel, equal total power P_T."""
    nS, L = layout.n_streams, H.shape[2]
    W = np.zeros((nS, L), dtype=complex)
    for g, T in enumerate(layout.groups):
        stacked = np.vstack([H[u] for u in T])
        _, _, Vh = np.linalg.svd(stacked)
        for j in range(layout.q):
            W[g * layout.q + j] = Vh[min(j, Vh.shape[0] - 1)].conj()
    return W * np.sqrt(P_T / tx_power(W))


def _optimize_single(layout, H, P_T, N0, opt, init_seed, eta, W0=None):
    member = layout.member
    nU, nS = layout.n_users, layout.n_streams
    L = H.shape[2]

    if W0 is not None:
        W = W0.copy()
    else:
        rng = np.random.default_rng(np.random.SeedSequence(init_seed))
        W = rng.standard_normal((nS, L)) + 1j * rng.standard_normal((nS, L))
        W *= np.sqrt(P_T / tx_power(W))

    v = np.where(member, 1.0 / nU, 0.0)
    lam = v.copy()
    z = np.full(nU, 1.0 / nU)  # per-user priority weights
    mu = 1.0
    eps = np.where(member, 1.0, 0.0)
    t_bar = np.zeros_like(eps)
    rates = np.zeros((nU, layout.q))
    r_c = 0.0
    trace: list = []
    diag = {
        "power_overrun": 0.0,
        "dual_norm_err": 0.0,
        "stationarity": 0.0,
        "outer_decrease": 0.0,
        "outer_iterations": 0,
    }

    def check_finite(name, arr):
        if not np.all(np.isfinite(arr)):
            raise SolverError(f"non-finite values in {name}", trace=trace)

    obj_prev = None
    stall = 0
    for outer in range(1, opt.max_outer + 1):
        U = lmmse_receivers(W, H, N0, member)
        obj = rate_objective(W, H, layout, N0, U=U)
        diag["outer_iterations"] = outer
        if obj_prev is not None:
            diag["outer_decrease"] = max(diag["outer_decrease"], obj_prev - obj)
            stall = stall + 1 if abs(obj - obj_prev) < opt.tol_outer else 0
            if stall >= opt.patience:
                obj_prev = obj
                break
        obj_prev = obj

        best_inner, best_W = obj, W
        inner_prev = None
        for inner in range(1, opt.max_inner + 1):
            lam_eff = lam * (z * nU)[:, None]
            W_it, mu, power, resid = solve_tx_with_power(U, lam_eff, H, P_T, mode=opt.mu_mode)
            check_finite("transmit vectors", W_it)
            diag["stationarity"] = max(diag["stationarity"], resid)
            diag["power_overrun"] = max(diag["power_overrun"], (power - P_T) / P_T)

            eps = mse(W_it, H, U, N0)
            check_finite("stream MSEs", eps)
            t_bar = np.where(member, -np.log2(np.clip(eps, EPS_FLOOR, None)), 0.0)
            rates, r_c = update_rates(v, eps, layout)
            v, lam = update_duals(v, eps, r_c, eta, layout, rates=rates,
                                  variant=opt.gradient)
            norm_err = float(np.max(np.abs(v.sum(axis=1) / layout.q - 1.0)))
            diag["dual_norm_err"] = max(diag["dual_norm_err"], norm_err)
            if opt.user_weights == "adaptive" and nU > 1:
                # exponentiated subgradient on the common-rate constraint:
                # users below the common rate gain priority
                z = z * np.exp(opt.user_weight_step * (r_c - rates.sum(axis=1)))
                z = np.maximum(z, 1e-12)
                z /= z.sum()

            obj_in = rate_objective(W_it, H, layout, N0, U=U)
            if opt.keep_trace:
                trace.append({
                    "outer": outer, "inner": inner, "objective": obj_in,
                    "power": power, "mu": mu, "stationarity": resid, "r_c": r_c,
                })
            if obj_in > best_inner:
                best_inner, best_W = obj_in, W_it
            if inner_prev is not None and abs(obj_in - inner_prev) < opt.tol_inner:
                break
            inner_prev = obj_in
        W = best_W

    U = lmmse_receivers(W, H, N0, member)
    user_totals = per_user_rates(W, H, layout, N0, U=U)
    objective = float(user_totals.min())
    diag["outer_decrease"] = max(diag["outer_decrease"], (obj_prev or 0.0) - objective)
    eps_final = mse(W, H, U, N0)
    return BeamformerState(
        W=W, U=U, lam=lam, v=v, mu=mu,
        t_bar=np.where(member, -np.log2(np.clip(eps_final, EPS_FLOOR, None)), 0.0),
        eps=eps_final, rates=rates, r_c=r_c,
        user_priorities=z, user_rates=user_totals, objective=objective,
        power=tx_power(W), diagnostics=diag, trace=trace,
    )


def optimize(layout: StreamLayout, H, P_T, N0, options: SolverOptions | None = None):
    """Alternating maximization of the worst-user rate of one transmission.

    Outer iterations refresh the MMSE receive vectors for the incumbent
    transmit set; inner iterations run the closed-form transmit update,
    quadratic-MSE evaluation, weighted rate aggregation, and projected
    subgradient dual steps at fixed receivers.  The incumbent only ever
    moves to an inner iterate that improves the worst-user rate under
    the current receivers, so the objective seen after each receiver
    refresh is non-decreasing.  With n_restarts > 1 the whole procedure
    runs from several seeded initializations and keeps the best result
    (invariant diagnostics are merged across restarts).

    Returns a BeamformerState whose ``objective`` is the worst-user rate
    recomputed from the final transmit and receive vectors.
    """
    opt = options or SolverOptions()
    if H.shape[0] != layout.n_users:
        raise ConfigError(f"channel set has {H.shape[0]} users, layout expects {layout.n_users}")
    if opt.user_weights not in ("adaptive", "uniform"):
        raise ConfigError(f"unknown user_weights mode {opt.user_weights!r}")
    eta = opt.step_size if opt.step_size is not None else 0.1 * layout.q

    best = None
    merged = None
    for r in range(max(1, opt.n_restarts)):
        seed_r = int(np.random.SeedSequence(opt.init_seed, spawn_key=(r,)).generate_state(1)[0])
        # two structured starts (group-SVD, zero-forcing), then random ones;
        # the nulling start matters at high SNR where interference dominates
        if r == 0:
            W0 = group_svd_init(layout, H, P_T)
        elif r == 1 and opt.n_restarts > 1:
            W0 = zf_beamformers(layout, H, P_T, N0).W
        else:
            W0 = None
        state = _optimize_single(layout, H, P_T, N0, opt, seed_r, eta, W0=W0)
        if merged is None:
            merged = dict(state.diagnostics)
        else:
            for key in ("power_overrun", "dual_norm_err", "stationarity", "outer_decrease"):
                merged[key] = max(merged[key], state.diagnostics[key])
            merged["outer_iterations"] += state.diagnostics["outer_iterations"]
        if best is None or state.objective > best.objective:
            best = state
    best.diagnostics.update(merged)
    return best


# ---------------------------------------------------------------------------
# Zero-forcing baseline
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ZfResult:
    """Zero-forcing transmit set with the receivers used to build it."""

    W: np.ndarray
    mf_receivers: np.ndarray  # matched-filter receivers the nulling was built on
    receivers: np.ndarray  # final MMSE receivers for rate evaluation
    fallback: tuple[bool, ...]  # streams that fell back to regularized inversion


def zf_beamformers(layout: StreamLayout, H, P_T, N0) -> ZfResult:
    """One-shot nulling baseline: matched-filter receivers, then per-stream
    null-space transmit vectors, then MMSE receivers.

    Each stream's transmit vector is forced orthogonal to the effective
    rows of every other stream's intended receivers; when that null
    space is empty the stream falls back to regularized inversion with
    ridge N0 * n_streams / P_T.  Streams get equal power P_T / n_streams.
    """
    nU, nS = layout.n_users, layout.n_streams
    G, L = H.shape[1], H.shape[2]
    q = layout.q

    # initial transmit directions: right singular vectors of each group's stacked channel
    dirs = np.zeros((nS, L), dtype=complex)
    for g, T in enumerate(layout.groups):
        stacked = np.vstack([H[u] for u in T])
        _, _, Vh = np.linalg.svd(stacked)
        for j in range(q):
            dirs[g * q + j] = Vh[min(j, Vh.shape[0] - 1)].conj()

    mf = np.zeros((nU, nS, G), dtype=complex)
    for s in range(nS):
        for u in layout.groups[layout.stream_group[s]]:
            h = H[u] @ dirs[s]
            n = np.linalg.norm(h)
            mf[u, s] = h / n if n > 0 else h

    ridge = N0 * nS / P_T
    B = np.einsum("ugl,usg->usl", H.conj(), mf)  # H_u^H u_{u,s}
    A_reg = np.einsum("usl,usm->lm", B, B.conj()) + ridge * np.eye(L)

    W = np.zeros((nS, L), dtype=complex)
    fallback = []
    per_stream = P_T / nS
    for s in range(nS):
        rows = [mf[u, s2].conj() @ H[u]
                for s2 in range(nS) if s2 != s
                for u in layout.groups[layout.stream_group[s2]]]
        d = sum(H[u].conj().T @ mf[u, s] for u in layout.groups[layout.stream_group[s]])
        w = None
        if rows:
            C = np.array(rows)
            _, svals, Vh = np.linalg.svd(C)
            tol = max(C.shape) * np.finfo(float).eps * (svals[0] if svals.size else 0.0)
            rank = int(np.sum(svals > tol))
            null = Vh[rank:].conj().T
            if null.shape[1] > 0:
                w = null @ (null.conj().T @ d)
                if np.linalg.norm(w) <= 1e-9 * np.linalg.norm(d):
                    w = None
        else:
            w = d.astype(complex)
        used_fallback = w is None
        if used_fallback:
            w = np.linalg.solve(A_reg, d)
        fallback.append(used_fallback)
        W[s] = w * np.sqrt(per_stream) / np.linalg.norm(w)

    final = lmmse_receivers(W, H, N0, layout.member)
    return ZfResult(W=W, mf_receivers=mf, receivers=final, fallback=tuple(fallback))


def zf_leakage(result: ZfResult, layout: StreamLayout, H) -> float | None:
    """Worst residual cross-stream power at the receivers used for nulling.

    Only pairs actually nulled (streams built from a non-empty null
    space) are counted; returns None when every stream fell back.
    """
    worst = None
    for s in range(layout.n_streams):
        if result.fallback[s]:
            continue
        for s2 in range(layout.n_streams):
            if s2 == s:
                continue
            for u in layout.groups[layout.stream_group[s2]]:
                leak = abs(result.mf_receivers[u, s2].conj() @ H[u] @ result.W[s]) ** 2
                worst = leak if worst is None else max(worst, leak)
    return worst
