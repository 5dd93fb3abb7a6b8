"""Serving-set size and stream-count selection for maximum spatial DoF.

Picks how many users to serve per transmission (omega), how many
parallel streams each of them decodes (beta), and the substream factor q
that stretches the per-user multicast slots far enough to carry beta
streams.  DoF here means omega * beta: the number of interference-free
streams per transmission at high SNR.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, floor

from .errors import ConfigError, PlanError


def stream_bound(L: int, G: int, t: int, omega: int) -> float:
    """Largest number of parallel streams a served user can decode.

    Capped by the receive dimensions G and by what the transmit side can
    keep separable across the omega-user serving set.
    """
    if not t + 1 <= omega <= t + L:
        raise ConfigError(f"serving-set size {omega} outside [{t + 1}, {t + L}]")
    slots = comb(omega - 1, t)  # multicast slots per user per transmission
    return min(float(G), L * slots / (1.0 + (omega - t - 1) * slots))


def substream_count(beta: int, omega: int, t: int) -> int:
    """Smallest q with q * C(omega-1, t) >= beta."""
    slots = comb(omega - 1, t)
    return -(-beta // slots)


@dataclass(frozen=True)
class DofPlan:
    """One candidate operating point of the stream planner."""

    omega: int
    beta: int
    q: int
    dof: int
    beta_bound_real: float
    exact: bool  # beta divisible by the per-user slot count C(omega-1, t)


def _candidate(L: int, G: int, t: int, omega: int, beta=None, q=None) -> DofPlan:
    bound = stream_bound(L, G, t, omega)
    slots = comb(omega - 1, t)
    cap = min(G, floor(bound))
    if beta is None:
        b = min(cap, q * slots) if q is not None else cap
        b = max(b, 1) if cap >= 1 else b
    else:
        b = int(beta)
        if b > cap:
            raise PlanError(f"beta={b} exceeds the feasible bound {cap} at omega={omega}")
    if b < 1:
        raise PlanError(f"no feasible stream count at omega={omega} (bound {bound:.3f})")
    qq = substream_count(b, omega, t) if q is None else int(q)
    if qq * slots < b:
        raise PlanError(f"q={qq} cannot carry beta={b} at omega={omega}")
    return DofPlan(omega, b, qq, omega * b, bound, b % slots == 0)


def scan_dof(L: int, G: int, t: int) -> list[DofPlan]:
    """All candidate serving-set sizes with their best feasible stream counts."""
    out = []
    for omega in range(t + 1, t + L + 1):
        try:
            out.append(_candidate(L, G, t, omega))
        except PlanError:
            continue
    return out


def optimize_dof(L: int, G: int, t: int, omega=None, beta=None, q=None) -> DofPlan:
    """Best operating point: max DoF, ties broken toward smaller serving sets.

    Fixing ``omega`` restricts the scan to that serving-set size; fixing
    ``beta`` or ``q`` pins the stream count or substream factor (a fixed
    q caps beta at q * C(omega-1, t)).
    """
    if L < 1 or G < 1 or t < 0:
        raise ConfigError(f"need L >= 1, G >= 1, t >= 0, got L={L}, G={G}, t={t}")
    omegas = [omega] if omega is not None else range(t + 1, t + L + 1)
    best = None
    for om in omegas:
        try:
            cand = _candidate(L, G, t, om, beta=beta, q=q)
        except (PlanError, ConfigError):
            if omega is not None:
                raise
            continue
        # max DoF; ties broken toward smaller omega, then exact substream splits
        key = (-cand.dof, cand.omega, not cand.exact)
        if best is None or key < best[0]:
            best = (key, cand)
    if best is None:
        raise PlanError(f"no feasible operating point for L={L}, G={G}, t={t}")
    return best[1]


def format_scan_table(L: int, G: int, t: int) -> str:
    """Human-readable planner table, one row per candidate serving-set size."""
    rows = ["omega  bound    beta  q  dof  exact"]
    for c in scan_dof(L, G, t):
        rows.append(
            f"{c.omega:5d}  {c.beta_bound_real:7.3f}  {c.beta:4d}  {c.q}  {c.dof:3d}  "
            f"{'yes' if c.exact else 'no'}"
        )
    return "\n".join(rows)
