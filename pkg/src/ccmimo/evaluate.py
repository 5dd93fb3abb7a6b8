"""Rate aggregation and Monte Carlo SNR sweeps across beamforming schemes.

A sweep draws seeded channel realizations, optimizes (or zero-forces)
every transmission of the delivery plan, and aggregates the whole-plan
symmetric rate per scheme and SNR point.  All randomness flows from one
top-level seed through named substreams (0: channels, 1: solver inits,
2: subset subsampling), so repeated runs are byte-identical.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import oracle
from .beamforming import (BeamformerState, SolverOptions, layout_for_subset,
                          optimize, rate_objective, zf_beamformers)
from .channel import sample_channels, snr_to_power
from .config import NetworkConfig
from .delivery import DeliveryPlan
from .errors import ConfigError, InputError, SolverError

SCHEMES = ("kkt_lmmse", "zf", "oracle_smallscale")

DB_PER_BIT = np.log2(10.0) / 10.0  # high-SNR slope of log2(1+snr) per dB


def transmission_rate(state, layout, H, N0) -> float:
    """Worst-user rate of one transmission, recomputed from final beamformers.

    Accepts a solver state or a bare transmit matrix; receivers are
    re-derived as MMSE for the evaluation.
    """
    W = state.W if isinstance(state, BeamformerState) else state
    return rate_objective(W, H, layout, N0)


def symmetric_rate(rates, K: int, theta: int) -> float:
    """Whole-plan symmetric rate: K * theta over the summed inverse rates."""
    rates = [float(r) for r in rates]
    if not rates:
        raise InputError("no per-transmission rates given")
    if any(r <= 0 for r in rates):
        raise InputError(f"non-positive per-transmission rate in {rates}")
    return K * theta / sum(1.0 / r for r in rates)


def fitted_stream_count(snr_db, mean_rates) -> float:
    """Least-squares slope of rate vs SNR in dB, in units of one stream's slope."""
    slope = np.polyfit(np.asarray(snr_db, float), np.asarray(mean_rates, float), 1)[0]
    return float(slope / DB_PER_BIT)


# ---------------------------------------------------------------------------
# Sweep machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    scheme: str
    snr_db: float
    mean_rsym: float
    stderr: float
    n_ok: int
    n_failed: int


@dataclass(eq=False)
class RateReport:
    """All rates of one sweep plus the aggregated per-point statistics."""

    meta: dict
    points: list = field(default_factory=list)
    rsym: dict = field(default_factory=dict)  # (scheme, snr_db) -> per-realization values
    rates: dict = field(default_factory=dict)  # (scheme, snr_db, realization) -> per-tx rates

    def to_csv(self) -> str:
        lines = ["scheme,snr_db,mean_rsym,stderr,n_ok,n_failed,seed"]
        seed = self.meta["seed"]
        for p in self.points:
            lines.append(
                f"{p.scheme},{p.snr_db:g},{p.mean_rsym:.12g},{p.stderr:.12g},"
                f"{p.n_ok},{p.n_failed},{seed}"
            )
        return "\n".join(lines) + "\n"

    def plot_data(self) -> str:
        """Gnuplot-style columns: snr_db then one mean-rate column per scheme."""
        schemes = self.meta["schemes"]
        by_key = {(p.scheme, p.snr_db): p.mean_rsym for p in self.points}
        lines = ["# symmetric rate vs SNR", "# snr_db " + " ".join(schemes)]
        for snr in self.meta["snr_db"]:
            vals = " ".join(f"{by_key.get((s, snr), float('nan')):.12g}" for s in schemes)
            lines.append(f"{snr:g} {vals}")
        return "\n".join(lines) + "\n"

    def mean_curve(self, scheme):
        return [p.mean_rsym for p in self.points if p.scheme == scheme]


def _channel_seed(seed: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(0,)).generate_state(1)[0])


def _init_seed(seed, scheme_idx, snr_idx, realization, subset_idx) -> int:
    key = (1, scheme_idx, snr_idx, realization, subset_idx)
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


def _sweep_job(args):
    """One (SNR point, realization): all schemes over the selected subsets."""
    (config, plan, schemes, snr_db, snr_idx, realization, subsets, options,
     seed, oracle_restarts) = args
    P_T = snr_to_power(snr_db, config.N0)
    cs = sample_channels(_channel_seed(seed), realization, config.K, config.G, config.L)
    diag = {"power_overrun": 0.0, "dual_norm_err": 0.0, "stationarity": 0.0,
            "outer_decrease": 0.0}
    results = []
    for scheme_idx, scheme in enumerate(schemes):
        rates: list | None = []
        for subset_idx in subsets:
            layout = layout_for_subset(plan, subset_idx)
            Hs = cs.H[list(layout.users)]
            iseed = _init_seed(seed, scheme_idx, snr_idx, realization, subset_idx)
            try:
                if scheme == "kkt_lmmse":
                    st = optimize(layout, Hs, P_T, config.N0,
                                  options=replace(options, init_seed=iseed, keep_trace=False))
                    for key in diag:
                        diag[key] = max(diag[key], st.diagnostics[key])
                    r = st.objective
                elif scheme == "zf":
                    res = zf_beamformers(layout, Hs, P_T, config.N0)
                    r = rate_objective(res.W, Hs, layout, config.N0)
                elif scheme == "oracle_smallscale":
                    r, _ = oracle.max_rate_projected_gradient(
                        Hs, layout.groups, layout.q, P_T, config.N0,
                        restarts=oracle_restarts, seed=iseed)
                else:
                    raise ConfigError(f"unknown scheme {scheme!r}")
            except SolverError:
                rates = None
                break
            if not r > 0:
                rates = None
                break
            rates.append(float(r))
        results.append((scheme, None if rates is None else tuple(rates)))
    return snr_idx, realization, results, diag


def monte_carlo_sweep(config: NetworkConfig, plan: DeliveryPlan, schemes, snr_db,
                      n_realizations: int, seed: int, subset_sample=None,
                      options: SolverOptions | None = None, oracle_restarts: int = 40,
                      workers: int = 1) -> RateReport:
    """Paired Monte Carlo comparison of delivery schemes over an SNR grid.

    Schemes share channel realizations at each (SNR, realization) pair.
    ``subset_sample`` optimizes only that many serving subsets (seeded
    uniform pick) and extrapolates the summed inverse rates by
    n_transmissions / sample size; the report records the choice.
    Realizations where a solver fails or a rate is non-positive are
    discarded and counted.  Deterministic for a fixed seed.
    """
    schemes = list(schemes)
    snr_db = [float(s) for s in snr_db]
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
    options = options or SolverOptions()

    n_tx = plan.n_transmissions
    if subset_sample is None or subset_sample >= n_tx:
        subsets = tuple(range(n_tx))
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
        subsets = tuple(sorted(rng.choice(n_tx, size=subset_sample, replace=False).tolist()))
    factor = n_tx / len(subsets)

    t0 = time.time()
    jobs = [
        (config, plan, schemes, snr, i, r, subsets, options, seed, oracle_restarts)
        for i, snr in enumerate(snr_db)
        for r in range(n_realizations)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_sweep_job, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        raw = [_sweep_job(j) for j in jobs]

    theta = plan.theta
    report = RateReport(meta={
        "config": {f: getattr(config, f) for f in
                   ("K", "L", "G", "N", "M", "file_size_bits", "N0")},
        "omega": plan.omega, "beta": plan.beta, "q": plan.q,
        "schemes": schemes, "snr_db": snr_db,
        "n_realizations": n_realizations, "seed": seed,
        "n_transmissions": n_tx, "subsets_used": list(subsets),
        "extrapolation_factor": factor,
        "solver_diagnostics": {"power_overrun": 0.0, "dual_norm_err": 0.0,
                               "stationarity": 0.0, "outer_decrease": 0.0},
    })

    for snr_idx, realization, results, diag in raw:
        snr = snr_db[snr_idx]
        for key, val in diag.items():
            cur = report.meta["solver_diagnostics"]
            cur[key] = max(cur[key], val)
        for scheme, rates in results:
            slot = report.rsym.setdefault((scheme, snr), [None] * n_realizations)
            if rates is None:
                continue
            report.rates[(scheme, snr, realization)] = rates
            inv = factor * sum(1.0 / r for r in rates)
            slot[realization] = config.K * theta / inv

    for scheme in schemes:
        for snr in snr_db:
            vals = report.rsym.get((scheme, snr), [None] * n_realizations)
            ok = [v for v in vals if v is not None]
            n_ok, n_failed = len(ok), n_realizations - len(ok)
            mean = float(np.mean(ok)) if ok else float("nan")
            stderr = float(np.std(ok, ddof=1) / np.sqrt(n_ok)) if n_ok >= 2 else 0.0
            report.points.append(SweepPoint(scheme, snr, mean, stderr, n_ok, n_failed))

    report.meta["runtime_s"] = time.time() - t0
    return report
