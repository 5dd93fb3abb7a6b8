# Desk-scale Monte Carlo sweep: symmetric rate vs SNR for the optimized
# beamformers against the zero-forcing lower baseline, and the multistream
# (q = 2) gain over single-substream operation.
#
# Writes sweep CSV / plot data under demos/out/.
# Run: python3 demos/04_snr_sweep.py            (a few minutes single-core)

import os

from ccmimo import (NetworkConfig, SolverOptions, monte_carlo_sweep,
                    plan_transmissions)

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)
SNRS = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
REALIZATIONS = 10  # bump for smoother curves

print("scheme comparison: K=4 users, L=3/G=2 antennas, cache gain t=1, omega=3")
cfg = NetworkConfig(K=4, L=3, G=2, N=4, M=1)
plan = plan_transmissions(cfg, 3, 2, 1)
rep = monte_carlo_sweep(cfg, plan, ["kkt_lmmse", "zf"], SNRS, REALIZATIONS,
                        seed=11, options=SolverOptions(n_restarts=3, max_outer=40))
with open(os.path.join(OUT, "schemes.csv"), "w") as fh:
    fh.write(rep.to_csv())
with open(os.path.join(OUT, "schemes.dat"), "w") as fh:
    fh.write(rep.plot_data())
print(rep.to_csv())

print("multistream gain: K=4, L=G=2, omega=2, q=2 vs q=1")
cfg = NetworkConfig(K=4, L=2, G=2, N=4, M=1)
opts = SolverOptions(n_restarts=3, max_outer=60, gradient="per_user")
curves = {}
for beta, q in ((2, 2), (1, 1)):
    plan = plan_transmissions(cfg, 2, beta, q)
    rep = monte_carlo_sweep(cfg, plan, ["kkt_lmmse"], SNRS, REALIZATIONS,
                            seed=13, options=opts)
    curves[q] = rep.mean_curve("kkt_lmmse")
    with open(os.path.join(OUT, f"multistream_q{q}.dat"), "w") as fh:
        fh.write(rep.plot_data())

print("snr_db  q=2      q=1      ratio")
for i, snr in enumerate(SNRS):
    print(f"{snr:6g}  {curves[2][i]:7.3f}  {curves[1][i]:7.3f}  "
          f"{curves[2][i] / curves[1][i]:5.2f}")
print(f"\nwrote CSV and gnuplot data under {OUT}/")
print("plot with: gnuplot -e \"plot 'schemes.dat' using 1:2 with lines, "
      "'' using 1:3 with lines\"")
