# Stream-planner tables: how serving-set size, per-user stream count, and
# the substream factor trade off against spatial resources.
#
# Run: python3 demos/02_stream_planning.py

from ccmimo import optimize_dof
from ccmimo.dof import format_scan_table

SCENARIOS = [
    # (L, G, t, note)
    (3, 2, 1, "small setup; serving three users wins"),
    (8, 4, 1, "wide transmitter; four streams per user need q=2 substreams"),
    (5, 4, 1, "transmit side too narrow for four clean streams per user"),
    (7, 4, 2, "large cache gain"),
    (1, 1, 0, "degenerate point-to-point"),
]

for L, G, t, note in SCENARIOS:
    print("=" * 70)
    print(f"L={L} transmit dims, G={G} receive dims, cache gain t={t}  ({note})")
    print(format_scan_table(L, G, t))
    best = optimize_dof(L, G, t)
    print(f"-> chosen: omega={best.omega} beta={best.beta} q={best.q} "
          f"dof={best.dof} exact={'yes' if best.exact else 'no'}")
    if not best.exact:
        print("   (stream count not divisible by the per-user slot count: "
              "part of the last substream slot is idle)")
    print()

print("forcing single-substream operation (q=1) caps the per-user streams:")
for L, G, t, omega in ((8, 4, 1, 3), (2, 2, 1, 2)):
    free = optimize_dof(L, G, t, omega=omega)
    capped = optimize_dof(L, G, t, omega=omega, q=1)
    print(f"  L={L} G={G} t={t} omega={omega}: dof {free.dof} (q={free.q}) "
          f"-> {capped.dof} (q=1)")
