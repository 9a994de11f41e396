"""Constant-area sigma sweeps for row (a) and the loop orientation of each curve.

Writes one CSV per area to ./out_tradeoff.
"""
import sys

from cavswap import TABLE1
from cavswap.sweep import SweepSettings, run_tradeoff_sweep, write_curve_csv

out = sys.argv[1] if len(sys.argv) > 1 else "out_tradeoff"
areas = [0.5, 0.7, 1.0, 3.0]
# 20 points per decade keeps this under a minute
curves = run_tradeoff_sweep(TABLE1["a"], areas, (0.01, 50.0, 75), label="a",
                            settings=SweepSettings(threads=1))

for c in curves:
    path = write_curve_csv(c, out)
    best = max(c.points, key=lambda p: p.fidelity)
    print(f"S={c.pulse_area:<4} {c.orientation:17s} max P_ex={c.p_ex.max():.3f}  "
          f"best F={best.fidelity:.4f} at sigma={best.sigma:.3g}  -> {path}")
