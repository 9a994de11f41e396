"""Falling-edge pulses against symmetric ones at equal emission probability.

A coarse 8 x 8 scan over three areas; the acceptance test uses 20 x 20
over the full area list.  With so few areas the symmetric frontier has
gaps, so the largest single-bin gain here overstates the real improvement.
"""
import numpy as np

from cavswap import TABLE1
from cavswap.sweep import frontier_gain, run_asymmetric_scan, write_frontier_csv

scan = run_asymmetric_scan(TABLE1["a"], (0.05, 20.0, 8), (0.02, 1.0, 8), areas=[0.7, 1.0, 3.0],
                           symmetric_range=(0.05, 50.0, 60))
print(len(scan.samples), "samples,", len(scan.failures), "failed")

gains = [(b, g) for b, g, _ in frontier_gain(scan)]
b, g = max(gains, key=lambda x: x[1])
print(f"largest gain {g:+.4f} in the P_ex bin starting at {b:.2f}")
print("bins with gain > 0.005:", int(np.sum([x > 0.005 for _, x in gains])))
print("frontier written to", write_frontier_csv(scan, "out_scan"))
