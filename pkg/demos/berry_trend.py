"""Nodal length variance against its 1/N^2 prediction as the multiplicity grows.

The ratio printed in the last column should drift towards 1 as N increases;
at desk-scale N the lower-order remainder is still visible.

    python3 demos/berry_trend.py [replicates]
"""

import math
import sys

import numpy as np

from arwlab import draw_coefficients, enumerate_frequencies, evaluate_on_grid
from arwlab.geometry import boundary_half_length
from arwlab.sampler import auto_resolution
from arwlab.theory import nodal_length_variance

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 400
print(f"{'n':>6} {'N':>4} {'M':>5}  ratio to prediction")
for n in (325, 1105, 5525):
    fs = enumerate_frequencies(n)
    M = auto_resolution(n)
    x = np.array([boundary_half_length(evaluate_on_grid(draw_coefficients(fs, 777, r), M), 0.0) for r in range(reps)])
    ratio = x.var(ddof=1) / nodal_length_variance(n, fs.multiplicity, fs.mu4)
    print(f"{n:>6} {fs.multiplicity:>4} {M:>5}  {ratio:.3f} +- {ratio * math.sqrt(2 / (reps - 1)):.3f}", flush=True)
