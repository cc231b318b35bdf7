"""Area, half boundary length and Euler characteristic all follow one number, W.

For each replicate the centered norm W of the coefficients is computed, the
field is measured at one level, and each curvature's deviation from its mean
is regressed on W. The fitted slopes land near the predicted ones, and the
residual is a small fraction of the total variance.

    python3 demos/one_variable_drives_all.py [n] [u] [replicates]
"""

import sys

import numpy as np

from arwlab import draw_coefficients, enumerate_frequencies, evaluate_on_grid
from arwlab.chaos import centered_norm, regress_on_w
from arwlab.geometry import measure
from arwlab.sampler import auto_resolution
from arwlab.theory import second_chaos_scale

n = int(sys.argv[1]) if len(sys.argv) > 1 else 325
u = float(sys.argv[2]) if len(sys.argv) > 2 else 1.5
reps = int(sys.argv[3]) if len(sys.argv) > 3 else 200

fs = enumerate_frequencies(n)
M = auto_resolution(n)
w, rows = [], []
for r in range(reps):
    d = draw_coefficients(fs, 1, r)
    m = measure(evaluate_on_grid(d, M), [u])[0]
    w.append(centered_norm(d))
    rows.append((m.area, m.half_boundary, m.euler_morse))
w, rows = np.array(w), np.array(rows, dtype=float)

print(f"n={n} (N={fs.multiplicity}), u={u}, {reps} replicates, grid {M}x{M}")
for k, col in ((2, 0), (1, 1), (0, 2)):
    y = rows[:, col]
    fit = regress_on_w(zip(w, y - y.mean()))
    share = fit.residual_variance / y.var(ddof=1)
    print(f"  L{k}: slope {fit.slope:10.4f}  predicted {second_chaos_scale(k, n, u):10.4f}  residual share {share:.3f}")
print("correlation matrix of (L2, L1, L0):")
print(np.array2string(np.corrcoef(rows.T), precision=3))
