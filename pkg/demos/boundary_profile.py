"""Boundary-distance integral above a kinked graph: log-log slope vs -ps.

Run:  python3 demos/boundary_profile.py
"""
import numpy as np

from fracorn.extension import solve_coefficients
from fracorn.geometry import LipschitzFn
from fracorn.seminorms import FracParams, lemma_a2_profile, loglog_slope

# |x|/2, with knots beyond the integration radius
f = LipschitzFn.piecewise_linear([-1e4, 0.0, 1e4], [5e3, 0.0, 5e3])
lam = solve_coefficients(1.0 / 2.0, n=2).lam
# points straight above the kink, approaching the graph
zs = np.array([[0.0, d] for d in np.geomspace(1e-3, 1e-1, 7)])
for s, p in ((0.3, 2.0), (0.5, 2.0), (0.7, 3.0)):
    P = FracParams(s, p)
    d, vals = zip(*lemma_a2_profile(f, lam, P, zs))
    print(f"s={s} p={p}: slope {loglog_slope(d, vals):+.4f}  (expected {-P.ps:+.4f})")
