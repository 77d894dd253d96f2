"""How the extension-operator norm ratio grows with the Lipschitz constant M.

Run:  python3 demos/extension_sweep.py
"""
from fracorn.extension import extension_norm_ratio, solve_coefficients
from fracorn.fields import field_library
from fracorn.geometry import Box, Epigraph, LipschitzFn
from fracorn.seminorms import FracParams

P = FracParams(s=0.5, p=2.0, n=2)
u = field_library("shear", {})
box = Box.from_bounds([0.0, 0.0], [1.0, 2.0])

print(f"{'M':>5} {'delta':>10} {'k':>9} {'ratio':>10}")
for M in (0.0, 0.25, 0.5, 1.0):
    dom = Epigraph(LipschitzFn.affine([M], 0.0), box)
    c = solve_coefficients(M, n=2)
    r = extension_norm_ratio(u, dom, c, P, h=1 / 8)
    print(f"{M:5.1f} {c.delta:10.5f} {c.k:9.3f} {r.ratio_X.value:10.4f}")

# delta shrinks like 1/(2+M) while the coefficients grow; the ratio stays finite
# for each M (the window needs room above the graph, hence M <= 1 here).
