"""Full vs projected seminorm for concentrated swirls on either side of ps = 1.

For ps < 1 the projected seminorm cannot control the full one in general; the
counterexamples are not swirls, and this script shows why a naive probe does not
see the gap: on this family W/X stays near 2 in both regimes, drifting slightly
down as the swirl narrows.  Treat the probe as a sanity check on the quotient,
not as a demonstration of the obstruction.

Run:  python3 demos/ps_below_one.py
"""
from fracorn.fields import field_library
from fracorn.geometry import Box
from fracorn.quadrature import make_grid
from fracorn.seminorms import FracParams, gagliardo, projected

grid = make_grid(Box.unit(2), 1 / 32)
for s in (0.2, 0.8):
    P = FracParams(s=s, p=2.0)
    print(f"ps = {P.ps:.1f}")
    for r in (0.2, 0.1, 0.05):
        u = field_library("concentrated", {"scale": r})
        w = gagliardo(u, grid, P).value
        x = projected(u, grid, P).value
        print(f"  scale {r:4.2f}   W {w:10.4e}   X {x:10.4e}   W/X {w / x:7.3f}")
