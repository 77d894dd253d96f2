"""Korn constants on the unit square: polynomial degree and mesh refinement.

Run:  python3 demos/korn_constants.py
"""
from fracorn.fields import make_basis
from fracorn.geometry import Box
from fracorn.korn import (assemble_gram, basis_indices_for_degree, estimate_korn1_constant,
                          estimate_korn2_constant, korn_poincare_constant)
from fracorn.quadrature import make_grid
from fracorn.seminorms import FracParams

dom = Box.unit(2)
P = FracParams(s=0.5, p=2.0, n=2)
basis = make_basis(dom, 3)

print(f"{'h':>8} {'K':>3} {'C2':>10} {'C1':>10} {'C_KP':>10}")
for h in (1 / 8, 1 / 16):
    G = assemble_gram(basis, make_grid(dom, h), P)
    for K in (1, 2, 3):
        GK = G.restrict(basis_indices_for_degree(basis, K))
        c2 = estimate_korn2_constant(GK).value
        c1 = estimate_korn1_constant(GK).value
        kp = korn_poincare_constant(GK).value
        print(f"{h:8.4f} {K:3d} {c2:10.4f} {c1:10.4f} {kp:10.4f}")

# C2 is a sup over a growing space, so it can only increase with K at fixed h;
# across h the values should settle once the grid resolves the highest mode.
