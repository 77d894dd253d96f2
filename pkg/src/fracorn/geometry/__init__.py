from .charts import RigidTransform, rigid_chart_map, rotation_2d
from .domains import (Angular, AngularMinus, Box, ConvexPolygon, Domain, Epigraph, Subgraph,
                      TransformedDomain, WedgeBand, angular_window, extension_window, half_space,
                      scaled)
from .lipschitz import LipschitzFn, mcshane_extend
from .maps import PhiMap, lemma_a1_bound, lemma_a1_ratio, phi_forward, phi_gradient_norm, phi_inverse
from .whitney import Cell, CoverReport, WhitneyCover, build_whitney_cover, check_cover

__all__ = [
    "Angular", "AngularMinus", "Box", "Cell", "ConvexPolygon", "CoverReport", "Domain", "Epigraph",
    "LipschitzFn", "PhiMap", "RigidTransform", "Subgraph", "TransformedDomain", "WedgeBand", "WhitneyCover",
    "angular_window", "build_whitney_cover", "check_cover", "extension_window", "half_space",
    "lemma_a1_bound", "lemma_a1_ratio", "mcshane_extend", "phi_forward", "phi_gradient_norm",
    "phi_inverse", "rigid_chart_map", "rotation_2d", "scaled",
]
