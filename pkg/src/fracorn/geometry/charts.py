"""Rigid charts straightening a polygon corner onto a wedge {x1 > 0, x2 > alpha x1}."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidPolygonError, ParameterError
from .domains import ConvexPolygon


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """x -> R (x - c) with R a rotation; c is sent to the origin exactly."""

    rotation: np.ndarray
    origin: np.ndarray

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (X - self.origin) @ self.rotation.T

    def inverse(self, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return Y @ self.rotation + self.origin


def rotation_2d(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _seg_dist(p, a, b):
    d = b - a
    t = np.clip(np.dot(p - a, d) / np.dot(d, d), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * d)))


def rigid_chart_map(polygon: ConvexPolygon, j: int):
    """Chart at vertex ``j``: returns (T_j, alpha_j, r_j).

    T_j moves the vertex to the origin and rotates so that the outgoing edge
    points along (1, alpha_j) and the incoming edge along the positive x2-axis.
    The interior angle theta satisfies alpha_j = cot(theta). Inside the ball of
    radius r_j about the vertex, T_j(polygon) agrees with the wedge.
    """
    if not isinstance(polygon, ConvexPolygon):
        raise ParameterError("rigid charts are implemented for convex polygons")
    V = polygon.vertices
    m = len(V)
    if not -m <= j < m:
        raise ParameterError(f"vertex index {j} out of range")
    j %= m
    v, nxt, prv = V[j], V[(j + 1) % m], V[(j - 1) % m]
    d1, d2 = nxt - v, prv - v
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    if cross <= 1e-12 * np.linalg.norm(d1) * np.linalg.norm(d2):
        raise InvalidPolygonError(f"vertex {j} is degenerate")
    theta = float(np.arctan2(cross, np.dot(d1, d2)))
    alpha = float(np.cos(theta) / np.sin(theta))
    # rotate d2 onto +x2; d1 then lands at angle pi/2 - theta, i.e. along (1, alpha)
    R = rotation_2d(np.pi / 2 - np.arctan2(d2[1], d2[0]))
    T = RigidTransform(R, v.copy())
    others = [_seg_dist(v, V[i], V[(i + 1) % m]) for i in range(m)
              if i not in (j, (j - 1) % m)]
    reach = min([np.linalg.norm(d1), np.linalg.norm(d2)] + others)
    return T, alpha, 0.5 * float(reach)
