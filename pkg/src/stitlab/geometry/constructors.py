"""Window constructors: boxes, simplices and polytopal ball approximations."""
from __future__ import annotations

import math

import numpy as np

from .polytope import Hyperplane, Polygon, Polyhedron, Polytope, clip


def _check_dim(d: int) -> None:
    if d not in (2, 3):
        raise ValueError(f"unsupported dimension {d}; only d in {{2, 3}}")


def polyhedron_from_planes(vertices, normals, offsets, eps: float = 1e-9) -> Polyhedron:
    """Assemble a polyhedron from its vertices and facet planes.

    Each facet cycle is found by collecting the vertices on the plane and
    sorting them counter-clockwise about the outward normal.
    """
    V = np.asarray(vertices, dtype=float)
    N = np.asarray(normals, dtype=float)
    b = np.asarray(offsets, dtype=float)
    faces = []
    for n, off in zip(N, b):
        idx = np.flatnonzero(np.abs(V @ n - off) <= eps)
        if len(idx) < 3:
            raise ValueError("facet plane carries fewer than three vertices")
        P = V[idx]
        c = P.mean(0)
        a = P[0] - c
        a /= np.linalg.norm(a)
        e2 = np.cross(n, a)
        q = P - c
        order = np.argsort(np.arctan2(q @ e2, q @ a))
        faces.append(idx[order])
    return Polyhedron(V, faces, N, b)


def make_box(side_lengths, d: int = 3) -> Polytope:
    """Axis-parallel box ``[0, a_1] x ... x [0, a_d]``.

    ``side_lengths`` may be a scalar, giving a cube.
    """
    _check_dim(d)
    a = np.broadcast_to(np.asarray(side_lengths, dtype=float), (d,)).copy()
    if (a <= 0).any():
        raise ValueError("side lengths must be positive")
    if d == 2:
        return Polygon.planar([[0, 0], [a[0], 0], [a[0], a[1]], [0, a[1]]])
    V = np.array([[x * a[0], y * a[1], z * a[2]] for z in (0, 1) for y in (0, 1) for x in (0, 1)])
    N = np.vstack([-np.eye(3), np.eye(3)])
    b = np.concatenate([np.zeros(3), a])
    return polyhedron_from_planes(V, N, b, eps=1e-12 * a.max())


def make_simplex(d: int = 3) -> Polytope:
    """The corner simplex ``conv(0, e_1, ..., e_d)``."""
    _check_dim(d)
    if d == 2:
        return Polygon.planar([[0, 0], [1, 0], [0, 1]])
    V = np.vstack([np.zeros(3), np.eye(3)])
    N = np.vstack([-np.eye(3), np.ones(3) / math.sqrt(3)])
    b = np.array([0, 0, 0, 1 / math.sqrt(3)])
    return polyhedron_from_planes(V, N, b)


def fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = math.pi * (1 + math.sqrt(5)) * i
    rho = np.sqrt(1 - z**2)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def make_ball_approx(d: int = 3, n_facets: int = 64) -> Polytope:
    """Polytope circumscribed about the unit ball with ``n_facets`` tangent facets.

    In the plane this is the regular ``n_facets``-gon; in space the tangent
    directions are a Fibonacci lattice on the sphere.
    """
    _check_dim(d)
    if d == 2:
        if n_facets < 3:
            raise ValueError("need at least 3 facets")
        R = 1 / math.cos(math.pi / n_facets)
        ang = 2 * math.pi * np.arange(n_facets) / n_facets
        return Polygon.planar(np.column_stack([R * np.cos(ang), R * np.sin(ang)]))
    if n_facets < 12:
        raise ValueError("need at least 12 facets in 3-space")
    P: Polytope = make_box(6.0, 3).translated([-3.0, -3.0, -3.0])
    for u in fibonacci_sphere(n_facets):
        H = Hyperplane(u, 1.0)
        res = clip(P, H)
        if res.missed:
            continue
        # keep the child containing the origin
        P = res.minus if H.offset > 0 else res.plus
    if np.abs(P.offsets - 1.0).max() > 1e-9:
        raise ValueError(f"{n_facets} tangent planes do not bound the ball; use more facets")
    return P
