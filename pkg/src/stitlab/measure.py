"""The isotropic hyperplane measure with unit surface intensity.

The measure of the hyperplanes hitting a convex body ``K`` equals the mean
width of ``K`` (directions averaged uniformly over the sphere), which by
Crofton's formula is ``gamma_1 * V_1(K)``.  Sampling from the normalised
restriction factorises into a width-weighted direction and a uniform offset
along the support interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .geometry import Hyperplane, Polytope, intrinsic_volume
from .geometry.polytope import canonical_direction


def kappa(j: int) -> float:
    """Volume of the ``j``-dimensional unit ball."""
    return math.pi ** (j / 2) / math.gamma(j / 2 + 1)


def gamma(j: int, d: int) -> float:
    """Integral-geometric constant ``Γ((j+1)/2)Γ(d/2) / (Γ(j/2)Γ((d+1)/2))``."""
    if not (1 <= j <= d):
        raise ValueError(f"gamma_j needs 1 <= j <= d, got j={j}, d={d}")
    return math.exp(
        gammaln((j + 1) / 2) + gammaln(d / 2) - gammaln(j / 2) - gammaln((d + 1) / 2)
    )


def gamma_product(lo: int, hi: int, d: int) -> float:
    """``gamma_lo * ... * gamma_hi`` (1 for an empty range)."""
    out = 1.0
    for j in range(lo, hi + 1):
        out *= gamma(j, d)
    return out


@dataclass(frozen=True)
class IsotropicMeasure:
    d: int
    gammas: dict[int, float] = field(init=False)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        object.__setattr__(self, "gammas", {j: gamma(j, self.d) for j in range(1, self.d + 1)})

    def hitting(self, K: Polytope) -> float:
        return lambda_hitting(K)

    def sample(self, K: Polytope, rng: np.random.Generator) -> Hyperplane:
        return sample_hitting_hyperplane(K, rng)


def lambda_hitting(K: Polytope) -> float:
    """Measure of the hyperplanes hitting ``K``: ``gamma_1 * V_1(K)``."""
    d = K.ambient_dim
    v1 = intrinsic_volume(K, 1)
    if not v1 > 0:
        raise ValueError("degenerate body")
    return gamma(1, d) * v1


def random_directions(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1)[:, None]
    # canonical hemisphere: last coordinate nonnegative
    u[u[:, -1] < 0] *= -1
    return u


def sample_hitting_hyperplane(K: Polytope, rng: np.random.Generator) -> Hyperplane:
    """One hyperplane from the normalised restriction of the measure to ``[K]``.

    The direction is accepted with probability ``width(K, u) / diam(K)``,
    the offset is uniform on the support interval.
    """
    V = K.vertices
    d = V.shape[1]
    diam = K.diameter
    if not diam > 0:
        raise ValueError("degenerate body")
    while True:
        u = rng.standard_normal(d)
        u /= math.sqrt(u @ u)
        proj = V @ u
        lo, hi = proj.min(), proj.max()
        if rng.random() * diam < hi - lo:
            break
    r = lo + (hi - lo) * rng.random()
    u, sign = canonical_direction(u)
    return Hyperplane(u, sign * r)


def sample_hitting_hyperplanes(K: Polytope, n: int, rng: np.random.Generator):
    """Vectorised batch of ``n`` hitting hyperplanes as ``(normals, offsets)`` arrays."""
    V = K.vertices
    d = V.shape[1]
    diam = K.diameter
    normals = np.empty((0, d))
    lows = np.empty(0)
    highs = np.empty(0)
    while len(normals) < n:
        m = 2 * (n - len(normals)) + 16
        u = random_directions(rng, m, d)
        proj = V @ u.T
        lo, hi = proj.min(0), proj.max(0)
        keep = rng.random(m) * diam < hi - lo
        normals = np.vstack([normals, u[keep]])
        lows = np.concatenate([lows, lo[keep]])
        highs = np.concatenate([highs, hi[keep]])
    normals, lows, highs = normals[:n], lows[:n], highs[:n]
    offsets = lows + (highs - lows) * rng.random(n)
    return normals, offsets
