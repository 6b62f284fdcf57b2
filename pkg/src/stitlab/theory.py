"""Reference values: exact means, variance integrals, energies, chord power
integrals, iterated integrals, asymptotic covariances and limit coefficients.

Pair integrals over ``W x W`` are evaluated in polar coordinates around the
first point: with ``rho(x, u)`` the distance from ``x`` to the boundary of
``W`` in direction ``u``, ::

    ∫_W ∫_W k(|x - y|) dx dy = Vol(W) |S^{d-1}| E[ ∫_0^rho k(r) r^{d-1} dr ]

for ``x`` uniform in ``W`` and ``u`` uniform on the sphere.  The radial
integral is done in closed form, which leaves a bounded integrand for every
kernel used here (the plain Monte Carlo average of ``|x - y|^-2`` over
uniform pairs has infinite variance in three dimensions).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammainc

from .geometry import Polygon, Polyhedron, Polytope
from .measure import gamma, gamma_product, kappa

MIN_BUDGET = 1000


# ---------------------------------------------------------------------------
# convex bodies for Monte Carlo integration


class Body:
    """Convex body with uniform sampling and ray/line intersection queries."""

    d: int
    volume: float
    center: np.ndarray
    radius: float  # circumradius about ``center``

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def line_interval(self, x: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Parameter interval ``[lo, hi]`` of ``x + s u`` inside the body (``hi < lo`` if empty)."""
        raise NotImplementedError

    def exit_distance(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.line_interval(x, u)[1]


class Ball(Body):
    def __init__(self, d: int = 3, radius: float = 1.0, center=None):
        self.d = d
        self.r = float(radius)
        self.center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
        self.radius = self.r
        self.volume = kappa(d) * self.r**d

    def sample(self, rng, n):
        u = random_unit_vectors(rng, n, self.d)
        rad = self.r * rng.random(n) ** (1.0 / self.d)
        return self.center + u * rad[:, None]

    def line_interval(self, x, u):
        q = x - self.center
        b = np.einsum("ij,ij->i", q, u)
        c = np.einsum("ij,ij->i", q, q) - self.r**2
        disc = b * b - c
        root = np.sqrt(np.maximum(disc, 0.0))
        lo, hi = -b - root, -b + root
        hi = np.where(disc < 0, -np.inf, hi)
        return lo, hi


class PolytopeBody(Body):
    """A full-dimensional polytope in halfspace form ``N x <= b``."""

    def __init__(self, P: Polytope):
        if P.dim != P.ambient_dim:
            raise ValueError("need a full-dimensional polytope")
        self.P = P
        self.d = P.dim
        self.N, self.b = halfspaces(P)
        self.volume = P.content
        self.center = P.centroid
        self.radius = float(np.linalg.norm(P.vertices - self.center, axis=1).max())
        self._lo = P.vertices.min(0)
        self._hi = P.vertices.max(0)

    def sample(self, rng, n):
        out = np.empty((0, self.d))
        box = float(np.prod(self._hi - self._lo))
        while len(out) < n:
            m = int(1.2 * (n - len(out)) * box / self.volume) + 16
            x = self._lo + (self._hi - self._lo) * rng.random((m, self.d))
            inside = (x @ self.N.T <= self.b).all(axis=1)
            out = np.vstack([out, x[inside]])
        return out[:n]

    def line_interval(self, x, u):
        num = self.b[None, :] - x @ self.N.T  # >= 0 for interior x
        den = u @ self.N.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = num / den
        hi = np.where(den > 0, ratio, np.inf).min(axis=1)
        lo = np.where(den < 0, ratio, -np.inf).max(axis=1)
        # lines parallel to a facet and outside it
        outside = ((den == 0) & (num < 0)).any(axis=1)
        hi = np.where(outside, -np.inf, hi)
        return lo, hi


def halfspaces(P: Polytope) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(P, Polyhedron):
        return P.normals, P.offsets
    if isinstance(P, Polygon) and P.ambient_dim == 2:
        V = P.vertices
        e = np.roll(V, -1, axis=0) - V
        N = np.column_stack([e[:, 1], -e[:, 0]])
        N /= np.linalg.norm(N, axis=1)[:, None]
        return N, np.einsum("ij,ij->i", N, V)
    raise TypeError(f"no halfspace form for {type(P).__name__}")


def as_body(W) -> Body:
    return W if isinstance(W, Body) else PolytopeBody(W)


def random_unit_vectors(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    u = rng.standard_normal((n, d))
    return u / np.linalg.norm(u, axis=1)[:, None]


@dataclass(frozen=True)
class MCValue:
    """Monte Carlo estimate with its standard error."""

    value: float
    se: float

    def __iter__(self):
        return iter((self.value, self.se))


def _check_budget(n: int) -> None:
    if n < MIN_BUDGET:
        raise ValueError(f"Monte Carlo budget {n} below the minimum {MIN_BUDGET}")


def _ray_lengths(body: Body, n: int, rng) -> np.ndarray:
    x = body.sample(rng, n)
    u = random_unit_vectors(rng, n, body.d)
    return body.exit_distance(x, u)


def _polar_pair_integral(W, radial: Callable[[np.ndarray], np.ndarray], n: int, rng) -> MCValue:
    body = as_body(W)
    rho = _ray_lengths(body, n, rng)
    scale = body.volume * body.d * kappa(body.d)  # Vol(W) * |S^{d-1}|
    h = radial(rho)
    return MCValue(scale * float(h.mean()), scale * float(h.std(ddof=1)) / math.sqrt(n))


def riesz_pair_integral(W, alpha: float, mc_pairs: int, rng) -> MCValue:
    """``∫_W ∫_W |x - y|^{-alpha} dx dy`` for ``alpha < d``."""
    _check_budget(mc_pairs)
    d = as_body(W).d
    if not alpha < d:
        raise ValueError("the Riesz integral diverges for alpha >= d")
    p = d - alpha
    return _polar_pair_integral(W, lambda rho: rho**p / p, mc_pairs, rng)


def energy_E2(W, mc_pairs: int, rng) -> MCValue:
    """2-energy ``∫_W ∫_W |x - y|^-2 dx dy``."""
    d = as_body(W).d
    if d < 3:
        raise ValueError("the 2-energy is infinite for d < 3")
    return riesz_pair_integral(W, 2.0, mc_pairs, rng)


def chord_power(W, mc_pairs: int, rng, method: str = "pairs") -> MCValue:
    """Chord power integral ``I_{d-1}(W)``.

    ``method="pairs"`` converts the 2-energy, ``method="lines"`` integrates
    ``length(W ∩ L)^{d-1}`` over isotropic uniform lines through the
    circumscribed ball, with the line measure normalised so that the lines
    hitting the unit ball have measure ``kappa_{d-1}``.
    """
    body = as_body(W)
    d = body.d
    if d < 3:
        raise ValueError("chord_power needs d >= 3")
    if method == "pairs":
        e2 = energy_E2(body, mc_pairs, rng)
        f = (d - 1) * (d - 2) / 2
        return MCValue(f * e2.value, f * e2.se)
    if method != "lines":
        raise ValueError(f"unknown method {method!r}")
    _check_budget(mc_pairs)
    n = mc_pairs
    u = random_unit_vectors(rng, n, d)
    # uniform point in the (d-1)-disc orthogonal to u
    z = random_unit_vectors(rng, n, d)
    z -= np.einsum("ij,ij->i", z, u)[:, None] * u
    z /= np.linalg.norm(z, axis=1)[:, None]
    rad = body.radius * rng.random(n) ** (1.0 / (d - 1))
    p = body.center + z * rad[:, None]
    lo, hi = body.line_interval(p, u)
    length = np.maximum(hi - lo, 0.0)
    scale = d * kappa(d) / 2 * kappa(d - 1) * body.radius ** (d - 1)
    h = length ** (d - 1)
    return MCValue(scale * float(h.mean()), scale * float(h.std(ddof=1)) / math.sqrt(n))


def chord_power_ball(d: int, radius: float = 1.0) -> float:
    """Closed form ``I_{d-1}(r B^d) = d 2^{d-2} kappa_d kappa_{2d-2} / kappa_{d-1} r^{2d-2}``."""
    return d * 2 ** (d - 2) * kappa(d) * kappa(2 * d - 2) / kappa(d - 1) * radius ** (2 * d - 2)


def var_sigma_dminus1(t: float, W, mc_pairs: int, rng) -> MCValue:
    """Variance of the total facet content of ``Y(t, W)``.

    ``(d-1)/2 ∫∫ (1 - exp(-c t |x-y|)) / |x-y|^2``, ``c = 2 kappa_{d-1} / (d kappa_d)``.
    """
    body = as_body(W)
    d = body.d
    if d < 3:
        raise ValueError("the surface variance formula is for d >= 3")
    _check_budget(mc_pairs)
    if t == 0:
        return MCValue(0.0, 0.0)
    a = 2 * kappa(d - 1) / (d * kappa(d)) * t
    p = d - 2

    def radial(rho):
        # ∫_0^rho r^{d-3} (1 - e^{-a r}) dr
        return rho**p / p - gammainc(p, a * rho) * gamma_fn(p) / a**p

    val = _polar_pair_integral(body, radial, mc_pairs, rng)
    f = (d - 1) / 2
    return MCValue(f * val.value, f * val.se)


def mean_A_surface_squared(s: float, W, mc_pairs: int, rng) -> MCValue:
    """``E A_{V_{d-1}^2}(Y(s, W)) = (d-1)/2 c ∫∫ exp(-c s |x-y|) / |x-y| dx dy``.

    The time derivative of the surface variance; at ``s = 0`` it is
    ``∫_{[W]} Vol_{d-1}(W ∩ H)^2 Λ(dH)``.
    """
    body = as_body(W)
    d = body.d
    _check_budget(mc_pairs)
    c = 2 * kappa(d - 1) / (d * kappa(d))
    a = c * s
    p = d - 1
    if a == 0:
        radial = lambda rho: rho**p / p  # noqa: E731
    else:
        radial = lambda rho: gammainc(p, a * rho) * gamma_fn(p) / a**p  # noqa: E731
    val = _polar_pair_integral(body, radial, mc_pairs, rng)
    f = (d - 1) / 2 * c
    return MCValue(f * val.value, f * val.se)


# ---------------------------------------------------------------------------
# first order


def _volumes(W) -> np.ndarray:
    if isinstance(W, Polytope):
        return W.intrinsic_volumes()
    return np.asarray(W, dtype=float)


def mean_sigma(j: int, t: float, W) -> float:
    """Exact ``E Σ_{V_j}(Y(t, W))``; ``W`` is a polytope or its ``[V_0, .., V_d]``."""
    V = _volumes(W)
    d = len(V) - 1
    if not 0 <= j <= d - 1:
        raise ValueError(f"order {j} out of range 0..{d - 1}")
    val = gamma_product(j + 1, d - 1, d) * t ** (d - j) / math.factorial(d - j) * V[d]
    for i in range(1, d - j):
        val += gamma_product(j + 1, j + i, d) * t**i / math.factorial(i) * V[j + i]
    return float(val)


def density_phibar(j: int, t: float, d: int) -> float:
    """Density of ``Σ_{V_j}`` per unit volume of the whole-space tessellation."""
    if not 0 <= j <= d - 1:
        raise ValueError(f"order {j} out of range 0..{d - 1}")
    return gamma_product(j + 1, d - 1, d) * t ** (d - j) / math.factorial(d - j)


def density_phibar_kappa(j: int, t: float, d: int) -> float:
    """The same density written with unit-ball volumes."""
    if not 0 <= j <= d - 1:
        raise ValueError(f"order {j} out of range 0..{d - 1}")
    return math.comb(d, j) * (kappa(d - 1) / (d * kappa(d))) ** (d - j) * kappa(d) / kappa(j) * t ** (d - j)


# ---------------------------------------------------------------------------
# iterated integrals and the covariance structure


def gauss_nodes(t: float, quad_points: int = 64, panel: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on ``[0, t]``."""
    if quad_points < panel:
        x, w = np.polynomial.legendre.leggauss(quad_points)
        return 0.5 * t * (x + 1), 0.5 * t * w
    n_panels = quad_points // panel
    x, w = np.polynomial.legendre.leggauss(panel)
    h = t / n_panels
    nodes = np.concatenate([k * h + 0.5 * h * (x + 1) for k in range(n_panels)])
    weights = np.tile(0.5 * h * w, n_panels)
    return nodes, weights


def iterated_integral_weights(n: int, t: float, quad_points: int = 64):
    """Nodes and weights such that ``I^n(f; t) ≈ Σ w_k f(s_k)``."""
    if n < 1:
        raise ValueError("order must be at least 1")
    s, w = gauss_nodes(t, quad_points)
    return s, w * (t - s) ** (n - 1) / math.factorial(n - 1)


def iterated_integral(f: Callable, n: int, t: float, quad_points: int = 64) -> float:
    """``I^n(f; t) = 1/(n-1)! ∫_0^t (t-s)^{n-1} f(s) ds``."""
    s, w = iterated_integral_weights(n, t, quad_points)
    try:
        vals = np.asarray(f(s), dtype=float)
        if vals.shape != s.shape:
            raise ValueError
    except (TypeError, ValueError):
        vals = np.array([float(f(x)) for x in s])
    if not np.isfinite(vals).all():
        raise ValueError("integrand is not finite on [0, t]")
    return float(w @ vals)


def cov_weights(k: int, l: int, d: int) -> list[tuple[int, int, float, int]]:
    """Terms ``(m, n, weight, order)`` of the exact covariance expansion.

    ``Cov(Σ_{V_{d-1-k}}, Σ_{V_{d-1-l}}) = Σ weight * I^order(E A_{V_{d-1-m} V_{d-1-n}}; t)``.
    """
    if not (0 <= k <= d - 1 and 0 <= l <= d - 1):
        raise ValueError("k, l must lie in 0..d-1")
    out = []
    for m in range(k + 1):
        for n in range(l + 1):
            w = math.comb(k + l - m - n, k - m)
            for i in range(m + 1, k + 1):
                w *= gamma(d - i, d)
            for j in range(n + 1, l + 1):
                w *= gamma(d - j, d)
            out.append((m, n, w, k + l - m - n + 1))
    return out


def exact_cov_skeleton(k: int, l: int, t: float, W, moment_oracle, quad_points: int = 16) -> MCValue:
    """Exact covariance with only the moment inputs ``E A_{V_{d-1-m} V_{d-1-n}; s}`` estimated.

    ``moment_oracle(m, n, s_nodes)`` returns either deterministic values of
    shape ``(len(s_nodes),)`` or per-replication estimates of shape
    ``(n_reps, len(s_nodes))`` sharing replications across ``(m, n)``.
    """
    d = _volumes(W).size - 1 if not hasattr(moment_oracle, "d") else moment_oracle.d
    total = None
    for m, n, w, order in cov_weights(k, l, d):
        s, qw = iterated_integral_weights(order, t, quad_points)
        vals = np.asarray(moment_oracle(m, n, s), dtype=float)
        if not np.isfinite(vals).all():
            raise ValueError(f"moment oracle failed for (m, n) = ({m}, {n})")
        term = w * (vals @ qw)
        total = term if total is None else total + term
    total = np.atleast_1d(total)
    if total.size == 1:
        return MCValue(float(total[0]), 0.0)
    return MCValue(float(total.mean()), float(total.std(ddof=1) / math.sqrt(total.size)))


def asymptotic_cov(k: int, l: int, t: float, W, R: float, d: int | None = None, chord: float | None = None, rng=None) -> float:
    """Leading term ``1/(d-2) Π γ Π γ t^{k+l}/(k! l!) I_{d-1}(W) R^{2(d-1)}``."""
    if d is None:
        d = W.d if isinstance(W, Body) else W.ambient_dim
    if d < 3:
        raise ValueError("asymptotic covariances are for d >= 3")
    if not (0 <= k <= d - 1 and 0 <= l <= d - 1):
        raise ValueError("k, l must lie in 0..d-1")
    if chord is None:
        rng = np.random.default_rng(0) if rng is None else rng
        chord = chord_power(W, 400_000, rng).value
    pk = gamma_product(d - k, d - 1, d)
    pl = gamma_product(d - l, d - 1, d)
    return pk * pl * t ** (k + l) / (math.factorial(k) * math.factorial(l)) * chord * R ** (2 * (d - 1)) / (d - 2)


def limit_coeff(k: int, t: float, d: int) -> float:
    """Coefficient of ``ξ`` in component ``k`` (order ``d-1-k``) of the limit vector."""
    if not 0 <= k <= d - 1:
        raise ValueError("k must lie in 0..d-1")
    return gamma_product(d - k, d - 1, d) * t**k / math.factorial(k)


def reference_table(
    W, t: float, d: int, mc_pairs: int = 200_000, seed: int = 0
) -> list[dict]:
    """Rows ``(quantity, parameters, value, se)`` for the main reference values."""
    rng = np.random.default_rng(seed)
    rows = []
    for j in range(d):
        rows.append(dict(quantity="mean_sigma", parameters=f"j={j};t={t}", value=mean_sigma(j, t, W), se=0.0))
    for j in range(1, d + 1):
        rows.append(dict(quantity="gamma", parameters=f"j={j};d={d}", value=gamma(j, d), se=0.0))
    if d >= 3:
        v = var_sigma_dminus1(t, W, mc_pairs, rng)
        rows.append(dict(quantity="var_sigma_dminus1", parameters=f"t={t}", value=v.value, se=v.se))
        e = energy_E2(W, mc_pairs, rng)
        rows.append(dict(quantity="energy_E2", parameters="", value=e.value, se=e.se))
        c = chord_power(W, mc_pairs, rng, method="lines")
        rows.append(dict(quantity="chord_power", parameters="method=lines", value=c.value, se=c.se))
    return rows
