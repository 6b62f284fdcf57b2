"""Facet functionals of tessellations.

``Σ_φ`` sums ``φ`` over the maximal polytopes born up to a time, ``F_j``
sums ``V_j`` over the cells, and ``A_φ`` averages the sectional sums of
``φ`` over hitting hyperplanes.  Test functions (constants, quadratics and
box indicators) integrate exactly over faces of any dimension.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .engine import Kind, Tessellation, run_mnw
from .geometry import Point, Polygon, Polyhedron, Polytope, Segment, clip_halfspace
from .geometry.polytope import Hyperplane, section as section_polytope
from .measure import gamma, lambda_hitting, sample_hitting_hyperplanes
from .theory import MCValue, mean_sigma

# ---------------------------------------------------------------------------
# simplicial decomposition and exact moments


def simplices(P: Polytope) -> np.ndarray:
    """``(m, k+1, n)`` array of simplices triangulating the ``k``-polytope ``P``."""
    if isinstance(P, Point):
        return P.vertices[None, :, :]
    if isinstance(P, Segment):
        return P.vertices[None, :, :]
    if isinstance(P, Polygon):
        V = P.vertices
        idx = np.arange(1, len(V) - 1)
        return np.stack([np.broadcast_to(V[0], (len(idx), V.shape[1])), V[idx], V[idx + 1]], axis=1)
    if isinstance(P, Polyhedron):
        V = P.vertices
        c = P.centroid
        out = []
        for cyc in P.face_cycles:
            for a, b in zip(cyc[1:-1], cyc[2:]):
                out.append((c, V[cyc[0]], V[a], V[b]))
        return np.array(out)
    raise TypeError(f"cannot triangulate {type(P).__name__}")


def simplex_volumes(S: np.ndarray) -> np.ndarray:
    k = S.shape[1] - 1
    if k == 0:
        return np.ones(len(S))
    E = S[:, 1:, :] - S[:, :1, :]
    G = E @ np.transpose(E, (0, 2, 1))
    return np.sqrt(np.maximum(np.linalg.det(G), 0.0)) / math.factorial(k)


def sample_uniform(P: Polytope, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform on ``P`` with respect to its own-dimensional volume."""
    S = simplices(P)
    vol = simplex_volumes(S)
    pick = rng.choice(len(S), size=n, p=vol / vol.sum())
    w = rng.dirichlet(np.ones(S.shape[1]), size=n)
    return np.einsum("ik,ikn->in", w, S[pick])


# ---------------------------------------------------------------------------
# test functions


class TestFunction:
    """Bounded test function with exact integration over polytopes."""

    __test__ = False  # not a pytest class

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def integrate(self, P: Polytope) -> float:
        raise NotImplementedError

    def support_box(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Bounding box of the support, ``None`` if unbounded."""
        return None


@dataclass(frozen=True)
class Constant(TestFunction):
    c: float = 1.0

    def __call__(self, x):
        x = np.atleast_2d(x)
        return np.full(len(x), self.c)

    def integrate(self, P):
        return self.c * (1.0 if P.dim == 0 else P.content)


@dataclass(frozen=True, eq=False)
class Quadratic(TestFunction):
    """``g(x) = x^T Q x + b^T x + c``."""

    Q: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))

    def __call__(self, x):
        x = np.atleast_2d(x)
        return np.einsum("ia,ab,ib->i", x, self.Q, x) + x @ self.b + self.c

    def integrate(self, P):
        if P.dim == 0:
            return float(self(P.vertices)[0])
        S = simplices(P)
        vol = simplex_volumes(S)
        k = S.shape[1] - 1
        s = S.sum(axis=1)
        # ∫ x_a x_b over a k-simplex = vol / ((k+1)(k+2)) * (Σ v_a v_b + s_a s_b)
        second = np.einsum("mia,mib->mab", S, S) + np.einsum("ma,mb->mab", s, s)
        second *= (vol / ((k + 1) * (k + 2)))[:, None, None]
        first = s * (vol / (k + 1))[:, None]
        return float(np.einsum("ab,ab->", self.Q, second.sum(0)) + self.b @ first.sum(0) + self.c * vol.sum())


@dataclass(frozen=True, eq=False)
class BoxIndicator(TestFunction):
    """Indicator of the closed box ``[lo, hi]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or not (hi > lo).all():
            raise ValueError("box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __call__(self, x):
        x = np.atleast_2d(x)
        return ((x >= self.lo) & (x <= self.hi)).all(axis=1).astype(float)

    def integrate(self, P):
        if P.dim == 0:
            return float(self(P.vertices)[0])
        V = P.vertices
        if (V.min(0) >= self.hi).any() or (V.max(0) <= self.lo).any():
            return 0.0
        Q: Polytope | None = P
        n = len(self.lo)
        for a in range(n):
            e = np.zeros(n)
            e[a] = 1.0
            for normal, off in ((e, self.hi[a]), (-e, -self.lo[a])):
                Q = clip_halfspace(Q, normal, off)
                if Q is None:
                    return 0.0
        return float(Q.content)

    def support_box(self):
        return self.lo, self.hi


# ---------------------------------------------------------------------------
# functional specifications


@dataclass(frozen=True, eq=False)
class FunctionalSpec:
    """``φ`` applied to single facets.

    kinds: ``"volume"`` (``V_j``), ``"product"`` (``V_i V_j``) and
    ``"weighted"`` (``Σ_{e ∈ Faces_j(f)} ∫_e g``).
    """

    kind: str
    j: int
    i: int | None = None
    g: TestFunction | None = None

    @classmethod
    def volume(cls, j: int) -> "FunctionalSpec":
        return cls("volume", j)

    @classmethod
    def product(cls, i: int, j: int) -> "FunctionalSpec":
        return cls("product", j, i)

    @classmethod
    def weighted(cls, j: int, g: TestFunction) -> "FunctionalSpec":
        return cls("weighted", j, None, g)

    @property
    def name(self) -> str:
        if self.kind == "volume":
            return f"V{self.j}"
        if self.kind == "product":
            return f"V{self.i}V{self.j}"
        return f"J{self.j}[{type(self.g).__name__}]"

    def validate(self, d: int) -> None:
        orders = [self.j] + ([self.i] if self.kind == "product" else [])
        if self.kind not in ("volume", "product", "weighted"):
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind == "product" and self.i is None:
            raise ValueError("product functional needs two orders")
        if self.kind == "weighted" and not isinstance(self.g, TestFunction):
            raise ValueError("weighted functional needs a test function")
        for o in orders:
            if not 0 <= o <= d - 1:
                raise ValueError(f"order {o} out of range 0..{d - 1}")

    def __call__(self, f: Polytope) -> float:
        if self.kind == "volume":
            return f.intrinsic_volume(self.j)
        if self.kind == "product":
            return f.intrinsic_volume(self.i) * f.intrinsic_volume(self.j)
        return sum(self.g.integrate(e) for e in f.faces(self.j))


def _values(tess: Tessellation, spec: FunctionalSpec, facets) -> np.ndarray:
    if spec.kind == "volume":
        return tess.facet_volumes[: len(facets), spec.j]
    if spec.kind == "product":
        V = tess.facet_volumes[: len(facets)]
        return V[:, spec.i] * V[:, spec.j]
    return np.array([spec(f.facet) for f in facets], dtype=float)


def sigma(tess: Tessellation, spec: FunctionalSpec, s: float | None = None) -> float:
    """``Σ_φ`` over the facets born up to time ``s`` (default: the horizon)."""
    if tess.empty:
        return 0.0
    spec.validate(tess.d)
    s = tess.horizon if s is None else s
    facets = tess.state_at(s)
    return float(_values(tess, spec, facets).sum())


def sigma_path(tess: Tessellation, spec: FunctionalSpec, times: Sequence[float]) -> np.ndarray:
    spec.validate(tess.d)
    vals = np.concatenate([[0.0], np.cumsum(_values(tess, spec, tess.facets))])
    return np.array([vals[tess.n_facets_at(s)] for s in times])


def time_integral(tess: Tessellation, spec: FunctionalSpec, t: float | None = None) -> float:
    """``∫_0^t Σ_φ(Y(s)) ds``, exact for the piecewise constant path."""
    spec.validate(tess.d)
    t = tess.horizon if t is None else t
    facets = tess.state_at(t)
    vals = _values(tess, spec, facets)
    return float(vals @ (t - tess.birth_times[: len(facets)]))


def cells_functional(tess: Tessellation, j: int, s: float | None = None) -> float:
    """``F_j``: sum of ``V_j`` over the cells alive at ``s``."""
    d = tess.d
    if not 0 <= j <= d:
        raise ValueError(f"order {j} out of range 0..{d}")
    cells = tess.cells if s is None else tess.cells_at(s)
    return float(sum(c.polytope.intrinsic_volume(j) for c in cells))


def a_phi_exact(tess: Tessellation, j: int, s: float | None = None) -> float:
    """``A_{V_j} = γ_{j+1} F_{j+1}``."""
    d = tess.d
    if not 0 <= j <= d - 1:
        raise ValueError(f"order {j} out of range 0..{d - 1}")
    return gamma(j + 1, d) * cells_functional(tess, j + 1, s)


# ---------------------------------------------------------------------------
# hyperplane averages


def _stack(cells: Sequence[Polytope]) -> tuple[np.ndarray, np.ndarray]:
    V = np.vstack([c.vertices for c in cells])
    starts = np.cumsum([0] + [len(c.vertices) for c in cells[:-1]])
    return V, starts


def hit_matrix(cells: Sequence[Polytope], normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Boolean ``(n_cells, n_planes)``: the plane meets the cell interior."""
    V, starts = _stack(cells)
    proj = V @ normals.T
    lo = np.minimum.reduceat(proj, starts, axis=0)
    hi = np.maximum.reduceat(proj, starts, axis=0)
    return (lo < offsets[None, :]) & (offsets[None, :] < hi)


def section_volumes(cells: Sequence[Polytope], normals, offsets, eps: float | None = None):
    """Intrinsic volumes of all nonempty sections ``cell ∩ H``.

    Returns ``(cell_index, plane_index, volumes)`` with ``volumes`` of shape
    ``(m, d)`` holding ``V_0 .. V_{d-1}`` of each section.
    """
    hits = hit_matrix(cells, normals, offsets)
    ci, pi = np.nonzero(hits)
    d = cells[0].ambient_dim
    vols = np.zeros((len(ci), d))
    keep = np.ones(len(ci), dtype=bool)
    for k, (c, p) in enumerate(zip(ci, pi)):
        f = section_polytope(cells[c], Hyperplane(normals[p], offsets[p]), eps)
        if f is None:
            keep[k] = False
        else:
            vols[k] = f.intrinsic_volumes()
    return ci[keep], pi[keep], vols[keep]


def a_phi_mc(
    tess: Tessellation, spec: FunctionalSpec, n: int, rng: np.random.Generator, s: float | None = None
) -> MCValue:
    """Monte Carlo ``A_φ``: ``Λ([W])`` times the mean sectional sum of ``φ``."""
    if n < 1:
        raise ValueError("need at least one hyperplane sample")
    d = tess.d
    spec.validate(d)
    W = tess.window
    cells = [c.polytope for c in (tess.cells if s is None else tess.cells_at(s))]
    normals, offsets = sample_hitting_hyperplanes(W, n, rng)
    per_plane = np.zeros(n)
    if spec.kind == "weighted":
        hits = hit_matrix(cells, normals, offsets)
        for c, p in zip(*np.nonzero(hits)):
            f = section_polytope(cells[c], Hyperplane(normals[p], offsets[p]), tess.eps or None)
            if f is not None:
                per_plane[p] += spec(f)
    else:
        ci, pi, vols = section_volumes(cells, normals, offsets, tess.eps or None)
        if spec.kind == "volume":
            vals = vols[:, spec.j]
        else:
            vals = vols[:, spec.i] * vols[:, spec.j]
        np.add.at(per_plane, pi, vals)
    lam = lambda_hitting(W)
    se = lam * per_plane.std(ddof=1) / math.sqrt(n) if n > 1 else math.inf
    return MCValue(lam * float(per_plane.mean()), float(se))


class SimulatedMomentOracle:
    """Per-replication estimates of ``E A_{V_{d-1-m} V_{d-1-n}; s}``.

    Each replication runs one STIT process on ``[0, t]`` and draws one batch
    of hitting hyperplanes; the sections of every cell in the history are
    computed once, so all orders and all times share the same randomness.
    """

    def __init__(self, W: Polytope, t: float, n_reps: int, n_planes: int, seed: int = 0):
        from .stats import replication_rng

        self.W = W
        self.d = W.ambient_dim
        self.t = t
        self.n_reps = n_reps
        self.n_planes = n_planes
        self.seed = seed
        self._rng = [replication_rng(seed, r) for r in range(n_reps)]
        self._runs = None
        self._cache: dict[tuple, np.ndarray] = {}

    def _prepare(self):
        lam = lambda_hitting(self.W)
        runs = []
        for rng in self._rng:
            tess = run_mnw(self.W, self.t, rng)
            hist = tess.history
            normals, offsets = sample_hitting_hyperplanes(self.W, self.n_planes, rng)
            ci, pi, vols = section_volumes([c.polytope for c in hist], normals, offsets, tess.eps)
            birth = np.array([hist[c].birth_time for c in ci])
            death = np.array([hist[c].death_time for c in ci])
            runs.append((birth, death, vols))
        self._runs = runs
        self._lam = lam

    def moments(self, s_nodes: Sequence[float]) -> np.ndarray:
        """``(n_reps, len(s), d, d)`` array of ``A_{V_a V_b}`` estimates."""
        key = tuple(np.round(np.asarray(s_nodes, dtype=float), 15))
        if key in self._cache:
            return self._cache[key]
        if self._runs is None:
            self._prepare()
        s = np.asarray(s_nodes, dtype=float)
        if (s < 0).any() or (s > self.t * (1 + 1e-12)).any():
            raise ValueError("grid outside [0, t]")
        d = self.d
        out = np.zeros((self.n_reps, len(s), d, d))
        for r, (birth, death, vols) in enumerate(self._runs):
            alive = (birth[None, :] <= s[:, None]) & (s[:, None] < death[None, :])
            out[r] = np.einsum("sk,ka,kb->sab", alive.astype(float), vols, vols)
        out *= self._lam / self.n_planes
        self._cache[key] = out
        return out

    def __call__(self, m: int, n: int, s_nodes) -> np.ndarray:
        d = self.d
        return self.moments(s_nodes)[:, :, d - 1 - m, d - 1 - n]


# ---------------------------------------------------------------------------
# face measures


def face_measure_integral(
    tess: Tessellation,
    j: int,
    g: TestFunction,
    n: int | None = None,
    rng: np.random.Generator | None = None,
    s: float | None = None,
) -> MCValue:
    """``<g, V_j> = Σ_f Σ_{e ∈ Faces_j(f)} ∫_e g dVol_j``.

    With ``n=None`` every face integral is exact.  Otherwise each face with
    ``j > 0`` is sampled at ``n`` uniform points and weighted by its
    ``j``-volume; vertices are always evaluated exactly.
    """
    d = tess.d
    if not 0 <= j <= d - 1:
        raise ValueError(f"face order {j} out of range 0..{d - 1}")
    if not isinstance(g, TestFunction):
        raise TypeError("unsupported test function")
    if n is not None and n < 1 and j > 0:
        raise ValueError("sampling needs n >= 1")
    facets = tess.state_at(tess.horizon if s is None else s)
    total = 0.0
    var = 0.0
    if n is not None and rng is None:
        rng = np.random.default_rng()
    for f in facets:
        for e in f.facet.faces(j):
            if n is None or j == 0:
                total += g.integrate(e)
                continue
            vals = g(sample_uniform(e, n, rng))
            vol = e.content
            total += vol * vals.mean()
            if n > 1:
                var += vol**2 * vals.var(ddof=1) / n
    return MCValue(float(total), math.sqrt(var))


def facet_weights(tess: Tessellation, g: TestFunction, s: float | None = None) -> np.ndarray:
    """``J^g(f) = ∫_f g dVol_{d-1}`` for every facet."""
    facets = tess.state_at(tess.horizon if s is None else s)
    return np.array([g.integrate(f.facet) for f in facets], dtype=float)


# ---------------------------------------------------------------------------
# rescaled processes


def rescaled_process(
    W: Polytope,
    R: float,
    t_grid: Sequence[float],
    rng: np.random.Generator,
    shift: bool = True,
) -> np.ndarray:
    """``(d, len(t_grid))`` array of ``S^{R,W}_{V_i; t}`` for ``i = 0..d-1``.

    ``S = R^{-(d-1)} (Σ_{V_i}(Y(t + log R / R, R W)) - E Σ_{V_i})``; with
    ``shift=False`` the time is not shifted.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    t_grid = np.asarray(t_grid, dtype=float)
    if (t_grid < 0).any() or (t_grid > 1).any():
        raise ValueError("time grid must lie in [0, 1]")
    d = W.ambient_dim
    WR = W.scaled(R)
    times = t_grid + (math.log(R) / R if shift else 0.0)
    tess = run_mnw(WR, float(times.max()), rng, keep_history=False)
    out = np.empty((d, len(times)))
    V = WR.intrinsic_volumes()
    for i in range(d):
        path = sigma_path(tess, FunctionalSpec.volume(i), times)
        out[i] = (path - [mean_sigma(i, T, V) for T in times]) / R ** (d - 1)
    return out


def write_functional_csv(rows: Iterable[tuple[int, float, str, float]], path) -> Path:
    """Columns: replication_id, t, functional, value."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replication_id", "t", "functional", "value"])
        for r, t, name, v in rows:
            w.writerow([r, repr(float(t)), name, repr(float(v))])
    return path


__all__ = [
    "BoxIndicator",
    "Constant",
    "FunctionalSpec",
    "Kind",
    "Quadratic",
    "SimulatedMomentOracle",
    "TestFunction",
    "a_phi_exact",
    "a_phi_mc",
    "cells_functional",
    "face_measure_integral",
    "facet_weights",
    "hit_matrix",
    "rescaled_process",
    "sample_uniform",
    "section_volumes",
    "sigma",
    "sigma_path",
    "simplex_volumes",
    "simplices",
    "time_integral",
    "write_functional_csv",
]
