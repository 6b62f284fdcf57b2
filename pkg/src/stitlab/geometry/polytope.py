"""Convex polytopes of dimension 0..3 with exact face structure.

Every cell produced by the simulators arises from a window by repeated
hyperplane cuts, so the representation is built around an incremental
clip: vertices are classified against the cutting plane, crossing edges
produce new vertices, and both the children and the separating facet are
stitched together from the classified vertex cycles.

Lower-dimensional polytopes (polygons, segments, points) may live in a
higher-dimensional ambient space.  Polygons carry an orthonormal frame and
do all metric work in intrinsic 2-D coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

# relative tolerances, scaled by the size of the object being cut
GEOM_RTOL = 1e-9
VOL_RTOL = 1e-12


class DegenerateGeometryError(ValueError):
    """Raised when a polytope has (numerically) zero content."""


# ---------------------------------------------------------------------------
# hyperplanes


def canonical_direction(u: np.ndarray) -> tuple[np.ndarray, float]:
    """Return ``(u', sign)`` with ``u' = sign * u`` in the closed upper half-space.

    The last nonzero coordinate of ``u'`` is positive, which fixes one
    representative of each unoriented direction (equator ties fall through
    to the preceding coordinates).
    """
    nz = np.flatnonzero(u)
    if nz.size == 0:
        raise ValueError("zero direction")
    sign = 1.0 if u[nz[-1]] > 0 else -1.0
    return sign * u, sign


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """The affine hyperplane ``{x : <x, normal> = offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        u = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(u)
        if norm == 0 or not np.isfinite(norm):
            raise ValueError("hyperplane normal must be a nonzero finite vector")
        u = u / norm
        off = float(self.offset) / norm
        u, sign = canonical_direction(u)
        object.__setattr__(self, "normal", u)
        object.__setattr__(self, "offset", sign * off)

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.normal - self.offset

    def __repr__(self) -> str:
        return f"Hyperplane(normal={np.round(self.normal, 6).tolist()}, offset={self.offset:.6g})"


def plane_basis(n: np.ndarray) -> np.ndarray:
    """Orthonormal ``(e1, e2)`` spanning ``n``'s complement with ``e1 x e2 = n``."""
    k = int(np.argmin(np.abs(n)))
    a = np.zeros(3)
    a[k] = 1.0
    e1 = a - (a @ n) * n
    e1 /= math.sqrt(e1 @ e1)
    e2 = np.array(
        [n[1] * e1[2] - n[2] * e1[1], n[2] * e1[0] - n[0] * e1[2], n[0] * e1[1] - n[1] * e1[0]]
    )
    return np.vstack([e1, e2])


# ---------------------------------------------------------------------------
# polytope classes


class Polytope:
    """Common interface of the convex polytopes handled here."""

    dim: int
    ambient_dim: int

    @property
    def vertices(self) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def intrinsic_volume(self, j: int) -> float:
        if not 0 <= j <= self.dim:
            raise ValueError(f"intrinsic volume order {j} out of range 0..{self.dim}")
        return self._intrinsic_volume(j)

    def _intrinsic_volume(self, j: int) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def intrinsic_volumes(self) -> np.ndarray:
        """All of ``V_0 .. V_dim`` as an array."""
        return np.array([self._intrinsic_volume(j) for j in range(self.dim + 1)])

    @property
    def content(self) -> float:
        """The ``dim``-dimensional volume."""
        return self._intrinsic_volume(self.dim)

    @cached_property
    def diameter(self) -> float:
        v = self.vertices
        if len(v) < 2:
            return 0.0
        diff = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((diff**2).sum(-1).max()))

    @cached_property
    def bbox_diagonal(self) -> float:
        v = self.vertices
        return float(np.linalg.norm(v.max(0) - v.min(0)))

    @cached_property
    def centroid(self) -> np.ndarray:
        """Vertex average (an interior point, not the centre of mass)."""
        return self.vertices.mean(axis=0)

    def support_interval(self, u: np.ndarray) -> tuple[float, float]:
        u = np.asarray(u, dtype=float)
        nu = np.linalg.norm(u)
        if nu == 0:
            raise ValueError("zero-length direction")
        proj = self.vertices @ (u / nu)
        return float(proj.min()), float(proj.max())

    def width(self, u: np.ndarray) -> float:
        lo, hi = self.support_interval(u)
        return hi - lo

    def faces(self, j: int) -> list["Polytope"]:
        if not 0 <= j <= self.dim:
            raise ValueError(f"face dimension {j} out of range 0..{self.dim}")
        if j == self.dim:
            return [self]
        return self._faces(j)

    def _faces(self, j: int) -> list["Polytope"]:  # pragma: no cover - abstract
        raise NotImplementedError

    def clip(self, plane: Hyperplane, eps: float | None = None) -> "ClipResult":
        return clip(self, plane, eps)

    def scaled(self, s: float) -> "Polytope":
        return self.transformed(np.eye(self.ambient_dim) * s)

    def translated(self, b) -> "Polytope":
        return self.transformed(np.eye(self.ambient_dim), b)

    def transformed(self, A: np.ndarray, b=None) -> "Polytope":  # pragma: no cover
        raise NotImplementedError


class Point(Polytope):
    dim = 0

    def __init__(self, x):
        self.x = np.asarray(x, dtype=float)
        self.ambient_dim = self.x.shape[0]

    @property
    def vertices(self):
        return self.x[None, :]

    def _intrinsic_volume(self, j):
        return 1.0

    def transformed(self, A, b=None):
        y = np.asarray(A) @ self.x
        return Point(y if b is None else y + b)

    def __repr__(self):
        return f"Point({self.x.tolist()})"


class Segment(Polytope):
    dim = 1

    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.ambient_dim = self.a.shape[0]

    @property
    def vertices(self):
        return np.vstack([self.a, self.b])

    @cached_property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))

    def _intrinsic_volume(self, j):
        return 1.0 if j == 0 else self.length

    def _faces(self, j):
        return [Point(self.a), Point(self.b)]

    def transformed(self, A, b=None):
        A = np.asarray(A)
        shift = 0.0 if b is None else np.asarray(b)
        return Segment(A @ self.a + shift, A @ self.b + shift)

    def __repr__(self):
        return f"Segment({self.a.tolist()}, {self.b.tolist()})"


class Polygon(Polytope):
    """Convex polygon, CCW in its intrinsic frame.

    ``coords`` are intrinsic 2-D coordinates; the ambient position of an
    intrinsic point ``p`` is ``origin + p @ axes``.  For a planar polygon
    ``axes`` is the identity.  When embedded in 3-space the frame normal is
    ``axes[0] x axes[1]``.
    """

    dim = 2

    def __init__(self, coords, origin=None, axes=None):
        self.coords = np.asarray(coords, dtype=float)
        if axes is None:
            axes = np.eye(2)
            origin = np.zeros(2)
        self.axes = np.asarray(axes, dtype=float)
        self.origin = np.asarray(origin, dtype=float)
        self.ambient_dim = self.axes.shape[1]

    @classmethod
    def planar(cls, coords) -> "Polygon":
        return cls(coords)

    @cached_property
    def vertices(self) -> np.ndarray:
        return self.origin + self.coords @ self.axes

    @property
    def normal(self) -> np.ndarray | None:
        if self.ambient_dim != 3:
            return None
        return np.cross(self.axes[0], self.axes[1])

    @cached_property
    def area(self) -> float:
        x, y = self.coords[:, 0], self.coords[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @cached_property
    def perimeter(self) -> float:
        d = np.roll(self.coords, -1, axis=0) - self.coords
        return float(np.sqrt((d**2).sum(1)).sum())

    def _intrinsic_volume(self, j):
        if j == 0:
            return 1.0
        if j == 1:
            return 0.5 * self.perimeter
        return self.area

    def _faces(self, j):
        v = self.vertices
        if j == 0:
            return [Point(x) for x in v]
        w = np.roll(v, -1, axis=0)
        return [Segment(a, b) for a, b in zip(v, w)]

    def intrinsic(self) -> "Polygon":
        """The same polygon as a planar (ambient 2-D) object."""
        return Polygon(self.coords.copy())

    def transformed(self, A, b=None):
        A = np.asarray(A, dtype=float)
        origin = A @ self.origin + (0.0 if b is None else np.asarray(b))
        axes = self.axes @ A.T
        # a similarity keeps the frame orthogonal; renormalise and rescale coords
        scale = np.linalg.norm(axes[0])
        return Polygon(self.coords * scale, origin, axes / scale)

    def __repr__(self):
        return f"Polygon(n={len(self.coords)}, area={self.area:.6g})"


class Polyhedron(Polytope):
    """Convex 3-polytope: vertices, outward-oriented facet cycles and facet planes.

    ``faces[k]`` lists vertex indices counter-clockwise seen from outside;
    ``normals[k] . x <= offsets[k]`` is the supporting halfspace of face k.
    """

    dim = 3
    ambient_dim = 3

    def __init__(self, vertices, faces: Sequence[Sequence[int]], normals, offsets):
        self._vertices = np.asarray(vertices, dtype=float)
        self.face_cycles = tuple(tuple(int(i) for i in f) for f in faces)
        self.normals = np.asarray(normals, dtype=float)
        self.offsets = np.asarray(offsets, dtype=float)

    @property
    def vertices(self):
        return self._vertices

    @cached_property
    def edge_faces(self) -> dict[tuple[int, int], list[int]]:
        """Map each edge ``(i, j)``, ``i < j``, to its two incident faces."""
        out: dict[tuple[int, int], list[int]] = {}
        for k, cyc in enumerate(self.face_cycles):
            m = len(cyc)
            for a in range(m):
                i, j = cyc[a], cyc[(a + 1) % m]
                key = (i, j) if i < j else (j, i)
                out.setdefault(key, []).append(k)
        return out

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(self.edge_faces)

    @cached_property
    def face_areas(self) -> np.ndarray:
        V = self._vertices
        i0, i1, i2, fid = [], [], [], []
        for k, cyc in enumerate(self.face_cycles):
            m = len(cyc) - 2
            i0.extend([cyc[0]] * m)
            i1.extend(cyc[1:-1])
            i2.extend(cyc[2:])
            fid.extend([k] * m)
        a = V[i1] - V[i0]
        b = V[i2] - V[i0]
        n = self.normals[fid]
        # (a x b) . n, fan triangles of each face
        tri = (
            (a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]) * n[:, 0]
            + (a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]) * n[:, 1]
            + (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]) * n[:, 2]
        )
        return 0.5 * np.bincount(fid, weights=tri, minlength=len(self.face_cycles))

    @cached_property
    def _metrics(self) -> tuple[float, float]:
        A = self.face_areas
        heights = self.offsets - self.normals @ self.centroid
        return float(A @ heights) / 3.0, float(A.sum())

    @property
    def volume(self) -> float:
        return self._metrics[0]

    @property
    def surface_area(self) -> float:
        return self._metrics[1]

    @cached_property
    def mean_curvature_sum(self) -> float:
        """``sum_edges length * exterior dihedral angle``."""
        keys = list(self.edge_faces.items())
        ij = np.array([k for k, _ in keys])
        ff = np.array([f for _, f in keys])
        V = self._vertices
        lengths = np.linalg.norm(V[ij[:, 0]] - V[ij[:, 1]], axis=1)
        cosang = np.einsum("ij,ij->i", self.normals[ff[:, 0]], self.normals[ff[:, 1]])
        return float(lengths @ np.arccos(np.clip(cosang, -1.0, 1.0)))

    def _intrinsic_volume(self, j):
        if j == 0:
            return 1.0
        if j == 1:
            return self.mean_curvature_sum / (2.0 * math.pi)
        if j == 2:
            return 0.5 * self.surface_area
        return self.volume

    def face_polygon(self, k: int) -> Polygon:
        cyc = list(self.face_cycles[k])
        n = self.normals[k]
        axes = plane_basis(n)
        origin = self._vertices[cyc[0]]
        coords = (self._vertices[cyc] - origin) @ axes.T
        return Polygon(coords, origin, axes)

    def _faces(self, j):
        V = self._vertices
        if j == 0:
            return [Point(x) for x in V]
        if j == 1:
            return [Segment(V[a], V[b]) for a, b in self.edge_faces]
        return [self.face_polygon(k) for k in range(len(self.face_cycles))]

    def euler_characteristic(self) -> int:
        return len(self._vertices) - len(self.edge_faces) + len(self.face_cycles)

    def transformed(self, A, b=None):
        A = np.asarray(A, dtype=float)
        shift = np.zeros(3) if b is None else np.asarray(b, dtype=float)
        V = self._vertices @ A.T + shift
        # normals transform with the inverse transpose
        N = self.normals @ np.linalg.inv(A)
        scale = np.linalg.norm(N, axis=1)
        N = N / scale[:, None]
        offsets = np.einsum("ij,ij->i", N, V[[c[0] for c in self.face_cycles]])
        if np.linalg.det(A) < 0:
            faces = [tuple(reversed(c)) for c in self.face_cycles]
        else:
            faces = self.face_cycles
        return Polyhedron(V, faces, N, offsets)

    def check(self, eps: float | None = None) -> None:
        """Audit convexity, planarity, orientation and the Euler relation."""
        eps = GEOM_RTOL * self.bbox_diagonal if eps is None else eps
        V = self._vertices
        viol = V @ self.normals.T - self.offsets
        if viol.max() > eps:
            raise AssertionError(f"vertex violates a facet halfspace by {viol.max():.3g}")
        for k, cyc in enumerate(self.face_cycles):
            d = V[list(cyc)] @ self.normals[k] - self.offsets[k]
            if np.abs(d).max() > eps:
                raise AssertionError(f"face {k} is not planar")
            P = V[list(cyc)]
            cr = np.cross(P[1:-1] - P[0], P[2:] - P[0]).sum(0)
            if cr @ self.normals[k] <= 0:
                raise AssertionError(f"face {k} is not outward oriented")
        if any(len(f) != 2 for f in self.edge_faces.values()):
            raise AssertionError("edge not shared by exactly two faces")
        if self.euler_characteristic() != 2:
            raise AssertionError("Euler relation violated")

    def __repr__(self):
        return (
            f"Polyhedron(V={len(self._vertices)}, E={len(self.edge_faces)}, "
            f"F={len(self.face_cycles)}, volume={self.volume:.6g})"
        )


def intrinsic_volume(P: Polytope, j: int) -> float:
    return P.intrinsic_volume(j)


def faces(P: Polytope, j: int) -> list[Polytope]:
    return P.faces(j)


def width(P: Polytope, u) -> float:
    return P.width(u)


def diameter(P: Polytope) -> float:
    return P.diameter


def support_interval(P: Polytope, u) -> tuple[float, float]:
    return P.support_interval(u)


# ---------------------------------------------------------------------------
# clipping


class ClipResult(NamedTuple):
    """Children on the ``>= offset`` and ``<= offset`` sides and the separating facet."""

    plus: Polytope | None
    minus: Polytope | None
    facet: Polytope | None

    @property
    def missed(self) -> bool:
        return self.plus is None or self.minus is None


MISS = ClipResult(None, None, None)


def _classify(s: np.ndarray, eps: float) -> np.ndarray:
    return np.where(s > eps, 1, np.where(s < -eps, -1, 0))


def _order_cap(points: np.ndarray, n: np.ndarray):
    """Sort coplanar points CCW around ``n``; return (coords2d, origin, axes, order)."""
    axes = plane_basis(n)
    c = points.mean(axis=0)
    q = (points - c) @ axes.T
    order = np.argsort(np.arctan2(q[:, 1], q[:, 0]), kind="stable")
    return q[order], c, axes, order


def _clip_polyhedron(P: Polyhedron, H: Hyperplane, eps: float, want_children=True):
    n, r = H.normal, H.offset
    V = P.vertices
    s = V @ n - r
    side = _classify(s, eps)
    if not (side > 0).any() or not (side < 0).any():
        return MISS
    side_l = side.tolist()
    s_l = s.tolist()
    n_old = len(V)
    new_pts: list[np.ndarray] = []
    cut_index: dict[tuple[int, int], int] = {}

    def cut(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        idx = cut_index.get(key)
        if idx is None:
            lam = s_l[a] / (s_l[a] - s_l[b])
            new_pts.append(V[a] + lam * (V[b] - V[a]))
            idx = n_old + len(new_pts) - 1
            cut_index[key] = idx
        return idx

    plus_faces, plus_k, minus_faces, minus_k = [], [], [], []
    for k, cyc in enumerate(P.face_cycles):
        sides = [side_l[i] for i in cyc]
        if min(sides) >= 0:
            if max(sides) > 0:
                plus_faces.append(cyc)
                plus_k.append(k)
            continue
        if max(sides) <= 0:
            minus_faces.append(cyc)
            minus_k.append(k)
            continue
        fp, fm = [], []
        m = len(cyc)
        for a in range(m):
            i, j = cyc[a], cyc[(a + 1) % m]
            si, sj = sides[a], sides[(a + 1) % m]
            if si >= 0:
                fp.append(i)
            if si <= 0:
                fm.append(i)
            if si * sj < 0:
                c = cut(i, j)
                fp.append(c)
                fm.append(c)
        if len(fp) >= 3:
            plus_faces.append(tuple(fp))
            plus_k.append(k)
        if len(fm) >= 3:
            minus_faces.append(tuple(fm))
            minus_k.append(k)

    on_plane = [i for i, sd in enumerate(side_l) if sd == 0]
    cap_idx = on_plane + list(range(n_old, n_old + len(new_pts)))
    allV = np.vstack([V, np.array(new_pts)]) if new_pts else V
    if len(cap_idx) < 3:
        return MISS
    coords, origin, axes, order = _order_cap(allV[cap_idx], n)
    cap_cycle = [cap_idx[i] for i in order]  # CCW about +n
    facet = Polygon(coords, origin, axes)
    if not want_children:
        return ClipResult(None, None, facet)

    def build(face_list, ks, cap, cap_normal, cap_offset):
        face_list = face_list + [tuple(cap)]
        used = sorted({i for f in face_list for i in f})
        remap = {old: new for new, old in enumerate(used)}
        faces_new = [tuple(remap[i] for i in f) for f in face_list]
        normals = np.vstack([P.normals[ks], cap_normal[None, :]])
        offsets = np.concatenate([P.offsets[ks], [cap_offset]])
        return Polyhedron(allV[used], faces_new, normals, offsets)

    plus = build(plus_faces, plus_k, cap_cycle[::-1], -n, -r)
    minus = build(minus_faces, minus_k, cap_cycle, n, r)
    return ClipResult(plus, minus, facet)


def _clip_polygon(P: Polygon, H: Hyperplane, eps: float, want_children=True):
    s = P.vertices @ H.normal - H.offset
    side = _classify(s, eps)
    if not (side > 0).any() or not (side < 0).any():
        return MISS
    C = P.coords
    m = len(C)
    fp, fm, cap = [], [], []
    for a in range(m):
        b = (a + 1) % m
        sa, sb = side[a], side[b]
        if sa >= 0:
            fp.append(C[a])
        if sa <= 0:
            fm.append(C[a])
        if sa == 0:
            cap.append(C[a])
        if sa * sb < 0:
            lam = s[a] / (s[a] - s[b])
            q = C[a] + lam * (C[b] - C[a])
            fp.append(q)
            fm.append(q)
            cap.append(q)
    if len(cap) != 2:
        return MISS
    ends = [P.origin + q @ P.axes for q in cap]
    facet = Segment(ends[0], ends[1])
    if not want_children:
        return ClipResult(None, None, facet)
    if len(fp) < 3 or len(fm) < 3:
        return MISS
    return ClipResult(
        Polygon(np.array(fp), P.origin, P.axes), Polygon(np.array(fm), P.origin, P.axes), facet
    )


def _clip_segment(P: Segment, H: Hyperplane, eps: float, want_children=True):
    sa = float(P.a @ H.normal - H.offset)
    sb = float(P.b @ H.normal - H.offset)
    if not ((sa > eps and sb < -eps) or (sa < -eps and sb > eps)):
        return MISS
    q = P.a + sa / (sa - sb) * (P.b - P.a)
    if sa > 0:
        return ClipResult(Segment(P.a, q), Segment(q, P.b), Point(q))
    return ClipResult(Segment(q, P.b), Segment(P.a, q), Point(q))


def clip(P: Polytope, H: Hyperplane, eps: float | None = None) -> ClipResult:
    """Split ``P`` by ``H`` into ``(plus, minus, facet)``.

    ``plus`` is the part with ``<x, normal> >= offset``.  Vertices within
    ``eps`` of the plane are shared by both children.  When the plane does
    not cut the interior (or one child has negligible content) the result
    is a miss with all three entries ``None``.
    """
    if H.dim != P.ambient_dim:
        raise ValueError("hyperplane and polytope live in different spaces")
    if eps is None:
        eps = GEOM_RTOL * P.bbox_diagonal
    if isinstance(P, Polyhedron):
        res = _clip_polyhedron(P, H, eps)
    elif isinstance(P, Polygon):
        res = _clip_polygon(P, H, eps)
    elif isinstance(P, Segment):
        res = _clip_segment(P, H, eps)
    else:
        raise TypeError(f"cannot clip {type(P).__name__}")
    if res.missed:
        return MISS
    whole = P.content
    if min(res.plus.content, res.minus.content) < VOL_RTOL * whole:
        return MISS
    return res


def section(P: Polytope, H: Hyperplane, eps: float | None = None) -> Polytope | None:
    """``P ∩ H`` as a (dim-1)-polytope, or ``None`` when H misses the interior."""
    if eps is None:
        eps = GEOM_RTOL * P.bbox_diagonal
    if isinstance(P, Polyhedron):
        return _clip_polyhedron(P, H, eps, want_children=False).facet
    if isinstance(P, Polygon):
        return _clip_polygon(P, H, eps, want_children=False).facet
    if isinstance(P, Segment):
        return _clip_segment(P, H, eps).facet
    raise TypeError(f"cannot section {type(P).__name__}")


def clip_halfspace(P: Polytope, normal, offset: float, eps: float | None = None) -> Polytope | None:
    """Part of ``P`` in ``{x : <x, normal> <= offset}``; ``None`` if that part is negligible."""
    normal = np.asarray(normal, dtype=float)
    if eps is None:
        eps = GEOM_RTOL * max(P.bbox_diagonal, 1.0)
    s = (P.vertices @ normal - offset) / np.linalg.norm(normal)
    if s.max() <= eps:
        return P
    if s.min() >= -eps or isinstance(P, Point):
        return None
    H = Hyperplane(normal, offset)
    res = clip(P, H, eps)
    if res.missed:
        return P if s.mean() < 0 else None
    flipped = H.normal @ normal < 0
    return res.plus if flipped else res.minus
