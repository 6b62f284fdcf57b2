"""Simulation of STIT tessellations, Poisson hyperplane tessellations,
iteration of tessellations and planar sections.

``run_mnw`` is an event-driven pure-jump process: every living cell holds an
exponential clock with rate equal to the hyperplane measure of the cell;
the globally earliest clock fires, the cell is cut by a hitting hyperplane
and both children receive fresh clocks.  The resulting facet log is time
ordered, so any intermediate state ``Y(s, W)``, ``s <= t``, is a prefix of it.
"""
from __future__ import annotations

import csv
import hashlib
import heapq
import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np

from .geometry import GEOM_RTOL, Hyperplane, Polytope, clip, section as section_polytope
from .geometry.off import write_off
from .measure import gamma, lambda_hitting, sample_hitting_hyperplane

log = logging.getLogger(__name__)


class Kind(str, Enum):
    STIT = "STIT"
    PHT = "PHT"
    ITERATED = "ITERATED"
    SECTION = "SECTION"


@dataclass(frozen=True, eq=False)
class FacetRecord:
    facet_id: int
    facet: Polytope
    birth_time: float
    normal: np.ndarray
    parent_cell_id: int
    child_ids: tuple[int, int]


@dataclass(frozen=True, eq=False)
class CellRecord:
    cell_id: int
    polytope: Polytope
    birth_time: float
    death_time: float = math.inf

    def alive_at(self, s: float) -> bool:
        return self.birth_time <= s < self.death_time


@dataclass(eq=False)
class Tessellation:
    """Result of one engine run.

    ``history`` (STIT and ITERATED runs) holds every cell that ever existed
    with its lifetime, which makes ``cells_at`` available for all times.
    """

    window: Polytope | None
    horizon: float
    facets: list[FacetRecord]
    cells: list[CellRecord]
    kind: Kind
    history: list[CellRecord] | None = None
    resamples: int = 0
    eps: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        """Dimension of the tessellated region (2 for sections of spatial runs)."""
        return self.window.dim if self.window is not None else 0

    @property
    def empty(self) -> bool:
        return self.window is None

    @cached_property
    def birth_times(self) -> np.ndarray:
        return np.array([f.birth_time for f in self.facets], dtype=float)

    @cached_property
    def facet_volumes(self) -> np.ndarray:
        """``(n_facets, d)`` array with ``V_0 .. V_{d-1}`` of every facet."""
        if not self.facets:
            return np.zeros((0, max(self.d, 1)))
        return np.array([f.facet.intrinsic_volumes() for f in self.facets])

    def n_facets_at(self, s: float) -> int:
        if s < 0 or s > self.horizon * (1 + 1e-12):
            raise ValueError(f"time {s} outside [0, {self.horizon}]")
        return bisect_right(self.birth_times.tolist(), s)

    def state_at(self, s: float) -> list[FacetRecord]:
        """Facets born up to time ``s``."""
        return self.facets[: self.n_facets_at(s)]

    def cells_at(self, s: float) -> list[CellRecord]:
        if s < 0 or s > self.horizon * (1 + 1e-12):
            raise ValueError(f"time {s} outside [0, {self.horizon}]")
        if self.history is None:
            if s == self.horizon:
                return list(self.cells)
            raise ValueError(f"{self.kind.value} tessellations keep no cell history")
        if s >= self.horizon:
            return list(self.cells)
        return [c for c in self.history if c.alive_at(s)]

    def summary_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.birth_times.tobytes())
        h.update(self.facet_volumes.tobytes())
        h.update(np.array([len(self.cells)], dtype=np.int64).tobytes())
        return h.hexdigest()

    # -- export ---------------------------------------------------------------

    def write_facet_csv(self, path) -> Path:
        """Columns: facet_id, birth_time, area, perimeter, n_vertices, parent_cell_id.

        ``area`` is the (d-1)-volume of the facet, ``perimeter`` twice its
        ``V_{d-2}`` (for segments: the number of endpoints).
        """
        path = Path(path)
        d = self.d
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["facet_id", "birth_time", "area", "perimeter", "n_vertices", "parent_cell_id"])
            for f, vols in zip(self.facets, self.facet_volumes):
                w.writerow(
                    [
                        f.facet_id,
                        repr(f.birth_time),
                        repr(float(vols[d - 1])),
                        repr(float(2 * vols[d - 2])),
                        len(f.facet.vertices),
                        f.parent_cell_id,
                    ]
                )
        return path

    def write_off(self, cells_path=None, facets_path=None) -> None:
        if cells_path is not None:
            write_off(cells_path, [c.polytope for c in self.cells])
        if facets_path is not None:
            write_off(facets_path, [f.facet for f in self.facets])


def _check_window(W: Polytope) -> None:
    if W.ambient_dim not in (2, 3) or W.dim != W.ambient_dim:
        raise ValueError("window must be a full-dimensional polytope in d = 2 or 3")
    if not W.content > 0:
        raise ValueError("degenerate window")


def run_mnw(
    W: Polytope,
    t: float,
    rng: np.random.Generator,
    eps: float | None = None,
    keep_history: bool = True,
) -> Tessellation:
    """Simulate the STIT tessellation ``Y(t, W)`` by random cell division."""
    if not t > 0:
        raise ValueError("construction time must be positive")
    _check_window(W)
    d = W.ambient_dim
    eps = GEOM_RTOL * W.diameter if eps is None else eps
    g1 = gamma(1, d)

    heap: list[tuple[float, int]] = []
    alive: dict[int, tuple[Polytope, float]] = {}
    dead: list[CellRecord] = []
    facets: list[FacetRecord] = []
    next_id = 0
    resamples = 0

    def spawn(poly: Polytope, birth: float) -> int:
        nonlocal next_id
        cid = next_id
        next_id += 1
        rate = g1 * poly.intrinsic_volume(1)
        alive[cid] = (poly, birth)
        split = birth + rng.exponential(1.0 / rate)
        if split <= t:
            heapq.heappush(heap, (split, cid))
        return cid

    spawn(W, 0.0)
    while heap:
        time, cid = heapq.heappop(heap)
        poly, birth = alive.pop(cid)
        while True:
            H = sample_hitting_hyperplane(poly, rng)
            res = clip(poly, H, eps)
            if not res.missed:
                break
            resamples += 1
        if keep_history:
            dead.append(CellRecord(cid, poly, birth, time))
        plus = spawn(res.plus, time)
        minus = spawn(res.minus, time)
        facets.append(FacetRecord(len(facets), res.facet, time, H.normal, cid, (plus, minus)))

    if resamples:
        log.info("run_mnw: %d hyperplane resamples", resamples)
    cells = [CellRecord(cid, p, b) for cid, (p, b) in sorted(alive.items())]
    history = sorted(dead + cells, key=lambda c: c.cell_id) if keep_history else None
    return Tessellation(W, float(t), facets, cells, Kind.STIT, history, resamples, eps)


def run_pht(
    W: Polytope,
    t: float,
    rng: np.random.Generator,
    eps: float | None = None,
    faces: bool = True,
) -> Tessellation:
    """Poisson hyperplane tessellation of ``W`` with intensity ``t * Λ``.

    Facets are the (d-1)-faces of the arrangement.  With ``faces`` they are
    enumerated hyperplane by hyperplane, cutting ``W ∩ H_i`` by all other
    hyperplanes.  Each hyperplane carries an arrival time uniform on
    ``[0, t]`` which is used as the birth time of its faces.
    """
    if not t > 0:
        raise ValueError("intensity must be positive")
    _check_window(W)
    eps = GEOM_RTOL * W.diameter if eps is None else eps
    n = rng.poisson(t * lambda_hitting(W))
    planes = [sample_hitting_hyperplane(W, rng) for _ in range(n)]
    arrivals = np.sort(rng.uniform(0.0, t, n))

    cells: list[Polytope] = [W]
    for H in planes:
        nxt = []
        for c in cells:
            res = clip(c, H, eps)
            if res.missed:
                nxt.append(c)
            else:
                nxt.extend((res.plus, res.minus))
        cells = nxt

    facets: list[FacetRecord] = []
    if faces:
        for i, H in enumerate(planes):
            base = section_polytope(W, H, eps)
            if base is None:
                continue
            pieces = [base]
            for j, G in enumerate(planes):
                if j == i:
                    continue
                nxt = []
                for p in pieces:
                    res = clip(p, G, eps)
                    if res.missed:
                        nxt.append(p)
                    else:
                        nxt.extend((res.plus, res.minus))
                pieces = nxt
            for p in pieces:
                facets.append(FacetRecord(len(facets), p, float(arrivals[i]), H.normal, -1, (-1, -1)))
        facets.sort(key=lambda f: f.birth_time)
        facets = [
            FacetRecord(k, f.facet, f.birth_time, f.normal, -1, (-1, -1)) for k, f in enumerate(facets)
        ]
    out = Tessellation(
        W, float(t), facets, [CellRecord(k, c, 0.0) for k, c in enumerate(cells)], Kind.PHT, None, 0, eps
    )
    out.meta["n_hyperplanes"] = n
    return out


def iterate(primary: Tessellation, s: float, rng: np.random.Generator) -> Tessellation:
    """Nest an independent ``Y(s, c)`` into every cell ``c`` of ``primary``."""
    if s < 0:
        raise ValueError("iteration time must be nonnegative")
    if primary.kind not in (Kind.STIT, Kind.ITERATED):
        raise ValueError("iteration needs a STIT frame tessellation")
    if s == 0:
        return primary
    t0 = primary.horizon
    base = 1 + max(c.cell_id for c in (primary.history or primary.cells))
    final_ids = {c.cell_id for c in primary.cells}
    history = [c for c in (primary.history or []) if c.cell_id not in final_ids]
    facets = list(primary.facets)
    cells: list[CellRecord] = []
    resamples = primary.resamples
    for c in primary.cells:
        sub = run_mnw(c.polytope, s, rng, eps=primary.eps)
        resamples += sub.resamples
        top = max(r.cell_id for r in sub.history)

        def remap(k: int, _c=c.cell_id, _b=base) -> int:
            return _c if k == 0 else _b + k - 1

        for r in sub.history:
            birth = c.birth_time if r.cell_id == 0 else t0 + r.birth_time
            rec = CellRecord(remap(r.cell_id), r.polytope, birth, t0 + r.death_time)
            history.append(rec)
            if math.isinf(r.death_time):
                cells.append(rec)
        for f in sub.facets:
            facets.append(
                FacetRecord(
                    -1,
                    f.facet,
                    t0 + f.birth_time,
                    f.normal,
                    remap(f.parent_cell_id),
                    (remap(f.child_ids[0]), remap(f.child_ids[1])),
                )
            )
        base += top
    facets.sort(key=lambda f: f.birth_time)
    facets = [
        FacetRecord(k, f.facet, f.birth_time, f.normal, f.parent_cell_id, f.child_ids)
        for k, f in enumerate(facets)
    ]
    history.sort(key=lambda r: r.cell_id)
    cells.sort(key=lambda r: r.cell_id)
    return Tessellation(
        primary.window, t0 + s, facets, cells, Kind.ITERATED, history, resamples, primary.eps
    )


def section(tess: Tessellation, E: Hyperplane) -> Tessellation:
    """Intersect a spatial tessellation with the plane ``E``.

    Cells are the nonempty ``cell ∩ E``, facets the segments ``facet ∩ E``
    (birth times are kept).  If ``E`` misses the window the result is empty
    (``window`` is ``None``).
    """
    if tess.d != 3:
        raise ValueError("sections are implemented for spatial tessellations")
    win = section_polytope(tess.window, E, tess.eps)
    if win is None:
        return Tessellation(None, tess.horizon, [], [], Kind.SECTION, None, 0, tess.eps)
    cells = []
    for c in tess.cells:
        p = section_polytope(c.polytope, E, tess.eps)
        if p is not None:
            cells.append(CellRecord(c.cell_id, p, c.birth_time, c.death_time))
    facets = []
    for f in tess.facets:
        seg = section_polytope(f.facet, E, tess.eps)
        if seg is not None:
            facets.append(FacetRecord(len(facets), seg, f.birth_time, f.normal, f.parent_cell_id, f.child_ids))
    out = Tessellation(win, tess.horizon, facets, cells, Kind.SECTION, None, 0, tess.eps)
    out.meta["plane"] = (E.normal.tolist(), E.offset)
    return out


def state_at(tess: Tessellation, s: float) -> list[FacetRecord]:
    return tess.state_at(s)
