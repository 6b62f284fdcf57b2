"""ASCII OFF mesh export for polytopes and facet collections."""
from __future__ import annotations

import io
from pathlib import Path
from typing import Iterable

import numpy as np

from .polytope import Polygon, Polyhedron, Polytope, Segment


def _mesh(p: Polytope) -> tuple[np.ndarray, list[list[int]]]:
    V = p.vertices
    if V.shape[1] == 2:
        V = np.column_stack([V, np.zeros(len(V))])
    if isinstance(p, Polyhedron):
        return V, [list(f) for f in p.face_cycles]
    if isinstance(p, Polygon):
        return V, [list(range(len(V)))]
    if isinstance(p, Segment):
        return V, [[0, 1]]
    return V, [[0]]


def to_off(p: Polytope) -> str:
    V, F = _mesh(p)
    buf = io.StringIO()
    buf.write("OFF\n")
    buf.write(f"{len(V)} {len(F)} 0\n")
    for x in V:
        buf.write(" ".join(f"{c:.12g}" for c in x) + "\n")
    for f in F:
        buf.write(f"{len(f)} " + " ".join(map(str, f)) + "\n")
    return buf.getvalue()


def merged_off(objects: Iterable[Polytope]) -> str:
    """Single OFF mesh holding all objects (vertices are not shared)."""
    verts, faces = [], []
    base = 0
    for p in objects:
        V, F = _mesh(p)
        verts.append(V)
        faces.extend([[i + base for i in f] for f in F])
        base += len(V)
    V = np.vstack(verts) if verts else np.zeros((0, 3))
    buf = io.StringIO()
    buf.write("OFF\n")
    buf.write(f"{len(V)} {len(faces)} 0\n")
    for x in V:
        buf.write(" ".join(f"{c:.12g}" for c in x) + "\n")
    for f in faces:
        buf.write(f"{len(f)} " + " ".join(map(str, f)) + "\n")
    return buf.getvalue()


def write_off(path, objects, merge: bool = False) -> Path:
    """Write one OFF block per object (concatenated) or one merged mesh."""
    if isinstance(objects, Polytope):
        objects = [objects]
    objects = list(objects)
    text = merged_off(objects) if merge else "".join(to_off(p) for p in objects)
    path = Path(path)
    path.write_text(text)
    return path


def read_off(text: str) -> list[tuple[np.ndarray, list[list[int]]]]:
    """Parse concatenated OFF blocks into ``(vertices, faces)`` pairs."""
    tokens = [ln.split("#")[0].split() for ln in text.splitlines()]
    lines = [t for t in tokens if t]
    out = []
    i = 0
    while i < len(lines):
        if lines[i] != ["OFF"]:
            raise ValueError(f"expected OFF header, got {lines[i]}")
        nv, nf = int(lines[i + 1][0]), int(lines[i + 1][1])
        i += 2
        V = np.array([[float(c) for c in lines[i + k]] for k in range(nv)]).reshape(nv, 3)
        i += nv
        F = [[int(c) for c in lines[i + k][1:]] for k in range(nf)]
        i += nf
        out.append((V, F))
    return out
