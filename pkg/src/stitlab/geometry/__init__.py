from .constructors import make_ball_approx, make_box, make_simplex, polyhedron_from_planes
from .off import merged_off, read_off, to_off, write_off
from .polytope import (
    GEOM_RTOL,
    VOL_RTOL,
    ClipResult,
    DegenerateGeometryError,
    Hyperplane,
    Point,
    Polygon,
    Polyhedron,
    Polytope,
    Segment,
    clip,
    clip_halfspace,
    diameter,
    faces,
    intrinsic_volume,
    plane_basis,
    section,
    support_interval,
    width,
)

__all__ = [
    "GEOM_RTOL",
    "VOL_RTOL",
    "ClipResult",
    "DegenerateGeometryError",
    "Hyperplane",
    "Point",
    "Polygon",
    "Polyhedron",
    "Polytope",
    "Segment",
    "clip",
    "clip_halfspace",
    "diameter",
    "faces",
    "intrinsic_volume",
    "make_ball_approx",
    "make_box",
    "make_simplex",
    "merged_off",
    "plane_basis",
    "polyhedron_from_planes",
    "read_off",
    "section",
    "support_interval",
    "to_off",
    "width",
    "write_off",
]
