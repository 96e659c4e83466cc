"""Low-level planar geometry shared by the domain, solver and sections modules.

Everything here is pure numpy on float64 arrays. Polygons are (m, 2) arrays of
counterclockwise-ordered vertices; chains are closed implicitly (last vertex
connects back to the first).
"""

from __future__ import annotations

import numpy as np

# Relative tolerance for exact-geometry predicates (hull membership,
# convexity of vertex lists).
GEOM_TOL = 1e-10


def cross2(o, a, b):
    """Cross product (a-o) x (b-o); positive when o->a->b turns left."""
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (
        a[..., 1] - o[..., 1]
    ) * (b[..., 0] - o[..., 0])


def convex_hull_2d(points: np.ndarray, collinear_eps: float = 0.0) -> np.ndarray:
    """Counterclockwise convex hull via the monotone chain. Ties are broken
    by lexicographic vertex order so the result is deterministic bit-for-bit.

    With collinear_eps = 0 only exactly-collinear points are dropped, so
    every input point stays on the hull within fp noise; a positive value
    (absolute, in cross-product units) also merges near-collinear vertices,
    giving a slightly smaller inscribed polygon with well-separated facets.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected an (m, 2) point array")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(np.diff(pts, axis=0) != 0.0, axis=1)
    pts = pts[keep]
    if len(pts) <= 2:
        return pts

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and cross2(out[-2], out[-1], p) <= collinear_eps:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def polygon_area(verts: np.ndarray) -> float:
    """Signed shoelace area; positive for counterclockwise order."""
    x = verts[:, 0]
    y = verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(verts: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon (falls back to the vertex mean for
    degenerate, zero-area inputs)."""
    x = verts[:, 0]
    y = verts[:, 1]
    xr = np.roll(x, -1)
    yr = np.roll(y, -1)
    w = x * yr - xr * y
    a = 0.5 * np.sum(w)
    if abs(a) < 1e-300:
        return verts.mean(axis=0)
    cx = np.sum((x + xr) * w) / (6.0 * a)
    cy = np.sum((y + yr) * w) / (6.0 * a)
    return np.array([cx, cy])


def point_in_convex_polygon(points: np.ndarray, verts: np.ndarray, tol: float = 0.0):
    """Membership of `points` in the closed convex polygon `verts` (ccw).

    `tol` is an absolute slack on the edge half-plane tests (positive values
    accept points slightly outside).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = verts
    b = np.roll(verts, -1, axis=0)
    edge = b - a  # (m,2)
    rel0 = pts[:, None, 0] - a[None, :, 0]
    rel1 = pts[:, None, 1] - a[None, :, 1]
    crossv = edge[None, :, 0] * rel1 - edge[None, :, 1] * rel0
    lens = np.hypot(edge[:, 0], edge[:, 1])
    inside = np.all(crossv >= -tol * lens[None, :], axis=1)
    return inside if points.ndim > 1 else bool(inside[0])


def polygon_support(verts: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Support function h(d) = max_v <v, d> of the polygon for each direction."""
    return np.max(directions @ verts.T, axis=-1)


def segment_ray_crossings(origin, direction, chain_a, chain_b):
    """Smallest t > 0 with origin + t*direction on one of the segments
    [chain_a[i], chain_b[i]]. Returns +inf when the ray misses every segment."""
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    e = chain_b - chain_a
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    w = o - chain_a
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]) / denom
        s = (d[0] * w[:, 1] - d[1] * w[:, 0]) / denom
    ok = (np.abs(denom) > 1e-300) & (s >= -1e-12) & (s <= 1 + 1e-12) & (t > 1e-14)
    if not np.any(ok):
        return np.inf
    return float(np.min(t[ok]))


def min_distance_to_chain(points: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Distance from each point to the closed polygonal chain `verts`."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = verts
    b = np.roll(verts, -1, axis=0)
    e = b - a
    ee = np.sum(e * e, axis=1)
    ee[ee == 0.0] = 1e-300
    rel = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.sum(rel * e[None, :, :], axis=2) / ee[None, :], 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * e[None, :, :]
    dist = np.min(np.linalg.norm(pts[:, None, :] - proj, axis=2), axis=1)
    return dist if points.ndim > 1 else float(dist[0])


def hausdorff_distance(pts_a: np.ndarray, pts_b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two finite point sets."""
    d = np.linalg.norm(pts_a[:, None, :] - pts_b[None, :, :], axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def unit_ball_volume(n: int) -> float:
    """Volume of the n-dimensional unit ball."""
    from math import gamma, pi

    return pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)
