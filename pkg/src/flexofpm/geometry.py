"""Point clouds, one-point-per-cell partitions, edge graph and supports.

Every partition produced here has ``cell_id == point_id``: cell ``i`` owns
point ``i``. Cell polygons are CCW. Internal edges are stored once, with the
lower cell id as the left cell (E1) and the normal pointing out of it.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, QhullError

__all__ = [
    "GeometryError",
    "Outline",
    "PointCloud",
    "Subdomain",
    "Edge",
    "Partition",
    "SupportSet",
    "polygon_area",
    "polygon_centroid",
    "rectangle",
    "trapezoid",
    "generate_grid_points",
    "partition_voronoi",
    "partition_quadrilateral",
    "partition_polar",
    "partition_mapped",
    "build_supports",
    "edge_h",
    "point_segment_distance",
]

MIN_SUPPORT = 10


class GeometryError(ValueError):
    """Invalid geometric input (degenerate grid, collinear points, ...)."""


def polygon_area(poly):
    """Signed shoelace area (positive for CCW)."""
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(poly):
    p = np.asarray(poly, dtype=float)
    # shift to the first vertex to limit cancellation on small cells
    o = p[0]
    q = p - o
    x, y = q[:, 0], q[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    if abs(a) == 0.0:
        raise GeometryError("degenerate polygon (zero area)")
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy]) + o


def point_segment_distance(p, a, b):
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    t = np.dot(p - a, ab) / np.dot(ab, ab)
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (a + t * ab)))


@dataclass(frozen=True)
class Outline:
    """Closed CCW polygon with one boundary label per side.

    Side ``i`` runs from ``vertices[i]`` to ``vertices[i + 1]``.
    """

    vertices: np.ndarray
    labels: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("outline needs at least 3 vertices")
        if len(self.labels) != len(v):
            raise GeometryError("one label per outline side is required")
        if polygon_area(v) <= 0.0:
            raise GeometryError("outline must be CCW with positive area")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def area(self):
        return polygon_area(self.vertices)

    @property
    def scale(self):
        return float(np.ptp(self.vertices, axis=0).max())

    def is_convex(self, tol=1e-12):
        v = self.vertices
        d1 = np.roll(v, -1, axis=0) - v
        d2 = np.roll(d1, -1, axis=0)
        cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        return bool(np.all(cross >= -tol * self.scale**2))

    def contains(self, pts, strict=True):
        """Even-odd test; ``strict`` rejects points within 1e-12*scale of a side."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        x, y = pts[:, 0][:, None], pts[:, 1][:, None]
        cond = (v[:, 1] > y) != (w[:, 1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = v[:, 0] + (y - v[:, 1]) * (w[:, 0] - v[:, 0]) / (w[:, 1] - v[:, 1])
        inside = (np.sum(cond & (x < xint), axis=1) % 2) == 1
        if strict:
            tol = 1e-12 * self.scale
            for i in range(len(v)):
                for k, p in enumerate(pts):
                    if inside[k] and point_segment_distance(p, v[i], w[i]) <= tol:
                        inside[k] = False
        return inside

    def side_of(self, a, b, tol=None):
        """Index of the outline side containing segment ``a``-``b``, or None."""
        tol = 1e-9 * self.scale if tol is None else tol
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        for i in range(len(v)):
            if (point_segment_distance(a, v[i], w[i]) <= tol
                    and point_segment_distance(b, v[i], w[i]) <= tol):
                return i
        return None


def rectangle(x0, y0, x1, y1, labels=("bottom", "right", "top", "left")):
    if not (x1 > x0 and y1 > y0):
        raise GeometryError("degenerate rectangle")
    return Outline(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]), labels)


def trapezoid(bottom_width, top_width, height, labels=("bottom", "right", "top", "left")):
    """Symmetric trapezoid about x = 0 with its base on y = 0."""
    a2, a1 = 0.5 * bottom_width, 0.5 * top_width
    return Outline(np.array([[-a2, 0.0], [a2, 0.0], [a1, height], [-a1, height]]), labels)


@dataclass(frozen=True)
class PointCloud:
    coords: np.ndarray
    outline: Outline

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 2 or c.shape[1] != 2:
            raise GeometryError("coords must be an (n, 2) array")
        object.__setattr__(self, "coords", c)

    def validate(self):
        if not np.all(self.outline.contains(self.coords, strict=True)):
            raise GeometryError("all points must lie strictly inside the outline")
        if len(self.coords) > 1:
            from scipy.spatial import cKDTree

            d, _ = cKDTree(self.coords).query(self.coords, k=2)
            if np.min(d[:, 1]) <= 0.0:
                raise GeometryError("coincident points")
        return self


@dataclass
class Subdomain:
    cell_id: int
    polygon: np.ndarray
    point_id: int
    area: float
    kind: str = "polygon"  # "quad" for 4-gons (2x2 Gauss rule)


@dataclass
class Edge:
    edge_id: int
    endpoints: np.ndarray  # (2, 2)
    kind: str  # "internal" | "external"
    left_cell: int
    right_cell: int  # -1 for external edges
    normal: np.ndarray
    length: float
    h_e: float = 0.0
    label: str = ""  # outline side label for external edges

    @property
    def midpoint(self):
        return 0.5 * (self.endpoints[0] + self.endpoints[1])


@dataclass
class Partition:
    points: np.ndarray
    cells: list
    edges: list
    outline: Outline
    neighbors: list = field(default_factory=list)

    @property
    def npoints(self):
        return len(self.points)

    def boundary_cells(self):
        out = np.zeros(self.npoints, dtype=bool)
        for e in self.edges:
            if e.kind == "external":
                out[e.left_cell] = True
        return out

    def edges_by_label(self, label):
        return [e for e in self.edges if e.kind == "external" and e.label == label]


@dataclass(frozen=True)
class SupportSet:
    center: int
    members: tuple

    @property
    def m(self):
        return len(self.members)


def generate_grid_points(nx, ny, outline):
    """Cell centers of a uniform ``nx`` x ``ny`` lattice over a rectangular outline."""
    if nx < 2 or ny < 2:
        raise GeometryError("invalid grid: nx and ny must be >= 2")
    lo = outline.vertices.min(axis=0)
    hi = outline.vertices.max(axis=0)
    if not np.all(hi > lo):
        raise GeometryError("degenerate rectangle")
    xs = lo[0] + (np.arange(nx) + 0.5) * (hi[0] - lo[0]) / nx
    ys = lo[1] + (np.arange(ny) + 0.5) * (hi[1] - lo[1]) / ny
    X, Y = np.meshgrid(xs, ys)
    return PointCloud(np.column_stack([X.ravel(), Y.ravel()]), outline)


# --------------------------------------------------------------------------
# clipping with side tags
# --------------------------------------------------------------------------

def _clip_halfplane(poly, tags, normal, offset, new_tag):
    """Keep {x : normal . x <= offset}. ``tags[i]`` labels side poly[i]->poly[i+1]."""
    n = len(poly)
    if n == 0:
        return poly, tags
    s = poly @ normal - offset
    scale = max(1.0, float(np.abs(poly).max()))
    eps = 1e-14 * scale * float(np.linalg.norm(normal))
    inside = s <= eps
    if inside.all():
        return poly, tags
    if not inside.any():
        return np.empty((0, 2)), []
    out, out_tags = [], []
    for i in range(n):
        j = (i + 1) % n
        pi, pj = poly[i], poly[j]
        if inside[i]:
            out.append(pi)
            if inside[j]:
                out_tags.append(tags[i])
            else:
                t = s[i] / (s[i] - s[j])
                out_tags.append(tags[i])
                out.append(pi + t * (pj - pi))
                out_tags.append(new_tag)
        elif inside[j]:
            t = s[i] / (s[i] - s[j])
            out.append(pi + t * (pj - pi))
            out_tags.append(tags[i])
    return np.array(out), out_tags


def _clip_to_convex(poly, tags, clip_poly, clip_tags):
    for k in range(len(clip_poly)):
        a, b = clip_poly[k], clip_poly[(k + 1) % len(clip_poly)]
        d = b - a
        nrm = np.array([d[1], -d[0]])
        poly, tags = _clip_halfplane(poly, tags, nrm, float(nrm @ a), clip_tags[k])
        if len(poly) == 0:
            break
    return poly, tags


def _drop_short_sides(poly, tags, tol):
    keep_p, keep_t = [], []
    n = len(poly)
    for i in range(n):
        if np.linalg.norm(poly[(i + 1) % n] - poly[i]) > tol:
            keep_p.append(poly[i])
            keep_t.append(tags[i])
    return np.array(keep_p), keep_t


def cell_kind(poly):
    return "quad" if len(poly) == 4 else "polygon"


def _assemble_partition(points, polys, tags, outline):
    """Build cells/edges from per-cell CCW polygons whose sides carry tags.

    A tag is ``("cell", j)`` for a side shared with cell ``j`` or
    ``("outline", k)`` for a side on outline side ``k``.
    """
    npts = len(points)
    cells = []
    for i in range(npts):
        area = polygon_area(polys[i])
        if area <= 0.0:
            raise GeometryError(f"cell {i} is degenerate")
        cells.append(Subdomain(i, polys[i], i, area, cell_kind(polys[i])))

    edges = []
    tol = 1e-9 * outline.scale
    for i in range(npts):
        poly, tg = polys[i], tags[i]
        n = len(poly)
        for s in range(n):
            a, b = poly[s], poly[(s + 1) % n]
            kind_tag, ref = tg[s]
            if kind_tag == "cell" and 0 <= ref < npts:
                if ref < i:
                    continue  # stored from the lower id
                edges.append(_make_edge(a, b, "internal", i, ref, ""))
            else:
                k = ref if kind_tag == "outline" else outline.side_of(a, b, tol)
                if k is None:
                    raise GeometryError(f"side of cell {i} is neither shared nor on the outline")
                edges.append(_make_edge(a, b, "external", i, -1, outline.labels[k]))
    for k, e in enumerate(edges):
        e.edge_id = k
        e.h_e = _edge_h_raw(e, points)

    neighbors = [[] for _ in range(npts)]
    for e in edges:
        if e.kind == "internal":
            neighbors[e.left_cell].append(e.right_cell)
            neighbors[e.right_cell].append(e.left_cell)
    neighbors = [sorted(set(nb)) for nb in neighbors]
    return Partition(np.asarray(points, dtype=float), cells, edges, outline, neighbors)


def _make_edge(a, b, kind, left, right, label):
    d = b - a
    length = float(np.hypot(d[0], d[1]))
    normal = np.array([d[1], -d[0]]) / length
    return Edge(-1, np.array([a, b], dtype=float), kind, left, right, normal, length, 0.0, label)


def _edge_h_raw(edge, points):
    if edge.kind == "internal":
        return float(np.linalg.norm(points[edge.left_cell] - points[edge.right_cell]))
    return point_segment_distance(points[edge.left_cell], *edge.endpoints)


def edge_h(edge, partition):
    """Penalty length: point-to-point distance (internal) or point-to-side distance."""
    return _edge_h_raw(edge, partition.points)


# --------------------------------------------------------------------------
# partitions
# --------------------------------------------------------------------------

def partition_voronoi(cloud):
    """Bounded Voronoi diagram of ``cloud`` clipped to its (convex) outline."""
    pts = np.asarray(cloud.coords, dtype=float)
    outline = cloud.outline
    if len(pts) < 3:
        raise GeometryError("too few points for a Voronoi partition (need >= 3)")
    if not outline.is_convex():
        raise GeometryError("Voronoi clipping requires a convex outline")
    cloud.validate()
    try:
        tri = Delaunay(pts)
    except QhullError as exc:
        raise GeometryError("collinear or degenerate point set") from exc
    indptr, nbr = tri.vertex_neighbor_vertices
    base_tags = [("outline", k) for k in range(len(outline.vertices))]
    tol = 1e-10 * outline.scale
    polys, tags = [], []
    for i in range(len(pts)):
        poly, tg = outline.vertices.copy(), list(base_tags)
        for j in sorted(nbr[indptr[i]:indptr[i + 1]]):
            d = pts[j] - pts[i]
            mid = 0.5 * (pts[i] + pts[j])
            poly, tg = _clip_halfplane(poly, tg, d, float(d @ mid), ("cell", int(j)))
        poly, tg = _drop_short_sides(poly, tg, tol)
        polys.append(poly)
        tags.append(tg)
    _check_shared_sides(polys, tags)
    return _assemble_partition(pts, polys, tags, outline)


def _check_shared_sides(polys, tags):
    # a side tagged (cell, j) in cell i must have a partner in cell j;
    # otherwise it collapsed to a point in j and is re-tagged there too
    sides = defaultdict(int)
    for i, tg in enumerate(tags):
        for t in tg:
            if t[0] == "cell":
                sides[(min(i, t[1]), max(i, t[1]))] += 1
    for i, tg in enumerate(tags):
        for s, t in enumerate(tg):
            if t[0] == "cell" and sides[(min(i, t[1]), max(i, t[1]))] != 2:
                raise GeometryError(f"inconsistent Voronoi facet between cells {i} and {t[1]}")


def partition_quadrilateral(nx, ny, outline, min_area_fraction=1e-6):
    """Uniform rectangular grid over the outline's bounding box, clipped to it.

    Cells falling outside (or keeping less than ``min_area_fraction`` of a full
    grid cell) are dropped; the internal point is the centroid of the clipped
    cell.
    """
    if nx < 2 or ny < 2:
        raise GeometryError("invalid grid: nx and ny must be >= 2")
    if not outline.is_convex():
        raise GeometryError("quadrilateral clipping requires a convex outline")
    lo = outline.vertices.min(axis=0)
    hi = outline.vertices.max(axis=0)
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    full = (xs[1] - xs[0]) * (ys[1] - ys[0])
    clip_tags = [("outline", k) for k in range(len(outline.vertices))]
    grid_id = -np.ones((ny, nx), dtype=int)
    raw = []
    for j in range(ny):
        for i in range(nx):
            rect = np.array([[xs[i], ys[j]], [xs[i + 1], ys[j]],
                             [xs[i + 1], ys[j + 1]], [xs[i], ys[j + 1]]])
            # neighbours encoded by grid position, resolved after dropping
            tg = [("grid", (j - 1, i)), ("grid", (j, i + 1)),
                  ("grid", (j + 1, i)), ("grid", (j, i - 1))]
            poly, tg = _clip_to_convex(rect, tg, outline.vertices, clip_tags)
            if len(poly) < 3:
                continue
            poly, tg = _drop_short_sides(poly, tg, 1e-10 * outline.scale)
            if len(poly) < 3 or polygon_area(poly) < min_area_fraction * full:
                continue
            grid_id[j, i] = len(raw)
            raw.append((poly, tg))
    polys, tags, pts = [], [], []
    for poly, tg in raw:
        new_tg = []
        for kind, ref in tg:
            if kind == "grid":
                jj, ii = ref
                inside = 0 <= jj < ny and 0 <= ii < nx and grid_id[jj, ii] >= 0
                new_tg.append(("cell", int(grid_id[jj, ii])) if inside else ("lookup", None))
            else:
                new_tg.append((kind, ref))
        polys.append(poly)
        tags.append(new_tg)
        pts.append(polygon_centroid(poly))
    return _assemble_partition(np.array(pts), polys, tags, outline)


def partition_polar(nr, ntheta, r_inner, r_outer, theta0=0.0, theta1=0.5 * np.pi,
                    labels=("inner", "outer", "start", "end")):
    """Structured partition of an annular sector into straight-sided quads.

    Vertices lie on ``nr + 1`` uniformly spaced circles and ``ntheta + 1``
    uniformly spaced rays; internal points are the quad centroids. The outline
    is the polygonal sector traced by the grid. ``labels`` name the inner arc,
    outer arc, the ray at ``theta0`` and the ray at ``theta1``.
    """
    if nr < 1 or ntheta < 1:
        raise GeometryError("invalid grid: nr and ntheta must be >= 1")
    if not (0.0 < r_inner < r_outer) or not (theta1 > theta0):
        raise GeometryError("degenerate annular sector")
    rs = np.linspace(r_inner, r_outer, nr + 1)
    ts = np.linspace(theta0, theta1, ntheta + 1)
    lab_in, lab_out, lab_start, lab_end = labels

    # outline: inner arc (reversed, CCW overall), start ray, outer arc, end ray
    inner = np.column_stack([r_inner * np.cos(ts), r_inner * np.sin(ts)])
    outer = np.column_stack([r_outer * np.cos(ts), r_outer * np.sin(ts)])
    ray0 = np.column_stack([rs * np.cos(theta0), rs * np.sin(theta0)])
    ray1 = np.column_stack([rs * np.cos(theta1), rs * np.sin(theta1)])
    verts = np.vstack([ray0[:-1], outer[:-1], ray1[::-1][:-1], inner[::-1][:-1]])
    olabels = [lab_start] * nr + [lab_out] * ntheta + [lab_end] * nr + [lab_in] * ntheta
    outline = Outline(verts, olabels)
    k_start, k_out, k_end, k_in = 0, nr, nr + ntheta, 2 * nr + ntheta

    def cid(ir, it):
        return ir * ntheta + it

    polys, tags, pts = [], [], []
    for ir in range(nr):
        for it in range(ntheta):
            r0, r1 = rs[ir], rs[ir + 1]
            t0, t1 = ts[it], ts[it + 1]
            poly = np.array([[r0 * np.cos(t0), r0 * np.sin(t0)],
                             [r1 * np.cos(t0), r1 * np.sin(t0)],
                             [r1 * np.cos(t1), r1 * np.sin(t1)],
                             [r0 * np.cos(t1), r0 * np.sin(t1)]])
            tg = [
                ("cell", cid(ir, it - 1)) if it > 0 else ("outline", k_start + ir),
                ("cell", cid(ir + 1, it)) if ir < nr - 1 else ("outline", k_out + it),
                ("cell", cid(ir, it + 1)) if it < ntheta - 1 else ("outline", k_end + (nr - 1 - ir)),
                ("cell", cid(ir - 1, it)) if ir > 0 else ("outline", k_in + (ntheta - 1 - it)),
            ]
            polys.append(poly)
            tags.append(tg)
            pts.append(polygon_centroid(poly))
    return _assemble_partition(np.array(pts), polys, tags, outline)


def partition_mapped(nx, ny, outline):
    """Ruled quad grid on a 4-sided convex outline (bottom, right, top, left).

    Row ``j`` lies between the straight lines joining points at height
    fraction ``j/ny`` on the left and right sides; columns split each such line
    uniformly. Internal points are quad centroids.
    """
    if nx < 2 or ny < 2:
        raise GeometryError("invalid grid: nx and ny must be >= 2")
    v = outline.vertices
    if len(v) != 4:
        raise GeometryError("mapped grid needs a 4-sided outline")
    p00, p10, p11, p01 = v
    s = np.linspace(0.0, 1.0, nx + 1)
    t = np.linspace(0.0, 1.0, ny + 1)
    S, T = np.meshgrid(s, t)
    X = ((1 - S) * (1 - T))[..., None] * p00 + (S * (1 - T))[..., None] * p10 \
        + (S * T)[..., None] * p11 + ((1 - S) * T)[..., None] * p01

    def cid(j, i):
        return j * nx + i

    polys, tags, pts = [], [], []
    for j in range(ny):
        for i in range(nx):
            poly = np.array([X[j, i], X[j, i + 1], X[j + 1, i + 1], X[j + 1, i]])
            tg = [
                ("cell", cid(j - 1, i)) if j > 0 else ("outline", 0),
                ("cell", cid(j, i + 1)) if i < nx - 1 else ("outline", 1),
                ("cell", cid(j + 1, i)) if j < ny - 1 else ("outline", 2),
                ("cell", cid(j, i - 1)) if i > 0 else ("outline", 3),
            ]
            polys.append(poly)
            tags.append(tg)
            pts.append(polygon_centroid(poly))
    return _assemble_partition(np.array(pts), polys, tags, outline)


# --------------------------------------------------------------------------
# supports
# --------------------------------------------------------------------------

def build_supports(partition, min_size=MIN_SUPPORT):
    """Nearest + second neighbours, plus a third ring for boundary cells.

    Cells whose support is still smaller than ``min_size`` (corners of
    structured grids) keep growing ring by ring until the partition runs out.
    """
    nb = partition.neighbors
    on_boundary = partition.boundary_cells()
    supports = []
    for c in range(partition.npoints):
        members = {c}
        front = {c}
        rings = 3 if on_boundary[c] else 2
        k = 0
        while True:
            nxt = set()
            for j in front:
                nxt.update(nb[j])
            nxt -= members
            k += 1
            if k > rings and (len(members) - 1 >= min_size or not nxt):
                break
            if not nxt:
                break
            members |= nxt
            front = nxt
        members.discard(c)
        if len(members) < min_size:
            raise GeometryError(
                f"insufficient support for point {c}: m = {len(members)} < {min_size}")
        supports.append(SupportSet(c, tuple(sorted(members))))
    return supports
