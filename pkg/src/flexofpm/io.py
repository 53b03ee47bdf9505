"""File formats: result CSVs, legacy VTK, and the plain-text domain file."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .geometry import (Edge, GeometryError, Outline, Partition, Subdomain, _edge_h_raw, cell_kind,
                       polygon_area)

__all__ = [
    "DomainFormatError",
    "NODAL_HEADER",
    "GAUSS_HEADER",
    "BENCH_HEADER",
    "write_nodal_csv",
    "write_gauss_csv",
    "write_vtk",
    "write_domain",
    "read_domain",
    "write_table",
]

NODAL_HEADER = ("point_id", "x", "y", "u1", "u2", "phi")
GAUSS_HEADER = ("x", "y", "e11", "e22", "e12",
                "k111", "k222", "k121", "k122", "k221", "k112",
                "s11", "s22", "s12", "E1", "E2", "P1", "P2")
BENCH_HEADER = ("benchmark", "npoints", "e_u", "e_phi", "assemble_s", "solve_s", "nnz")

DOMAIN_MAGIC = "FPM-DOMAIN v1"


class DomainFormatError(ValueError):
    pass


def _num(x):
    # shortest repr that round-trips exactly; keeps outputs byte-stable
    return repr(float(x))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_nodal_csv(path, points, u, phi):
    """One row per point: id, coordinates, nodal displacement and potential."""
    rows = ((i, _num(p[0]), _num(p[1]), _num(v[0]), _num(v[1]), _num(f))
            for i, (p, v, f) in enumerate(zip(points, u, phi)))
    _write_rows(path, NODAL_HEADER, rows)


def write_gauss_csv(path, sample):
    """Derived fields at every cell quadrature point.

    Strains are tensor components (e12 is half the engineering shear);
    ``kjkl`` is the strain gradient u_l,jk.
    """
    k = sample.kappa
    # internal layout stores 2*u1,12 and 2*u2,12
    kt = np.column_stack([k[:, 0], k[:, 1], 0.5 * k[:, 2], 0.5 * k[:, 3], k[:, 4], k[:, 5]])
    e = sample.eps
    cols = np.column_stack([sample.xy, e[:, 0], e[:, 1], 0.5 * e[:, 2], kt,
                            sample.sigma, sample.E, sample.P])
    _write_rows(path, GAUSS_HEADER, ([_num(v) for v in r] for r in cols))


def write_table(path, rows, header=BENCH_HEADER):
    """CSV of dict rows restricted to ``header``; floats at full precision."""
    def fmt(v):
        return _num(v) if isinstance(v, (float, np.floating)) else v
    _write_rows(path, header, ([fmt(r[h]) for h in header] for r in rows))


def write_vtk(path, problem, title="flexofpm solution"):
    """Legacy ASCII unstructured grid, one polygon per cell.

    Vertices are duplicated per cell because the trial functions are
    discontinuous; point data are each cell's own trial evaluated at its
    vertices. Cell data carry the nodal values of the cell's point.
    """
    part = problem.partition
    sol = problem.solution
    verts, conn, u_v, phi_v = [], [], [], []
    start = 0
    for cell in part.cells:
        poly = np.asarray(cell.polygon, dtype=float)
        u, phi, *_ = problem.sample_cell(cell.point_id, poly)
        verts.append(poly)
        u_v.append(u)
        phi_v.append(phi)
        conn.append(list(range(start, start + len(poly))))
        start += len(poly)
    verts = np.concatenate(verts)
    u_v = np.concatenate(u_v)
    phi_v = np.concatenate(phi_v)
    npts = len(verts)
    ncell = len(conn)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {npts} double"]
    lines += [f"{_num(x)} {_num(y)} 0.0" for x, y in verts]
    lines.append(f"CELLS {ncell} {ncell + sum(len(c) for c in conn)}")
    lines += [" ".join(map(str, [len(c)] + c)) for c in conn]
    lines.append(f"CELL_TYPES {ncell}")
    lines += ["7"] * ncell  # VTK_POLYGON
    lines += [f"POINT_DATA {npts}", "VECTORS u double"]
    lines += [f"{_num(a)} {_num(b)} 0.0" for a, b in u_v]
    lines += ["SCALARS phi double 1", "LOOKUP_TABLE default"]
    lines += [_num(v) for v in phi_v]
    ubar, phibar = sol.ubar, sol.phibar
    lines += [f"CELL_DATA {ncell}", "SCALARS point_id int 1", "LOOKUP_TABLE default"]
    lines += [str(c.point_id) for c in part.cells]
    lines.append("VECTORS u_nodal double")
    lines += [f"{_num(ubar[c.point_id, 0])} {_num(ubar[c.point_id, 1])} 0.0" for c in part.cells]
    lines += ["SCALARS phi_nodal double 1", "LOOKUP_TABLE default"]
    lines += [_num(phibar[c.point_id]) for c in part.cells]
    Path(path).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# domain file
# --------------------------------------------------------------------------

def write_domain(path, partition):
    for e in partition.edges:
        if e.kind == "external" and (not e.label or any(ch.isspace() for ch in e.label)):
            raise DomainFormatError(f"edge {e.edge_id}: label {e.label!r} is not a single token")
    out = [DOMAIN_MAGIC, f"POINTS {partition.npoints}"]
    out += [f"{i} {_num(x)} {_num(y)}" for i, (x, y) in enumerate(partition.points)]
    out.append(f"CELLS {len(partition.cells)}")
    for c in partition.cells:
        coords = " ".join(f"{_num(x)} {_num(y)}" for x, y in c.polygon)
        out.append(f"{c.cell_id} {c.point_id} {len(c.polygon)} {coords}")
    out.append(f"EDGES {len(partition.edges)}")
    for e in partition.edges:
        (x1, y1), (x2, y2) = e.endpoints
        tag = e.label if e.kind == "external" else "-"
        out.append(f"{e.edge_id} {e.kind} {e.left_cell} {e.right_cell} {_num(e.normal[0])} "
                   f"{_num(e.normal[1])} {_num(x1)} {_num(y1)} {_num(x2)} {_num(y2)} {tag}")
    Path(path).write_text("\n".join(out) + "\n")


class _Lines:
    def __init__(self, text):
        self.lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines()) if ln.strip()]
        self.pos = 0

    def next(self, what):
        if self.pos >= len(self.lines):
            raise DomainFormatError(f"unexpected end of file while reading {what}")
        item = self.lines[self.pos]
        self.pos += 1
        return item

    def section(self, name):
        no, tok = self.next(f"section {name}")
        if len(tok) != 2 or tok[0] != name:
            raise DomainFormatError(f"line {no}: expected '{name} <count>'")
        try:
            return int(tok[1])
        except ValueError:
            raise DomainFormatError(f"line {no}: bad count {tok[1]!r}") from None


def _floats(no, tok):
    try:
        return [float(t) for t in tok]
    except ValueError:
        raise DomainFormatError(f"line {no}: expected numbers") from None


def _ints(no, tok):
    try:
        return [int(t) for t in tok]
    except ValueError:
        raise DomainFormatError(f"line {no}: expected integers") from None


def _outline_from_edges(edges, scale):
    """Chain the external edges into the CCW boundary, merging collinear runs."""
    ext = [e for e in edges if e.kind == "external"]
    if len(ext) < 3:
        raise DomainFormatError("fewer than three external edges")
    tol = 1e-9 * scale
    starts = np.array([e.endpoints[0] for e in ext])
    used = np.zeros(len(ext), dtype=bool)
    order = [0]
    used[0] = True
    for _ in range(len(ext) - 1):
        end = ext[order[-1]].endpoints[1]
        d = np.hypot(*(starts - end).T)
        d[used] = np.inf
        k = int(np.argmin(d))
        if d[k] > tol:
            raise DomainFormatError("external edges do not form a closed boundary")
        order.append(k)
        used[k] = True
    chain = [ext[k] for k in order]
    # start on a corner so the merge below never straddles the seam
    def corner(prev, cur):
        cross = prev.normal[0] * cur.normal[1] - prev.normal[1] * cur.normal[0]
        return prev.label != cur.label or abs(cross) > 1e-12
    first = next((i for i in range(len(chain)) if corner(chain[i - 1], chain[i])), 0)
    chain = chain[first:] + chain[:first]
    verts, labels = [], []
    for i, e in enumerate(chain):
        if i == 0 or corner(chain[i - 1], e):
            verts.append(e.endpoints[0])
            labels.append(e.label)
    return Outline(np.array(verts), tuple(labels))


def read_domain(path):
    """Parse a domain file back into a :class:`~flexofpm.geometry.Partition`."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DomainFormatError(f"cannot read domain file: {exc}") from None
    src = _Lines(text)
    no, tok = src.next("header")
    if " ".join(tok) != DOMAIN_MAGIC:
        raise DomainFormatError(f"line {no}: missing '{DOMAIN_MAGIC}' header")

    n = src.section("POINTS")
    points = np.zeros((n, 2))
    for k in range(n):
        no, tok = src.next("POINTS")
        if len(tok) != 3 or _ints(no, tok[:1])[0] != k:
            raise DomainFormatError(f"line {no}: expected '{k} x y'")
        points[k] = _floats(no, tok[1:])

    nc = src.section("CELLS")
    cells = []
    for k in range(nc):
        no, tok = src.next("CELLS")
        if len(tok) < 3:
            raise DomainFormatError(f"line {no}: truncated cell record")
        cid, pid, nv = _ints(no, tok[:3])
        if cid != k or not 0 <= pid < n or nv < 3 or len(tok) != 3 + 2 * nv:
            raise DomainFormatError(f"line {no}: malformed cell record")
        poly = np.array(_floats(no, tok[3:])).reshape(nv, 2)
        area = polygon_area(poly)
        if area <= 0:
            raise DomainFormatError(f"line {no}: cell polygon must be CCW with positive area")
        cells.append(Subdomain(cid, poly, pid, area, cell_kind(poly)))

    ne = src.section("EDGES")
    edges = []
    for k in range(ne):
        no, tok = src.next("EDGES")
        if len(tok) != 11:
            raise DomainFormatError(f"line {no}: edge record needs 11 fields")
        eid, left, right = _ints(no, [tok[0], tok[2], tok[3]])
        kind = tok[1]
        if eid != k or kind not in ("internal", "external"):
            raise DomainFormatError(f"line {no}: malformed edge record")
        if not 0 <= left < nc or (kind == "internal") != (0 <= right < nc):
            raise DomainFormatError(f"line {no}: edge cells out of range")
        n1, n2, x1, y1, x2, y2 = _floats(no, tok[4:10])
        ends = np.array([[x1, y1], [x2, y2]])
        d = ends[1] - ends[0]
        e = Edge(eid, ends, kind, left, right, np.array([n1, n2]), float(np.hypot(d[0], d[1])),
                 0.0, tok[10] if kind == "external" else "")
        e.h_e = _edge_h_raw(e, points)
        edges.append(e)
    if src.pos != len(src.lines):
        no, _ = src.lines[src.pos]
        raise DomainFormatError(f"line {no}: trailing content")

    scale = float(np.ptp(np.concatenate([c.polygon for c in cells]), axis=0).max())
    try:
        outline = _outline_from_edges(edges, scale)
    except GeometryError as exc:
        raise DomainFormatError(f"invalid boundary: {exc}") from None
    neighbors = [set() for _ in range(n)]
    for e in edges:
        if e.kind == "internal":
            neighbors[e.left_cell].add(e.right_cell)
            neighbors[e.right_cell].add(e.left_cell)
    return Partition(points, cells, edges, outline, [sorted(s) for s in neighbors])
