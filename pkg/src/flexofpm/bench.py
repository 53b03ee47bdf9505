"""The three built-in benchmarks, their references and error norms.

* ``cylinder``: quarter of a hollow cylinder under radial displacement and
  potential control (flexoelectric, non-piezoelectric);
* ``block``: 20 x 10 um block under a narrow strip load;
* ``pyramid``: piezo/flexoelectric truncated pyramid with a floating bottom
  electrode.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import BCData, EdgeBC, PenaltyParams, symmetry_defect
from .geometry import (GeometryError, PointCloud, generate_grid_points, partition_mapped,
                       partition_polar, partition_quadrilateral, partition_voronoi, rectangle,
                       trapezoid)
from .material import MaterialProperties, constitutive_set
from .model import Problem
from .oracle import lame_cylinder_oracle, radial_flexo_oracle
from .solver import ConstraintSet

__all__ = [
    "BENCHMARKS",
    "BenchmarkSpec",
    "BenchmarkError",
    "BenchmarkResult",
    "cylinder_spec",
    "block_spec",
    "pyramid_spec",
    "default_spec",
    "build_benchmark",
    "benchmark_partition",
    "reference_for",
    "error_norms",
    "run_benchmark",
    "strip_overlap",
    "pyramid_balance",
    "face_forces",
]

BENCHMARKS = ("cylinder", "block", "pyramid")


class BenchmarkError(ValueError):
    pass


CYLINDER_MATERIAL = MaterialProperties(139e9, 0.3, l=2e-6, mu11=1e-6, mu12=1e-6, mu44=1e-6,
                                       k11=1e-9, k33=1e-9)
PYRAMID_MATERIAL = MaterialProperties(100e9, 0.37, l=0.0, mu11=0.0, mu12=1e-6, mu44=0.0,
                                      k11=11e-9, k33=12.48e-9, e33=-4.4)


VORONOI_C0 = 2.0


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    material: MaterialProperties
    geometry: dict
    load: dict
    grid: tuple
    c0: float
    penalties: PenaltyParams
    partition: str = "quad"
    seed: int = 0

    def __post_init__(self):
        if self.name not in BENCHMARKS:
            raise BenchmarkError(f"unknown benchmark {self.name!r}")
        if self.c0 <= 0:
            raise BenchmarkError("c0 must be positive")
        if len(self.grid) != 2 or min(self.grid) < 2:
            raise BenchmarkError("grid needs two counts >= 2")

    @property
    def npoints(self):
        return int(self.grid[0] * self.grid[1])

    def refined(self, level):
        """Grid counts multiplied by 2**level in both directions."""
        f = 2 ** int(level)
        return replace(self, grid=(self.grid[0] * f, self.grid[1] * f))

    def with_(self, **kw):
        return replace(self, **kw)


def cylinder_spec(elastic=False, grid=(21, 60), c0=np.sqrt(10.0), **kw):
    """Hollow cylinder; ``grid`` = (radial, angular) subdivisions of the quarter.

    ``elastic=True`` switches off gradient, flexo and piezo terms.
    """
    E = CYLINDER_MATERIAL.E_young
    mat = CYLINDER_MATERIAL
    if elastic:
        mat = mat.with_(l=0.0, mu11=0.0, mu12=0.0, mu44=0.0)
    pen = PenaltyParams(eta11=1e10 * E, eta12=1e10 * E, eta13=1e10 * mat.k33,
                        eta21=2.0 * E, eta22=100.0 * E, eta23=0.0)
    geom = {"r_i": 10e-6, "r_o": 20e-6}
    load = {"u_i": 0.045e-6, "u_o": 0.05e-6, "phi_i": 0.0, "phi_o": 1.0}
    return BenchmarkSpec("cylinder", mat, geom, load, tuple(grid), float(c0), pen, **kw)


def block_spec(partition="quad", grid=(80, 40), c0=None, **kw):
    """Strip-loaded block. Voronoi supports are larger (about six edge
    neighbours per cell), so they default to a smaller shape constant that
    keeps every MQ system well inside the conditioning limit."""
    if c0 is None:
        c0 = VORONOI_C0 if partition == "voronoi" else np.sqrt(20.0)
    E = CYLINDER_MATERIAL.E_young
    pen = PenaltyParams(eta11=1e10 * E, eta12=1e10 * E, eta13=1e10 * CYLINDER_MATERIAL.k33,
                        eta21=1.0 * E, eta22=50.0 * E, eta23=0.0)
    geom = {"a": 20e-6, "b": 10e-6}
    load = {"F": 100e-6, "width": 200e-9}
    return BenchmarkSpec("block", CYLINDER_MATERIAL, geom, load, tuple(grid), float(c0), pen,
                         partition=partition, **kw)


def pyramid_spec(grid=(18, 17), c0=np.sqrt(20.0), **kw):
    mat = PYRAMID_MATERIAL
    E = mat.E_young
    pen = PenaltyParams(eta11=1e10 * E, eta12=1e10 * E, eta13=1e10 * mat.k33,
                        eta21=1.0 * E, eta22=0.0, eta23=mat.k33)
    geom = {"a1": 750e-6, "a2": 2250e-6, "b": 750e-6}
    load = {"F": 450e3}
    return BenchmarkSpec("pyramid", mat, geom, load, tuple(grid), float(c0), pen, **kw)


def default_spec(name, **kw):
    try:
        return {"cylinder": cylinder_spec, "block": block_spec, "pyramid": pyramid_spec}[name](**kw)
    except KeyError:
        raise BenchmarkError(f"unknown benchmark {name!r}") from None


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------

def _radial_value(u0):
    def value(edge):
        x, y = edge.midpoint
        return u0 * np.array([x, y]) / np.hypot(x, y)
    return value


def _build_cylinder(spec):
    g, ld = spec.geometry, spec.load
    nr, nt = spec.grid
    part = partition_polar(nr, nt, g["r_i"], g["r_o"])
    arc = lambda u0, p: EdgeBC(u_fixed=(True, True), u=_radial_value(u0), phi_fixed=True, phi=p)  # noqa: E731
    # mirror planes: no normal motion, no tangential traction, no normal
    # slope of the tangential displacement, no normal double traction
    cut = EdgeBC(u_fixed=(True, False), u_frame="nt", d_fixed=(False, True), d_frame="nt")
    bcs = BCData({"inner": arc(ld["u_i"], ld["phi_i"]), "outer": arc(ld["u_o"], ld["phi_o"]),
                  "start": cut, "end": cut})
    return part, bcs, ConstraintSet()


def strip_overlap(a, b, lo, hi):
    """Length of [min(a,b), max(a,b)] inside [lo, hi]."""
    x0, x1 = min(a, b), max(a, b)
    return max(0.0, min(x1, hi) - max(x0, lo))


def _build_block(spec):
    g, ld = spec.geometry, spec.load
    a, b = g["a"], g["b"]
    outline = rectangle(-a / 2, 0.0, a / 2, b)
    nx, ny = spec.grid
    if spec.partition == "quad":
        part = partition_quadrilateral(nx, ny, outline)
    elif spec.partition == "voronoi":
        rng = np.random.default_rng(spec.seed)
        pts = generate_grid_points(nx, ny, outline).coords
        h = min(a / nx, b / ny)
        pts = pts + rng.uniform(-0.2 * h, 0.2 * h, pts.shape)
        part = partition_voronoi(PointCloud(pts, outline))
    else:
        raise BenchmarkError(f"unknown partition {spec.partition!r}")
    half = 0.5 * ld["width"]
    q = ld["F"] / ld["width"]

    def strip(edge):
        (x0, _), (x1, _) = edge.endpoints
        return np.array([0.0, -q * strip_overlap(x0, x1, -half, half) / edge.length])

    bottom = EdgeBC(u_fixed=(False, True), phi_fixed=True, phi=0.0)
    bcs = BCData({"bottom": bottom, "top": EdgeBC(Q=strip), "left": EdgeBC(), "right": EdgeBC()})
    # horizontal pin: the bottom edge containing x = 0
    bot = sorted(part.edges_by_label("bottom"), key=lambda e: abs(e.midpoint[0]))
    pinned = replace(bottom, u_fixed=(True, True))
    bcs.by_edge[bot[0].edge_id] = pinned
    return part, bcs, ConstraintSet()


def _build_pyramid(spec):
    g, ld = spec.geometry, spec.load
    a1, a2, b = g["a1"], g["a2"], g["b"]
    outline = trapezoid(a2, a1, b)
    part = partition_mapped(spec.grid[0], spec.grid[1], outline)
    F = ld["F"]
    bottom = EdgeBC(Q=(0.0, F / a2))
    bcs = BCData({"top": EdgeBC(Q=(0.0, -F / a1), phi_fixed=True, phi=0.0),
                  "bottom": bottom, "left": EdgeBC(), "right": EdgeBC()})
    bot = sorted(part.edges_by_label("bottom"), key=lambda e: e.midpoint[0])
    bcs.by_edge[bot[0].edge_id] = replace(bottom, u_fixed=(True, True))
    bcs.by_edge[bot[-1].edge_id] = replace(bottom, u_fixed=(False, True))
    n = part.npoints
    cells = sorted({e.left_cell for e in bot})
    constraints = ConstraintSet([[2 * n + c for c in cells]])
    return part, bcs, constraints


_BUILDERS = {"cylinder": _build_cylinder, "block": _build_block, "pyramid": _build_pyramid}


def benchmark_partition(spec):
    """Partition alone (no weights), e.g. for exporting the domain."""
    try:
        return _BUILDERS[spec.name](spec)[0]
    except GeometryError as exc:
        raise BenchmarkError(f"invalid {spec.name} geometry: {exc}") from exc


def build_benchmark(spec):
    """Ready-to-solve :class:`~flexofpm.model.Problem` for a benchmark spec."""
    try:
        part, bcs, cons = _BUILDERS[spec.name](spec)
    except GeometryError as exc:
        raise BenchmarkError(f"invalid {spec.name} geometry: {exc}") from exc
    cset = constitutive_set(spec.material)
    return Problem(part, cset, bcs, spec.penalties, spec.c0, constraints=cons)


# --------------------------------------------------------------------------
# references and errors
# --------------------------------------------------------------------------

_ORACLE_CACHE = {}


def reference_for(spec, nelem=200, modes=5):
    """Reference field object with ``fields(xy) -> (u, phi)``; cylinder only."""
    if spec.name != "cylinder":
        raise BenchmarkError(f"no reference solution for benchmark {spec.name!r}")
    g, ld = spec.geometry, spec.load
    key = (spec.material, tuple(sorted(g.items())), tuple(sorted(ld.items())), nelem, modes)
    if key not in _ORACLE_CACHE:
        cset = constitutive_set(spec.material)
        _ORACLE_CACHE[key] = radial_flexo_oracle(cset, g["r_i"], g["r_o"], ld["u_i"], ld["u_o"],
                                                 ld["phi_i"], ld["phi_o"], nelem=nelem, modes=modes)
    return _ORACLE_CACHE[key]


def lame_reference(spec):
    g, ld = spec.geometry, spec.load
    return lame_cylinder_oracle(g["r_i"], g["r_o"], ld["u_i"], ld["u_o"])


def error_norms(uh, phih, u_ref, phi_ref, w):
    """Relative L2 errors (square root of the quadrature sums).

    ``uh``/``u_ref`` are (q, 2), ``phih``/``phi_ref`` (q,), ``w`` weights.
    A zero reference norm makes that error undefined (nan is returned only
    for phi, also when ``phi_ref`` is None; a zero displacement reference
    raises).
    """
    w = np.asarray(w, dtype=float)
    du = np.asarray(uh, dtype=float) - np.asarray(u_ref, dtype=float)
    nu = np.sum(w[:, None] * np.asarray(u_ref, dtype=float) ** 2)
    if nu <= 0:
        raise BenchmarkError("reference displacement has zero norm")
    e_u = float(np.sqrt(np.sum(w[:, None] * du**2) / nu))
    npf = 0.0 if phi_ref is None else np.sum(w * np.asarray(phi_ref, dtype=float) ** 2)
    if npf <= 0:
        e_phi = float("nan")
    else:
        e_phi = float(np.sqrt(np.sum(w * (np.asarray(phih) - np.asarray(phi_ref)) ** 2) / npf))
    return e_u, e_phi


@dataclass
class BenchmarkResult:
    spec: BenchmarkSpec
    problem: Problem
    e_u: float = float("nan")
    e_phi: float = float("nan")
    timings: dict = field(default_factory=dict)

    @property
    def npoints(self):
        return self.problem.npoints

    @property
    def nnz(self):
        return self.problem.system.nnz

    def row(self):
        return {"benchmark": self.spec.name, "npoints": self.npoints, "e_u": self.e_u,
                "e_phi": self.e_phi, "assemble_s": self.timings.get("assemble_s", 0.0),
                "solve_s": self.timings.get("solve_s", 0.0), "nnz": self.nnz}


def run_benchmark(spec, threads=None, reference=True):
    t0 = time.perf_counter()
    pb = build_benchmark(spec)
    pb.assemble(threads)
    pb.solve()
    res = BenchmarkResult(spec, pb, timings=dict(pb.timings))
    if reference and spec.name == "cylinder":
        elastic = spec.material.l == 0 and spec.material.mu11 == spec.material.mu12 == spec.material.mu44 == 0
        g = pb.gauss_fields()
        if elastic:
            u_ref = lame_reference(spec).displacement(g.xy)
            res.e_u, _ = error_norms(g.u, g.phi, u_ref, g.phi, g.w)
        else:
            u_ref, p_ref = reference_for(spec).fields(g.xy)
            res.e_u, res.e_phi = error_norms(g.u, g.phi, u_ref, p_ref, g.w)
    res.timings["total_s"] = time.perf_counter() - t0
    return res


def face_forces(problem, label):
    """Resultant force (x, y) that the boundary face ``label`` exerts on the body.

    Summed edge by edge from the boundary blocks alone: prescribed tractions
    plus the support reactions implied by the penalty/consistency terms.
    """
    from .assembly import essential_bc_stiffness, natural_bc_load

    x = problem.solution.x
    n = problem.npoints
    total = np.zeros(2)
    for e in problem.partition.edges_by_label(label):
        bc = problem.bcs.for_edge(e)
        tr = problem.trials[e.left_cell]
        Kb, fb = essential_bc_stiffness(e, tr, problem.cset, problem.penalties, bc)
        fb = fb + natural_bc_load(e, tr, bc)
        r = fb - Kb @ x[tr.local_dofs(n)]
        total += [r[0:2 * tr.n:2].sum(), r[1:2 * tr.n:2].sum()]
    return total


def pyramid_balance(problem):
    """(top_load_y, bottom_force_y) for the pyramid; they should cancel."""
    return face_forces(problem, "top")[1], face_forces(problem, "bottom")[1]


def symmetry_of(problem):
    return symmetry_defect(problem.system.K)
