"""Global symmetric system from the interior-penalty weak form.

Every integral is reduced to row-operators acting on a cell's local DOF
vector (see :mod:`flexofpm.shape`). On a trace with normal ``n`` the fluxes
conjugate to the displacement, the displacement gradient and the potential
are

    t = n1 sigma - n21 mu_,1 - n22 mu_,2          (traction)
    m = n3 mu                                      (double traction, 4 rows)
    d = n . D                                      (normal electric displacement)

and on external edges the tangential part of ``m`` is integrated by parts
along the (straight) edge, giving the boundary traction ``Q`` and the
normal double traction ``R``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from .geometry import Partition
from .shape import CellTrial, derivative_operators

__all__ = [
    "AssemblyError",
    "PenaltyParams",
    "EdgeGeometryMatrices",
    "edge_matrices",
    "EdgeBC",
    "BCData",
    "GlobalSystem",
    "quadrature_points",
    "edge_quadrature",
    "build_trials",
    "cell_stiffness",
    "internal_edge_stiffness",
    "essential_bc_stiffness",
    "natural_bc_load",
    "assemble",
    "symmetry_defect",
    "write_matrix_market",
]


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class PenaltyParams:
    """Penalty weights. ``eta1*`` act on essential boundaries, ``eta2*`` on
    internal edges; index 1 displacement, 2 normal derivative, 3 potential.

    ``phi_sign`` multiplies both potential penalties (+1 adds them to K as
    for the mechanical ones).
    """

    eta11: float = 0.0
    eta12: float = 0.0
    eta13: float = 0.0
    eta21: float = 0.0
    eta22: float = 0.0
    eta23: float = 0.0
    phi_sign: float = 1.0

    def __post_init__(self):
        for name in ("eta11", "eta12", "eta13", "eta21", "eta22", "eta23"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise AssemblyError(f"penalty {name} must be finite and >= 0")
        if self.phi_sign not in (1.0, -1.0):
            raise AssemblyError("phi_sign must be +1 or -1")


# --------------------------------------------------------------------------
# edge geometry
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeGeometryMatrices:
    n1bar: np.ndarray
    n21bar: np.ndarray
    n22bar: np.ndarray
    n3bar: np.ndarray
    n4bar: np.ndarray
    s4bar: np.ndarray
    c1bar: np.ndarray
    c2bar: np.ndarray
    c3bar: np.ndarray
    c4bar: np.ndarray


_C1 = np.array([[1.0, 0, 0, 0], [0, 0, 0, 1]])
_C2 = np.array([[0.0, 0, 1, 0], [0, 1, 0, 0]])
_C3 = np.array([[1.0, 0, 0, 0, 0, 0], [0, 0, 0, 0.5, 0, 0], [0, 0, 0.5, 0, 0, 1]])
_C4 = np.array([[0.0, 0, 0.5, 0, 0, 0], [0, 1, 0, 0, 0, 0], [0, 0, 0, 0.5, 1, 0]])


def _n4(a, b):
    return np.array([[a, 0.0, b, 0.0], [0.0, b, 0.0, a]])


def edge_matrices(normal):
    n1, n2 = (float(v) for v in normal)
    return EdgeGeometryMatrices(
        n1bar=np.array([[n1, 0.0, n2], [0.0, n2, n1]]),
        n21bar=np.array([[n1, 0, n2, 0, 0, 0], [0, 0, 0, n2, 0, n1]], dtype=float),
        n22bar=np.array([[0, 0, n1, 0, n2, 0], [0, n2, 0, n1, 0, 0]], dtype=float),
        n3bar=np.array([[n1, 0, n2, 0, 0, 0],
                        [0, n2, 0, n1, 0, 0],
                        [0, 0, n1, 0, n2, 0],
                        [0, 0, 0, n2, 0, n1]], dtype=float),
        n4bar=_n4(n1, n2),
        s4bar=_n4(-n2, n1),
        c1bar=_C1.copy(),
        c2bar=_C2.copy(),
        c3bar=_C3.copy(),
        c4bar=_C4.copy(),
    )


# --------------------------------------------------------------------------
# boundary data
# --------------------------------------------------------------------------

def _frame(kind, normal):
    """Columns are the component directions: x/y or normal/tangent."""
    if kind == "xy":
        return np.eye(2)
    if kind == "nt":
        n = np.asarray(normal, dtype=float)
        return np.column_stack([n, [-n[1], n[0]]])
    raise AssemblyError(f"unknown component frame {kind!r}")


def _eval(value, edge, size):
    v = value(edge) if callable(value) else value
    v = np.asarray(v, dtype=float)
    if v.size != size:
        raise AssemblyError(f"boundary value on edge {edge.edge_id} has size {v.size}, expected {size}")
    return v.reshape(size)


@dataclass(frozen=True)
class EdgeBC:
    """Boundary conditions of one external edge.

    ``u_fixed`` selects which displacement components (in ``u_frame``: "xy"
    or "nt" for normal/tangent) are prescribed; the remaining ones carry the
    traction ``Q``. ``d_fixed``/``d_frame`` do the same for the normal
    derivative of u versus the double traction ``R``. ``phi_fixed`` chooses
    potential versus surface charge ``omega``.

    Vector values are Cartesian; a value may be a constant or a callable
    taking the :class:`~flexofpm.geometry.Edge` (evaluate at its midpoint).
    """

    u_fixed: tuple = (False, False)
    u_frame: str = "xy"
    u: object = (0.0, 0.0)
    Q: object = (0.0, 0.0)
    d_fixed: tuple = (False, False)
    d_frame: str = "xy"
    d: object = (0.0, 0.0)
    R: object = (0.0, 0.0)
    phi_fixed: bool = False
    phi: object = 0.0
    omega: object = 0.0

    def projector_u(self, normal):
        F = _frame(self.u_frame, normal)
        return F @ np.diag(np.asarray(self.u_fixed, dtype=float)) @ F.T

    def projector_d(self, normal):
        F = _frame(self.d_frame, normal)
        return F @ np.diag(np.asarray(self.d_fixed, dtype=float)) @ F.T

    @property
    def has_essential(self):
        return any(self.u_fixed) or any(self.d_fixed) or self.phi_fixed


FREE = EdgeBC()


@dataclass
class BCData:
    """Edge conditions by outline label, with optional per-edge overrides."""

    by_label: dict = field(default_factory=dict)
    by_edge: dict = field(default_factory=dict)

    def for_edge(self, edge):
        if edge.edge_id in self.by_edge:
            return self.by_edge[edge.edge_id]
        try:
            return self.by_label[edge.label]
        except KeyError:
            raise AssemblyError(
                f"no boundary condition for external edge {edge.edge_id} (label {edge.label!r})"
            ) from None

    def check(self, partition):
        for e in partition.edges:
            if e.kind == "external":
                self.for_edge(e)


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------

_G = 1.0 / np.sqrt(3.0)
_TRI = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])


def quadrature_points(cell):
    """(x, y, w) rows: 2x2 Gauss on quads, degree-2 fan rule on polygons."""
    poly = np.asarray(cell.polygon, dtype=float)
    if len(poly) < 3:
        raise AssemblyError(f"cell {cell.cell_id}: degenerate polygon")
    if cell.kind == "quad" and len(poly) == 4:
        out = []
        for eta in (-_G, _G):
            for xi in (-_G, _G):
                Nv = 0.25 * np.array([(1 - xi) * (1 - eta), (1 + xi) * (1 - eta),
                                      (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)])
                dxi = 0.25 * np.array([-(1 - eta), 1 - eta, 1 + eta, -(1 + eta)])
                deta = 0.25 * np.array([-(1 - xi), -(1 + xi), 1 + xi, 1 - xi])
                J = np.array([dxi @ poly, deta @ poly])
                det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
                if det <= 0:
                    raise AssemblyError(f"cell {cell.cell_id}: inverted quadrilateral")
                x, y = Nv @ poly
                out.append((x, y, det))
        return np.array(out)
    c = poly.mean(axis=0)
    out = []
    n = len(poly)
    for i in range(n):
        tri = np.array([c, poly[i], poly[(i + 1) % n]])
        a = 0.5 * ((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
                   - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1]))
        if a < 0:
            raise AssemblyError(f"cell {cell.cell_id}: polygon not convex/CCW")
        if a == 0:
            continue
        for b in _TRI:
            x, y = b @ tri
            out.append((x, y, a / 3.0))
    if not out:
        raise AssemblyError(f"cell {cell.cell_id}: degenerate polygon")
    return np.array(out)


def edge_quadrature(edge):
    """One-point rule: (midpoint, weight = length)."""
    return edge.midpoint, edge.length


# --------------------------------------------------------------------------
# local blocks
# --------------------------------------------------------------------------

def build_trials(partition, supports, weights):
    trials = []
    for s, w in zip(supports, weights):
        if w.point_id != s.center:
            raise AssemblyError("supports and weights are out of order")
        trials.append(CellTrial(partition.points[s.center], (s.center,) + tuple(s.members), w.weights))
    return trials


def _q_ops(ops):
    """Stacked q = [eps, kappa, E] rows: (npts, 11, ndof)."""
    return np.concatenate([ops.eps, ops.kappa, ops.E], axis=1)


def cell_stiffness(cell, trial, cset):
    qp = quadrature_points(cell)
    ops = derivative_operators(trial, qp[:, :2])
    B = _q_ops(ops)
    H = cset.enthalpy_matrix()
    K = np.einsum("g,gai,ab,gbj->ij", qp[:, 2], B, H, B, optimize=True)
    return 0.5 * (K + K.T)


@dataclass
class _TraceFluxes:
    V: np.ndarray     # u value (2, nd)
    epshat: np.ndarray  # (4, nd)
    tau: np.ndarray   # phi value (1, nd)
    t: np.ndarray     # (2, nd)
    m: np.ndarray     # (4, nd)
    d: np.ndarray     # (1, nd)
    Q: np.ndarray     # (2, nd)
    R: np.ndarray     # (2, nd)
    dn: np.ndarray    # (2, nd)


def _trace(trial, xy, cset, G):
    ops = derivative_operators(trial, [xy])
    g = lambda a: a[0]  # noqa: E731
    eps, kap, E = g(ops.eps), g(ops.kappa), g(ops.E)
    sigma = cset.Dse @ eps - cset.G0 @ kap - cset.e_mat.T @ E
    mu = cset.Dmk @ kap - cset.G0.T @ eps - cset.A0 @ E
    mu1 = cset.Dmk @ g(ops.kappa1) - cset.G0.T @ g(ops.eps1) - cset.A0 @ g(ops.E1)
    mu2 = cset.Dmk @ g(ops.kappa2) - cset.G0.T @ g(ops.eps2) - cset.A0 @ g(ops.E2)
    D = cset.kbar @ E + cset.e_mat @ eps + cset.A0.T @ kap
    n = G.n4bar[0, [0, 2]]  # (n1, n2)
    t = G.n1bar @ sigma - G.n21bar @ mu1 - G.n22bar @ mu2
    m = G.n3bar @ mu
    P = G.s4bar.T @ G.s4bar
    Q = t - (G.c1bar @ P @ G.n3bar @ mu1 + G.c2bar @ P @ G.n3bar @ mu2)
    epshat = g(ops.epshat)
    return _TraceFluxes(V=g(ops.N), epshat=epshat, tau=g(ops.phi), t=t, m=m,
                        d=(n @ D)[None, :], Q=Q, R=G.n4bar @ m, dn=G.n4bar @ epshat)


def _sym(a, b):
    """a^T b + b^T a."""
    x = a.T @ b
    return x + x.T


def internal_edge_stiffness(edge, trial_left, trial_right, cset, pen):
    """Block over [left local DOFs, right local DOFs]."""
    xy, w = edge_quadrature(edge)
    G = edge_matrices(edge.normal)
    L = _trace(trial_left, xy, cset, G)
    R = _trace(trial_right, xy, cset, G)
    h = edge.h_e

    def jump(a, b):
        return np.hstack([a, -b])

    def avg(a, b):
        return 0.5 * np.hstack([a, b])

    Jv, Jeh, Jt = jump(L.V, R.V), jump(L.epshat, R.epshat), jump(L.tau, R.tau)
    K = -_sym(Jv, avg(L.t, R.t)) - _sym(Jeh, avg(L.m, R.m)) - _sym(Jt, avg(L.d, R.d))
    K += pen.eta21 / h * Jv.T @ Jv
    nJ = G.n4bar @ Jeh
    K += pen.eta22 * h * nJ.T @ nJ
    K += pen.phi_sign * pen.eta23 / h * Jt.T @ Jt
    K *= w
    return 0.5 * (K + K.T)


def essential_bc_stiffness(edge, trial, cset, pen, bc):
    """One-sided consistency + penalty terms and their data loads.

    Returns ``(K_block, f_block)`` over the cell's local DOFs.
    """
    if bc is None:
        raise AssemblyError(f"edge {edge.edge_id}: missing boundary data")
    xy, w = edge_quadrature(edge)
    G = edge_matrices(edge.normal)
    T = _trace(trial, xy, cset, G)
    h = edge.h_e
    nd = T.V.shape[1]
    K = np.zeros((nd, nd))
    f = np.zeros(nd)
    Su = bc.projector_u(edge.normal)
    if Su.any():
        ut = Su @ _eval(bc.u, edge, 2)
        K += -_sym(T.V, Su @ T.Q) + pen.eta11 / h * T.V.T @ Su @ T.V
        f += -T.Q.T @ ut + pen.eta11 / h * T.V.T @ ut
    Sd = bc.projector_d(edge.normal)
    if Sd.any():
        dt = Sd @ _eval(bc.d, edge, 2)
        K += -_sym(T.dn, Sd @ T.R) + pen.eta12 * h * T.dn.T @ Sd @ T.dn
        f += -T.R.T @ dt + pen.eta12 * h * T.dn.T @ dt
    if bc.phi_fixed:
        pt = float(_eval(bc.phi, edge, 1)[0])
        s = pen.phi_sign * pen.eta13 / h
        K += -_sym(T.tau, T.d) + s * T.tau.T @ T.tau
        f += (-T.d[0] + s * T.tau[0]) * pt
    K *= w
    f *= w
    return 0.5 * (K + K.T), f


def natural_bc_load(edge, trial, bc):
    """Traction, double-traction and surface-charge loads on the free parts."""
    xy, w = edge_quadrature(edge)
    ops = derivative_operators(trial, [xy])
    V, epshat, tau = ops.N[0], ops.epshat[0], ops.phi[0]
    n4 = edge_matrices(edge.normal).n4bar
    f = np.zeros(V.shape[1])
    free_u = np.eye(2) - bc.projector_u(edge.normal)
    if free_u.any():
        f += V.T @ (free_u @ _eval(bc.Q, edge, 2))
    free_d = np.eye(2) - bc.projector_d(edge.normal)
    if free_d.any():
        f += (n4 @ epshat).T @ (free_d @ _eval(bc.R, edge, 2))
    if not bc.phi_fixed:
        f += -tau[0] * float(_eval(bc.omega, edge, 1)[0])
    return w * f


# --------------------------------------------------------------------------
# global system
# --------------------------------------------------------------------------

@dataclass
class GlobalSystem:
    """K x = f. ``K_ext``/``f_ext`` hold the same sums in extended precision:
    essential-boundary penalties exceed the bulk stiffness by ~1e10, so the
    float64 sum alone loses the digits the refinement step needs."""

    K: sp.csr_matrix
    f: np.ndarray
    npoints: int
    K_ext: sp.csr_matrix = None
    f_ext: np.ndarray = None

    @property
    def ndof(self):
        return 3 * self.npoints

    @property
    def nnz(self):
        return self.K.nnz

    def dof_index(self, point_id):
        """((u1, u2) indices, phi index) of a point."""
        return (2 * point_id, 2 * point_id + 1), 2 * self.npoints + point_id

    @property
    def u_dofs(self):
        return np.arange(2 * self.npoints)

    @property
    def phi_dofs(self):
        return np.arange(2 * self.npoints, 3 * self.npoints)


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("FPM_THREADS", "1") or 1)
    return max(1, int(threads))


_CHUNK = 500


def assemble(partition: Partition, trials, cset, bcs: BCData, pen: PenaltyParams, threads=None):
    """Scatter cell, internal-edge and boundary blocks into sparse K and f.

    Blocks may be computed concurrently; they are always added in the order
    cells by id, then edges by id, so K is reproducible bit for bit.
    """
    npts = partition.npoints
    if len(trials) != npts:
        raise AssemblyError("one trial function per point is required")
    bcs.check(partition)
    dofs = [t.local_dofs(npts) for t in trials]

    def cell_job(c):
        return dofs[c.point_id], cell_stiffness(c, trials[c.point_id], cset), None

    def edge_job(e):
        if e.kind == "internal":
            idx = np.concatenate([dofs[e.left_cell], dofs[e.right_cell]])
            return idx, internal_edge_stiffness(e, trials[e.left_cell], trials[e.right_cell], cset, pen), None
        bc = bcs.for_edge(e)
        tr = trials[e.left_cell]
        Kb, fb = essential_bc_stiffness(e, tr, cset, pen, bc)
        fb = fb + natural_bc_load(e, tr, bc)
        return dofs[e.left_cell], Kb, fb

    jobs = [(cell_job, c) for c in partition.cells] + [(edge_job, e) for e in partition.edges]
    nthreads = _threads(threads)
    n = 3 * npts
    f = np.zeros(n, dtype=np.longdouble)
    K_ext = sp.csr_matrix((n, n), dtype=np.longdouble)
    ex = ThreadPoolExecutor(nthreads) if nthreads > 1 else None
    try:
        # fixed-size chunks keep memory bounded; the chunking never depends on
        # the worker count, so the summation order is always the same
        for start in range(0, len(jobs), _CHUNK):
            chunk = jobs[start:start + _CHUNK]
            if ex is None:
                results = [fn(x) for fn, x in chunk]
            else:
                results = list(ex.map(lambda j: j[0](j[1]), chunk))
            rows, cols, vals = [], [], []
            for idx, Kb, fb in results:
                idx = idx.astype(np.int32)
                rows.append(np.repeat(idx, len(idx)))
                cols.append(np.tile(idx, len(idx)))
                vals.append(Kb.ravel().astype(np.longdouble))
                if fb is not None:
                    np.add.at(f, idx, fb.astype(np.longdouble))
            del results
            part = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(n, n)).tocsr()
            K_ext = K_ext + part
    finally:
        if ex is not None:
            ex.shutdown()
    K_ext.sum_duplicates()
    K_ext.sort_indices()
    K = K_ext.astype(np.float64)
    return GlobalSystem(K, f.astype(np.float64), npts, K_ext, f)


def symmetry_defect(K):
    """max|K - K^T| / max|K|."""
    K = sp.csr_matrix(K)
    d = abs(K - K.T)
    top = abs(K).max()
    return float(d.max() / top) if top > 0 else 0.0


def write_matrix_market(path, K):
    """Debug dump of the (symmetric) stiffness matrix."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(K), symmetry="symmetric")
