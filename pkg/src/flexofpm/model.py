"""End-to-end problem object: partition -> weights -> K -> solution -> fields."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import BCData, PenaltyParams, assemble, build_trials, quadrature_points
from .geometry import Partition, build_supports
from .material import ConstitutiveSet, evaluate_fields
from .rbfdq import build_all_weights
from .shape import derivative_operators
from .solver import ConstraintSet, Solution, solve

__all__ = ["Problem", "FieldSample"]


def _inside_convex(poly, p, tol):
    a = poly
    b = np.roll(poly, -1, axis=0)
    e = b - a
    L = np.hypot(e[:, 0], e[:, 1])
    cross = (e[:, 0] * (p[1] - a[:, 1]) - e[:, 1] * (p[0] - a[:, 0])) / L
    return bool(np.all(cross >= -tol))


@dataclass
class FieldSample:
    xy: np.ndarray
    w: np.ndarray
    u: np.ndarray
    phi: np.ndarray
    eps: np.ndarray
    kappa: np.ndarray
    E: np.ndarray
    sigma: np.ndarray
    mu: np.ndarray
    P: np.ndarray


@dataclass
class Problem:
    partition: Partition
    cset: ConstitutiveSet
    bcs: BCData
    penalties: PenaltyParams
    c0: float
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    min_support: int = 10
    timings: dict = field(default_factory=dict)

    def __post_init__(self):
        t0 = time.perf_counter()
        self.supports = build_supports(self.partition, self.min_support)
        self.weights = build_all_weights(self.supports, self.partition.points, self.c0)
        self.trials = build_trials(self.partition, self.supports, self.weights)
        self.timings["weights_s"] = time.perf_counter() - t0
        self.system = None
        self.solution = None

    @property
    def npoints(self):
        return self.partition.npoints

    def assemble(self, threads=None):
        t0 = time.perf_counter()
        self.system = assemble(self.partition, self.trials, self.cset, self.bcs,
                               self.penalties, threads=threads)
        self.timings["assemble_s"] = time.perf_counter() - t0
        return self.system

    def solve(self, tol=1e-10, method="direct", threads=None) -> Solution:
        if self.system is None:
            self.assemble(threads)
        t0 = time.perf_counter()
        self.solution = solve(self.system, self.constraints, tol=tol, method=method)
        self.timings["solve_s"] = time.perf_counter() - t0
        return self.solution

    def _require_solution(self):
        if self.solution is None:
            raise RuntimeError("problem not solved yet")
        return self.solution

    def sample_cell(self, cell_id, xy):
        """Fields of the cell's own trial function at points ``xy``."""
        sol = self._require_solution()
        trial = self.trials[cell_id]
        ops = derivative_operators(trial, xy)
        xl = sol.x[trial.local_dofs(self.npoints)]
        ev = lambda a: a @ xl  # noqa: E731
        eps, kap, E = ev(ops.eps), ev(ops.kappa), ev(ops.E)
        sig, mu, P = evaluate_fields(self.cset, eps, kap, E)
        return ev(ops.N), ev(ops.phi)[:, 0], eps, kap, E, sig, mu, P

    def gauss_fields(self):
        """All fields at every cell quadrature point (cells in id order)."""
        parts = []
        for cell in self.partition.cells:
            qp = quadrature_points(cell)
            parts.append((qp[:, :2], qp[:, 2]) + self.sample_cell(cell.point_id, qp[:, :2]))
        cat = [np.concatenate([p[k] for p in parts]) for k in range(10)]
        return FieldSample(*cat)

    def locate(self, xy):
        """Cell id containing each query point (cells are convex)."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        pts = self.partition.points
        tol = 1e-10 * self.partition.outline.scale
        out = np.full(len(xy), -1)
        d2 = ((xy[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        order = np.argsort(d2, axis=1)[:, :16]
        for i, p in enumerate(xy):
            for c in order[i]:
                if _inside_convex(self.partition.cells[c].polygon, p, tol):
                    out[i] = c
                    break
            if out[i] < 0:
                out[i] = order[i, 0]
        return out

    def evaluate(self, xy):
        """(u, phi) at arbitrary points, using the containing cell's trial."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        cells = self.locate(xy)
        u = np.zeros((len(xy), 2))
        phi = np.zeros(len(xy))
        for c in np.unique(cells):
            sel = cells == c
            uu, pp, *_ = self.sample_cell(int(c), xy[sel])
            u[sel] = uu
            phi[sel] = pp
        return u, phi
