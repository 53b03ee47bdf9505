"""Local RBF differential quadrature weights.

For a centre point P0 with support P1..Pm, ``build_weights`` returns the
9 x (m+1) matrix mapping nodal values at [P0, P1..Pm] to the derivative
estimates at P0, rows ordered as ``DERIVATIVE_ORDERS``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = [
    "DERIVATIVE_ORDERS",
    "IllConditionedSupport",
    "MultiQuadric",
    "RBFParams",
    "DQWeights",
    "minimal_enclosing_circle",
    "mq_shifted_basis",
    "mq_derivatives",
    "build_weights",
    "build_all_weights",
]

# (s, t) = number of x and y derivatives
DERIVATIVE_ORDERS = ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3))

COND_LIMIT = 1e14


class IllConditionedSupport(RuntimeError):
    pass


class MultiQuadric:
    """f(r) = sqrt(r^2 + c^2) and its Cartesian partials up to third order."""

    name = "mq"

    @staticmethod
    def value(dx, dy, c):
        return np.sqrt(dx * dx + dy * dy + c * c)

    @staticmethod
    def partials(dx, dy, c):
        """Array (..., 9) of partials in DERIVATIVE_ORDERS order at offset (dx, dy)."""
        dx = np.asarray(dx, dtype=float)
        dy = np.asarray(dy, dtype=float)
        c2 = c * c
        f2 = dx * dx + dy * dy + c2
        f = np.sqrt(f2)
        f3 = f2 * f
        f5 = f3 * f2
        return np.stack([
            dx / f,
            dy / f,
            (dy * dy + c2) / f3,
            -dx * dy / f3,
            (dx * dx + c2) / f3,
            -3.0 * (dy * dy + c2) * dx / f5,
            dy * (2.0 * dx * dx - dy * dy - c2) / f5,
            dx * (2.0 * dy * dy - dx * dx - c2) / f5,
            -3.0 * (dx * dx + c2) * dy / f5,
        ], axis=-1)


@dataclass(frozen=True)
class RBFParams:
    c0: float
    D0: float

    def __post_init__(self):
        if not (self.c0 > 0 and self.D0 > 0):
            raise ValueError("c0 and D0 must be positive")

    @property
    def c(self):
        return self.c0 * self.D0


@dataclass
class DQWeights:
    point_id: int
    weights: np.ndarray  # (9, m + 1)
    cond_G: float
    params: RBFParams

    @property
    def m(self):
        return self.weights.shape[1] - 1

    def row_sums(self):
        return self.weights.sum(axis=1)


def minimal_enclosing_circle(points):
    """Smallest circle containing all points (Welzl, iterative, shuffled)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        raise ValueError("no points")
    rng = np.random.default_rng(0)
    p = pts[rng.permutation(len(pts))]
    eps = 1e-12

    def circle2(a, b):
        c = 0.5 * (a + b)
        return c, float(np.linalg.norm(a - c))

    def circle3(a, b, c):
        ax, ay = a
        bx, by = b
        cx, cy = c
        d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
        if abs(d) < 1e-300:
            # collinear: widest pair
            cands = [circle2(a, b), circle2(a, c), circle2(b, c)]
            return max(cands, key=lambda t: t[1])
        ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
              + (cx * cx + cy * cy) * (ay - by)) / d
        uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
              + (cx * cx + cy * cy) * (bx - ax)) / d
        ctr = np.array([ux, uy])
        return ctr, float(np.linalg.norm(a - ctr))

    def inside(circ, q):
        return np.linalg.norm(q - circ[0]) <= circ[1] * (1 + eps) + eps * np.abs(q).max()

    circ = (p[0], 0.0)
    for i in range(1, len(p)):
        if inside(circ, p[i]):
            continue
        circ = (p[i], 0.0)
        for j in range(i):
            if inside(circ, p[j]):
                continue
            circ = circle2(p[i], p[j])
            for k in range(j):
                if not inside(circ, p[k]):
                    circ = circle3(p[i], p[j], p[k])
    return circ


def mq_shifted_basis(xi, x0, c, x, y):
    """g_i(x, y) = f(|(x, y) - x_i|) - f(|(x, y) - x_0|) for the MQ kernel."""
    return (MultiQuadric.value(x - xi[0], y - xi[1], c)
            - MultiQuadric.value(x - x0[0], y - x0[1], c))


def mq_derivatives(xi, x0, c, x, y, order=None):
    """Partials of the shifted MQ basis at (x, y).

    Returns all nine in DERIVATIVE_ORDERS order, or the single one selected by
    ``order = (s, t)``.
    """
    d = (MultiQuadric.partials(x - xi[0], y - xi[1], c)
         - MultiQuadric.partials(x - x0[0], y - x0[1], c))
    if order is None:
        return d
    return d[..., DERIVATIVE_ORDERS.index(tuple(order))]


def build_weights(center, members, coords, c0, basis=MultiQuadric, point_id=None):
    """DQ weights for point ``center`` supported by ``members`` (ids into coords).

    Assembles G (row of ones, then g_i sampled at P0..Pm) and the basis
    derivatives at P0, and solves G W^T = [DG] with pivoted LU after
    row/column equilibration; ``cond_G`` is the 2-norm condition number of the
    equilibrated matrix.
    """
    members = list(members)
    if len(members) < 10:
        raise ValueError(f"support too small: m = {len(members)} < 10")
    ids = [center] + members
    X = np.asarray(coords, dtype=float)[ids]
    # translate to the centre: weights are translation invariant
    X = X - X[0]
    if len(np.unique(np.round(X / (np.abs(X).max() + 1e-300), 14), axis=0)) != len(X):
        raise ValueError("support points must be distinct")
    _, radius = minimal_enclosing_circle(X[1:])
    params = RBFParams(c0, 2.0 * radius)
    # work in units of D0 so G is scale-free; rescale derivatives afterwards
    X = X / params.D0
    c = c0
    n = len(X)

    dx = X[:, 0][None, :] - X[:, 0][:, None]  # dx[i, j] = x_j - x_i
    dy = X[:, 1][None, :] - X[:, 1][:, None]
    F = basis.value(dx, dy, c)  # F[i, j] = f(|P_j - P_i|)
    G = np.empty((n, n))
    G[0, :] = 1.0
    G[1:, :] = F[1:, :] - F[0, :][None, :]

    dF = basis.partials(-X[:, 0], -X[:, 1], c)  # (n, 9): partials of f_i at P0
    DG = np.zeros((n, 9))
    DG[1:, :] = dF[1:, :] - dF[0, :][None, :]

    # equilibrate rows and columns (the weights do not depend on it)
    rs = 1.0 / np.abs(G).max(axis=1)
    Ge = G * rs[:, None]
    cs = 1.0 / np.abs(Ge).max(axis=0)
    Ge *= cs[None, :]
    cond = float(np.linalg.cond(Ge))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedSupport(
            f"ill-conditioned support at point {center} (cond = {cond:.3g}); try another c0")
    lu, piv = sla.lu_factor(Ge)
    order = np.array([s + t for s, t in DERIVATIVE_ORDERS], dtype=float)
    W = (cs[:, None] * sla.lu_solve((lu, piv), rs[:, None] * DG)).T / params.D0 ** order[:, None]
    return DQWeights(center if point_id is None else point_id, W, cond, params)


def build_all_weights(supports, coords, c0, basis=MultiQuadric):
    return [build_weights(s.center, s.members, coords, c0, basis) for s in supports]
