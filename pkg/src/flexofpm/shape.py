"""Cubic Taylor trial functions and their derivative operators.

Inside cell E0 the trial function is the third-order Taylor polynomial about
P0 whose derivatives come from the DQ weights, so every operator below is a
row-matrix acting on the cell's local DOF vector

    [u1^0, u2^0, u1^1, u2^1, ..., u1^m, u2^m, phi^0, ..., phi^m]

(``3 (m + 1)`` entries: the interleaved displacement block, then potential).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "JET_ORDERS",
    "monomial_row",
    "taylor_jet_matrix",
    "CellTrial",
    "CellOperators",
    "shape_matrix",
    "derivative_operators",
]

# value, then partials; indices into a jet row
JET_ORDERS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3))
V, X1, X2, X11, X12, X22, X111, X112, X122, X222 = range(10)


def monomial_row(dx, dy):
    """N-bar: the nine Taylor monomials at offset (dx, dy) from P0."""
    return np.array([dx, dy, 0.5 * dx * dx, dx * dy, 0.5 * dy * dy,
                     dx**3 / 6.0, 0.5 * dx * dx * dy, 0.5 * dx * dy * dy, dy**3 / 6.0])


def taylor_jet_matrix(dx, dy):
    """(n, 10, 10) map from [u0, D1..D9] at P0 to the jet at offsets (dx, dy)."""
    dx = np.atleast_1d(np.asarray(dx, dtype=float))
    dy = np.atleast_1d(np.asarray(dy, dtype=float))
    n = dx.shape[0]
    J = np.zeros((n, 10, 10))
    one = np.ones(n)
    J[:, V, :] = np.column_stack([one, dx, dy, 0.5 * dx**2, dx * dy, 0.5 * dy**2,
                                  dx**3 / 6.0, 0.5 * dx**2 * dy, 0.5 * dx * dy**2, dy**3 / 6.0])
    J[:, X1, 1] = 1.0
    J[:, X1, 3] = dx
    J[:, X1, 4] = dy
    J[:, X1, 6] = 0.5 * dx**2
    J[:, X1, 7] = dx * dy
    J[:, X1, 8] = 0.5 * dy**2
    J[:, X2, 2] = 1.0
    J[:, X2, 4] = dx
    J[:, X2, 5] = dy
    J[:, X2, 7] = 0.5 * dx**2
    J[:, X2, 8] = dx * dy
    J[:, X2, 9] = 0.5 * dy**2
    J[:, X11, 3] = 1.0
    J[:, X11, 6] = dx
    J[:, X11, 7] = dy
    J[:, X12, 4] = 1.0
    J[:, X12, 7] = dx
    J[:, X12, 8] = dy
    J[:, X22, 5] = 1.0
    J[:, X22, 8] = dx
    J[:, X22, 9] = dy
    J[:, X111, 6] = 1.0
    J[:, X112, 7] = 1.0
    J[:, X122, 8] = 1.0
    J[:, X222, 9] = 1.0
    return J


class CellTrial:
    """Scalar trial-function jets for one cell.

    ``ids`` lists the point ids [P0, P1..Pm]; ``weights`` is the 9 x (m+1)
    DQ matrix in the same column order.
    """

    def __init__(self, center_xy, ids, weights):
        self.center = np.asarray(center_xy, dtype=float)
        self.ids = np.asarray(ids, dtype=int)
        W = np.asarray(weights, dtype=float)
        n = W.shape[1]
        self._coef = np.vstack([np.eye(1, n), W])  # (10, m+1): [e0; B-bar]

    @property
    def n(self):
        return self._coef.shape[1]

    def jets(self, xy):
        """(q, 10, m+1) scalar operator rows at query points ``xy``."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        d = xy - self.center
        return taylor_jet_matrix(d[:, 0], d[:, 1]) @ self._coef

    def local_dofs(self, npoints):
        """Global DOF indices for the local vector (u-block interleaved, then phi)."""
        u = np.empty(2 * self.n, dtype=int)
        u[0::2] = 2 * self.ids
        u[1::2] = 2 * self.ids + 1
        return np.concatenate([u, 2 * npoints + self.ids])


@dataclass
class CellOperators:
    """Operators at a set of query points, each shaped (q, rows, 3(m+1))."""

    N: np.ndarray         # u value, 2 rows
    eps: np.ndarray       # [e11, e22, 2 e12]
    epshat: np.ndarray    # [u1,1 u2,2 u1,2 u2,1]
    kappa: np.ndarray     # [k111 k222 2k121 2k122 k221 k112]
    kappa1: np.ndarray
    kappa2: np.ndarray
    eps1: np.ndarray      # x-derivative of eps
    eps2: np.ndarray
    phi: np.ndarray       # 1 row
    E: np.ndarray         # -grad phi
    E1: np.ndarray
    E2: np.ndarray

    @property
    def n(self):
        return self.phi.shape[-1] // 3

    def u_block(self, name):
        return getattr(self, name)[..., : 2 * self.n]

    def phi_block(self, name):
        return getattr(self, name)[..., 2 * self.n:]


def derivative_operators(trial, xy):
    S = trial.jets(xy)
    q, _, n = S.shape
    nd = 3 * n

    def vec(comp, k, scale=1.0):
        out = np.zeros((q, nd))
        out[:, comp:2 * n:2] = scale * S[:, k, :]
        return out

    def sca(k, scale=1.0):
        out = np.zeros((q, nd))
        out[:, 2 * n:] = scale * S[:, k, :]
        return out

    def rows(*rs):
        return np.stack(rs, axis=1)

    return CellOperators(
        N=rows(vec(0, V), vec(1, V)),
        eps=rows(vec(0, X1), vec(1, X2), vec(0, X2) + vec(1, X1)),
        epshat=rows(vec(0, X1), vec(1, X2), vec(0, X2), vec(1, X1)),
        kappa=rows(vec(0, X11), vec(1, X22), vec(0, X12, 2.0), vec(1, X12, 2.0),
                   vec(0, X22), vec(1, X11)),
        kappa1=rows(vec(0, X111), vec(1, X122), vec(0, X112, 2.0), vec(1, X112, 2.0),
                    vec(0, X122), vec(1, X111)),
        kappa2=rows(vec(0, X112), vec(1, X222), vec(0, X122, 2.0), vec(1, X122, 2.0),
                    vec(0, X222), vec(1, X112)),
        eps1=rows(vec(0, X11), vec(1, X12), vec(0, X12) + vec(1, X11)),
        eps2=rows(vec(0, X12), vec(1, X22), vec(0, X22) + vec(1, X12)),
        phi=rows(sca(V)),
        E=rows(sca(X1, -1.0), sca(X2, -1.0)),
        E1=rows(sca(X11, -1.0), sca(X12, -1.0)),
        E2=rows(sca(X12, -1.0), sca(X22, -1.0)),
    )


def shape_matrix(trial, x, y):
    """N(x, y): the 2 x 2(m+1) displacement shape matrix (interleaved columns)."""
    S = trial.jets([[x, y]])[0, V]
    N = np.zeros((2, 2 * trial.n))
    N[0, 0::2] = S
    N[1, 1::2] = S
    return N
