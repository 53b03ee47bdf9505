"""Reference solutions for the hollow-cylinder benchmark.

``lame_cylinder_oracle`` is the classical thick-cylinder field. The coupled
flexoelectric reference is a Ritz solution on the exact annulus: C1 Hermite
cubics in r times the angular modes compatible with a cubic material under
radial loading,

    u_r = sum_k a_k(r) cos(4k t),  u_t = sum_k b_k(r) sin(4k t),
    phi = sum_k c_k(r) cos(4k t),

made stationary for the same energy density the FPM discretizes. With a
single mode (k = 0) this is the axisymmetric reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


__all__ = [
    "OracleError",
    "LameSolution",
    "lame_cylinder_oracle",
    "RadialOracle",
    "radial_flexo_oracle",
]


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class LameSolution:
    A: float
    B: float

    def u_r(self, r):
        r = np.asarray(r, dtype=float)
        return self.A * r + self.B / r

    def displacement(self, xy):
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        r = np.hypot(xy[:, 0], xy[:, 1])
        return (self.u_r(r) / r)[:, None] * xy


def lame_cylinder_oracle(r_i, r_o, u_i, u_o, lam=None, G=None):
    """u_r = A r + B / r with u_r(r_i) = u_i, u_r(r_o) = u_o.

    With both radii under displacement control the moduli drop out; they are
    accepted for interface symmetry.
    """
    if not 0 < r_i < r_o:
        raise ValueError("need 0 < r_i < r_o")
    M = np.array([[r_i, 1.0 / r_i], [r_o, 1.0 / r_o]])
    A, B = np.linalg.solve(M, [u_i, u_o])
    return LameSolution(float(A), float(B))


# --------------------------------------------------------------------------
# Ritz oracle
# --------------------------------------------------------------------------

def _hermite(t, h):
    """Hermite cubic shape values and first/second x-derivatives, (3, 4, ...)."""
    t = np.asarray(t, dtype=float)
    N = np.array([1 - 3 * t**2 + 2 * t**3, h * (t - 2 * t**2 + t**3),
                  3 * t**2 - 2 * t**3, h * (-t**2 + t**3)])
    dN = np.array([-6 * t + 6 * t**2, h * (1 - 4 * t + 3 * t**2),
                   6 * t - 6 * t**2, h * (-2 * t + 3 * t**2)]) / h
    d2N = np.array([-6 + 12 * t, h * (-4 + 6 * t), 6 - 12 * t, h * (-2 + 6 * t)]) / h**2
    return np.array([N, dN, d2N])


def _trig(kind, n, th):
    """f(n th) for f in {cos, sin} and its first two th-derivatives."""
    if kind == "cos":
        return np.array([np.cos(n * th), -n * np.sin(n * th), -n * n * np.cos(n * th)])
    return np.array([np.sin(n * th), n * np.cos(n * th), -n * n * np.sin(n * th)])


def _product(f, g):
    """Derivatives (0, 1, 2) of the product of two angular factors."""
    return np.array([f[0] * g[0], f[1] * g[0] + f[0] * g[1],
                     f[2] * g[0] + 2 * f[1] * g[1] + f[0] * g[2]])


def _cartesian_jet(R, T, r, th):
    """Jet [w, w_x, w_y, w_xx, w_xy, w_yy] of w = R(r) T(th).

    ``R`` = (R, R', R'') and ``T`` = (T, T', T'') broadcast together.
    """
    c, s = np.cos(th), np.sin(th)
    w = R[0] * T[0]
    wr, wt = R[1] * T[0], R[0] * T[1]
    wrr, wrt, wtt = R[2] * T[0], R[1] * T[1], R[0] * T[2]
    wx = c * wr - s / r * wt
    wy = s * wr + c / r * wt
    wxx = c * c * wrr - 2 * c * s / r * wrt + s * s / r**2 * wtt + s * s / r * wr + 2 * c * s / r**2 * wt
    wyy = s * s * wrr + 2 * c * s / r * wrt + c * c / r**2 * wtt + c * c / r * wr - 2 * c * s / r**2 * wt
    wxy = (c * s * wrr + (c * c - s * s) / r * wrt - c * s / r**2 * wtt - c * s / r * wr
           - (c * c - s * s) / r**2 * wt)
    return np.array([w, wx, wy, wxx, wxy, wyy])


@dataclass
class RadialOracle:
    """Ritz reference on the exact annulus; evaluate with :meth:`fields`."""

    r: np.ndarray          # radial nodes
    coef: np.ndarray       # (nodes, 2, fields) nodal value/slope per (field, mode)
    modes: int
    period: int
    labels: tuple          # field labels, e.g. ("a0", "a1", "b1", "c0", ...)

    def _radial(self, r):
        r = np.asarray(r, dtype=float)
        e = np.clip(np.searchsorted(self.r, r, side="right") - 1, 0, len(self.r) - 2)
        h = self.r[e + 1] - self.r[e]
        t = (r - self.r[e]) / h
        H = _hermite(t, h)  # (3, 4, q)
        loc = np.stack([self.coef[e, 0], self.coef[e, 1], self.coef[e + 1, 0], self.coef[e + 1, 1]], axis=1)
        return np.einsum("dkq,qkf->dqf", H, loc)  # (3, q, fields)

    def profiles(self, r):
        """Radial coefficient functions (value only), keyed by label."""
        v = self._radial(r)[0]
        return {lab: v[:, i] for i, lab in enumerate(self.labels)}

    def fields(self, xy):
        """(u (q, 2), phi (q,)) at Cartesian points."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        r = np.hypot(xy[:, 0], xy[:, 1])
        th = np.arctan2(xy[:, 1], xy[:, 0])
        v = self._radial(r)[0]
        ur = np.zeros_like(r)
        ut = np.zeros_like(r)
        phi = np.zeros_like(r)
        for i, lab in enumerate(self.labels):
            k = int(lab[1:])
            n = self.period * k
            if lab[0] == "a":
                ur += v[:, i] * np.cos(n * th)
            elif lab[0] == "b":
                ut += v[:, i] * np.sin(n * th)
            else:
                phi += v[:, i] * np.cos(n * th)
        c, s = np.cos(th), np.sin(th)
        return np.column_stack([ur * c - ut * s, ur * s + ut * c]), phi

    def displacement(self, xy):
        return self.fields(xy)[0]


def _field_labels(modes):
    return tuple([f"a{k}" for k in range(modes)] + [f"b{k}" for k in range(1, modes)]
                 + [f"c{k}" for k in range(modes)])


def radial_flexo_oracle(cset, r_i, r_o, u_i, u_o, phi_i, phi_o, nelem=400, modes=5,
                        period=4, ntheta=None, ngauss=5, grading=1.0):
    """Stationary point of the coupled energy on the annulus r_i < r < r_o.

    Displacement and potential are prescribed on both circles (only the
    axisymmetric mode is nonzero there); the double traction vanishes
    naturally. ``grading`` > 1 clusters radial nodes towards both circles.
    """
    if not 0 < r_i < r_o:
        raise OracleError("need 0 < r_i < r_o")
    if modes < 1 or nelem < 2:
        raise OracleError("need modes >= 1 and nelem >= 2")
    labels = _field_labels(modes)
    nf = len(labels)
    if ntheta is None:
        ntheta = max(32, 8 * period * modes)
    s = np.linspace(-1.0, 1.0, nelem + 1)
    s = np.sign(s) * np.abs(s) ** grading
    rn = r_i + (r_o - r_i) * 0.5 * (s + 1.0)
    th = 2 * np.pi * np.arange(ntheta) / ntheta
    wth = 2 * np.pi / ntheta
    xg, wg = np.polynomial.legendre.leggauss(ngauss)
    H = cset.enthalpy_matrix()

    # angular factors of each (field, Cartesian component): list of (label idx, comp, T-array)
    cos1, sin1 = _trig("cos", 1, th), _trig("sin", 1, th)
    terms = []  # (field index, scalar target 0=u_x 1=u_y 2=phi, T (3, ntheta))
    for i, lab in enumerate(labels):
        n = period * int(lab[1:])
        if lab[0] == "a":
            f = _trig("cos", n, th)
            terms += [(i, 0, _product(f, cos1)), (i, 1, _product(f, sin1))]
        elif lab[0] == "b":
            f = _trig("sin", n, th)
            terms += [(i, 0, -_product(f, sin1)), (i, 1, _product(f, cos1))]
        else:
            terms.append((i, 2, _trig("cos", n, th)))

    ndof = 2 * (nelem + 1) * nf
    dof = lambda node, slope, f: (2 * node + slope) * nf + f  # noqa: E731
    rows, cols, vals = [], [], []
    nloc = 4 * nf
    for e in range(nelem):
        h = rn[e + 1] - rn[e]
        t = 0.5 * (xg + 1.0)
        rg = rn[e] + h * t
        Hm = _hermite(t, h)  # (3, 4, g)
        Ke = np.zeros((nloc, nloc))
        for g in range(ngauss):
            r = rg[g]
            # jets: (4 local shapes, nf fields) -> q rows (11) at each theta
            Q = np.zeros((ntheta, 11, 4, nf))
            for (fi, tgt, T) in terms:
                for a in range(4):
                    jet = _cartesian_jet(Hm[:, a, g][:, None], T, r, th)  # (6, ntheta)
                    if tgt == 0:
                        Q[:, 0, a, fi] += jet[1]
                        Q[:, 2, a, fi] += jet[2]
                        Q[:, 3, a, fi] += jet[3]
                        Q[:, 5, a, fi] += 2 * jet[4]
                        Q[:, 7, a, fi] += jet[5]
                    elif tgt == 1:
                        Q[:, 1, a, fi] += jet[2]
                        Q[:, 2, a, fi] += jet[1]
                        Q[:, 4, a, fi] += jet[5]
                        Q[:, 6, a, fi] += 2 * jet[4]
                        Q[:, 8, a, fi] += jet[3]
                    else:
                        Q[:, 9, a, fi] -= jet[1]
                        Q[:, 10, a, fi] -= jet[2]
            Q = Q.reshape(ntheta, 11, nloc)
            Ke += 0.5 * h * wg[g] * r * wth * np.einsum("tai,ab,tbj->ij", Q, H, Q, optimize=True)
        idx = np.array([dof(e + (a // 2), a % 2, f) for a in range(4) for f in range(nf)])
        rows.append(np.repeat(idx, nloc))
        cols.append(np.tile(idx, nloc))
        vals.append(Ke.ravel())
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(ndof, ndof)).tocsr()

    # Dirichlet values on nodal values at both circles
    fixed = {}
    for node, uval, pval in ((0, u_i, phi_i), (nelem, u_o, phi_o)):
        for f, lab in enumerate(labels):
            val = 0.0
            if lab == "a0":
                val = uval
            elif lab == "c0":
                val = pval
            fixed[dof(node, 0, f)] = val
    fix = np.array(sorted(fixed))
    xfix = np.array([fixed[i] for i in fix])
    free = np.setdiff1d(np.arange(ndof), fix)
    rhs = -K[free][:, fix] @ xfix
    Kff = K[free][:, free].tocsc()
    d = np.abs(Kff.diagonal())
    if np.any(d == 0):
        raise OracleError("oracle system has empty rows")
    sc = 1.0 / np.sqrt(d)
    S = sp.diags(sc)
    lu = spla.splu(sp.csc_matrix(S @ Kff @ S))
    y = lu.solve(sc * rhs)
    y += lu.solve(sc * rhs - (S @ Kff @ S) @ y)
    x = np.zeros(ndof)
    x[fix] = xfix
    x[free] = sc * y
    res = np.linalg.norm(Kff @ x[free] - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if not np.isfinite(res) or res > 1e-8:
        raise OracleError(f"oracle solve failed (relative residual {res:.2e})")
    return RadialOracle(rn, x.reshape(nelem + 1, 2, nf), modes, period, labels)
