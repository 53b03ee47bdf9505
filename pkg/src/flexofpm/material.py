"""Material matrices for isotropic elasticity with cubic flexoelectric and
tetragonal piezoelectric coupling (2D, plane strain).

Vector layouts used throughout the package:

    eps   = [e11, e22, 2 e12]
    sigma = [s11, s22, s12]
    kappa = [k111, k222, 2 k121, 2 k122, k221, k112]   (k_jkl = u_l,jk)
    mu    = [m111, m222, m121, m122, m221, m112]
    E     = [E1, E2] = -grad(phi)
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

__all__ = [
    "EPS0",
    "MaterialError",
    "MaterialProperties",
    "ConstitutiveSet",
    "lame_parameters",
    "build_raw_matrices",
    "condense",
    "constitutive_set",
    "evaluate_fields",
]

EPS0 = 8.854187817e-12


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialProperties:
    E_young: float
    nu: float
    l: float = 0.0
    mu11: float = 0.0
    mu12: float = 0.0
    mu44: float = 0.0
    k11: float = 1e-9
    k33: float = 1e-9
    e15: float = 0.0
    e31: float = 0.0
    e33: float = 0.0
    eps0: float = EPS0

    def __post_init__(self):
        if not self.E_young > 0:
            raise MaterialError("E_young must be positive")
        if not (-1.0 < self.nu < 0.5):
            raise MaterialError("nu must lie in (-1, 0.5); nu = 0.5 is incompressible")
        if self.l < 0:
            raise MaterialError("internal length l must be >= 0")
        if not (self.k11 > self.eps0 and self.k33 > self.eps0):
            raise MaterialError("k11 and k33 must exceed eps0")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def with_(self, **kw):
        return replace(self, **kw)


def lame_parameters(E_young, nu):
    """Plane-strain Lame constants (lambda, G)."""
    if nu >= 0.5:
        raise MaterialError("incompressible material (nu = 0.5)")
    if nu <= -1.0:
        raise MaterialError("nu must exceed -1")
    lam = E_young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    G = E_young / (2.0 * (1.0 + nu))
    return lam, G


@dataclass(frozen=True)
class ConstitutiveSet:
    Dse_raw: np.ndarray   # 3x3
    Dmk_raw: np.ndarray   # 6x6
    kbar: np.ndarray      # 2x2
    e_mat: np.ndarray     # 2x3
    A0: np.ndarray        # 6x2
    Dse: np.ndarray       # 3x3
    Dmk: np.ndarray       # 6x6
    G0: np.ndarray        # 3x6
    eps0: float = EPS0

    @property
    def kbar_free(self):
        """kbar - eps0 I, the susceptibility part entering P."""
        return self.kbar - self.eps0 * np.eye(2)

    def enthalpy_matrix(self):
        """11x11 symmetric H with energy density 1/2 q^T H q, q = [eps, kappa, E]."""
        H = np.zeros((11, 11))
        H[0:3, 0:3] = self.Dse
        H[0:3, 3:9] = -self.G0
        H[3:9, 0:3] = -self.G0.T
        H[3:9, 3:9] = self.Dmk
        H[0:3, 9:11] = -self.e_mat.T
        H[9:11, 0:3] = -self.e_mat
        H[3:9, 9:11] = -self.A0
        H[9:11, 3:9] = -self.A0.T
        H[9:11, 9:11] = -self.kbar
        return H


def build_raw_matrices(props):
    """Raw property matrices as tabulated for the cubic/tetragonal model.

    Returns ``(Dse_raw, Dmk_raw, kbar, e_mat, A0)``.
    """
    lam, G = lame_parameters(props.E_young, props.nu)
    Dse_raw = np.array([[lam + 2 * G, lam, 0.0],
                        [lam, lam + 2 * G, 0.0],
                        [0.0, 0.0, G]])
    h = lam / 2.0
    q = (lam + 3 * G) / 4.0
    g = G / 2.0
    Dmk_raw = props.l**2 * np.array([
        [lam + 2 * G, 0.0, 0.0, h, 0.0, 0.0],
        [0.0, lam + 2 * G, h, 0.0, 0.0, 0.0],
        [0.0, h, q, 0.0, 0.0, g],
        [h, 0.0, 0.0, q, g, 0.0],
        [0.0, 0.0, 0.0, g, G, 0.0],
        [0.0, 0.0, g, 0.0, 0.0, G],
    ])
    kbar = np.diag([props.k11, props.k33])
    e_mat = np.array([[0.0, 0.0, props.e15],
                      [props.e31, props.e33, 0.0]])
    s = 0.5 * (props.mu12 + props.mu44)
    A0 = np.array([[props.mu11, 0.0, 0.0, s, props.mu44, 0.0],
                   [0.0, props.mu11, s, 0.0, 0.0, props.mu44]]).T
    return Dse_raw, Dmk_raw, kbar, e_mat, A0


def _inv2(a):
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if det == 0.0 or not np.isfinite(det):
        raise MaterialError("kbar - eps0 I is singular")
    return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det


def condense(Dse_raw, Dmk_raw, kbar, e_mat, A0, eps0=EPS0):
    """Eliminate polarization: returns ``(Dse, Dmk, G0)``.

    The piezoelectric matrix enters transposed wherever the 2x3 shape demands
    it (``e^T (kbar - eps0 I)^-1 e`` is 3x3).
    """
    inv = _inv2(np.asarray(kbar, dtype=float) - eps0 * np.eye(2))
    Dse = Dse_raw - e_mat.T @ inv @ e_mat
    Dmk = Dmk_raw - A0 @ inv @ A0.T
    G0 = e_mat.T @ inv @ A0.T
    # exact symmetry (the products are symmetric up to rounding)
    Dse = 0.5 * (Dse + Dse.T)
    Dmk = 0.5 * (Dmk + Dmk.T)
    return Dse, Dmk, G0


def constitutive_set(props):
    raw = build_raw_matrices(props)
    Dse, Dmk, G0 = condense(*raw, eps0=props.eps0)
    return ConstitutiveSet(*raw, Dse, Dmk, G0, props.eps0)


def evaluate_fields(cset, eps, kappa, E):
    """Stress, double stress and polarization from (eps, kappa, E).

    Inputs may carry leading batch dimensions; the last axis is the vector.
    """
    eps = np.asarray(eps, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    E = np.asarray(E, dtype=float)
    if eps.shape[-1] != 3 or kappa.shape[-1] != 6 or E.shape[-1] != 2:
        raise ValueError("expected eps (..., 3), kappa (..., 6), E (..., 2)")
    sigma = eps @ cset.Dse.T - kappa @ cset.G0.T - E @ cset.e_mat
    mu = kappa @ cset.Dmk.T - eps @ cset.G0 - E @ cset.A0.T
    P = E @ cset.kbar_free.T + eps @ cset.e_mat.T + kappa @ cset.A0
    return sigma, mu, P
