"""Small problem builders shared by the tests."""

import numpy as np

from flexofpm.assembly import BCData, EdgeBC, PenaltyParams
from flexofpm.bench import CYLINDER_MATERIAL as FLEXO
from flexofpm.bench import PYRAMID_MATERIAL as PIEZO
from flexofpm.geometry import partition_quadrilateral, rectangle
from flexofpm.material import MaterialProperties, constitutive_set
from flexofpm.model import Problem

__all__ = ["FLEXO", "PIEZO", "ELASTIC", "square_partition", "make_problem", "verdict", "VERDICTS"]

# cylinder material with every coupling switched off
ELASTIC = MaterialProperties(E_young=139e9, nu=0.3)


def square_partition(n=6, side=1e-5):
    return partition_quadrilateral(n, n, rectangle(0.0, 0.0, side, side))


def make_problem(material=FLEXO, bcs=None, n=6, side=1e-5, pen=None, c0=np.sqrt(10.0)):
    part = square_partition(n, side)
    E = material.E_young
    if pen is None:
        pen = PenaltyParams(eta11=1e3 * E, eta12=1e3 * E, eta13=1e3 * material.k33,
                            eta21=2.0 * E, eta22=10.0 * E, eta23=1.0 * material.k33)
    if bcs is None:
        bcs = BCData({k: EdgeBC() for k in ("bottom", "right", "top", "left")})
    return Problem(part, constitutive_set(material), bcs, pen, c0)


# acceptance verdicts, printed in the terminal summary: {n: (passed, detail)}
VERDICTS = {}


def verdict(n, passed, detail):
    VERDICTS[n] = (bool(passed), detail)
    return bool(passed)
