"""INI run configuration -> ready-to-solve problem.

Sections (all keys ``name = value``, SI units):

``[geometry]``
    ``outline`` rectangle (x0 y0 x1 y1) | trapezoid (bottom_width top_width
    height) | annulus (r_inner r_outer, a quarter ring) | file.
    ``generator`` quad | voronoi | mapped | polar; ``nx``, ``ny`` (for the
    annulus: radial and angular counts); ``seed`` and ``jitter`` for voronoi
    point clouds; ``domain_file`` when ``outline = file``.
    Alternatively ``benchmark = cylinder|block|pyramid`` starts from a
    built-in benchmark; the other sections then only override it.

``[material]``
    Every :class:`~flexofpm.material.MaterialProperties` field
    (``eps0`` optional).

``[bc]``
    ``<label>.<item> = value`` for boundary labels of the outline. Items:
    ``u`` (two values), ``u1``, ``u2``, ``un``, ``ut``, ``ur`` (radial about
    the origin), ``Q``, ``strip`` (``F width x_center``: vertical line load F
    spread over a strip), ``d``, ``d1``, ``d2``, ``dn``, ``dt`` (normal
    derivative of u), ``R``, ``phi``, ``omega``, ``pin`` / ``roller``
    (``x y``: the edge of the label nearest that point gets both / the
    vertical displacement fixed at zero) and ``tie_phi`` (one floating
    potential shared by the label's cells). Unlisted labels are free.

``[numerics]``
    ``c0``, ``eta11`` ... ``eta23``, ``phi_sign``, ``tol``, ``solver``.
    Penalties accept a ``*E`` or ``*k33`` suffix (``1e10*E``).

``[reference]``
    ``oracle = none | radial | lame`` (annulus only).

``[output]``
    ``directory``, ``nodal``, ``gauss``, ``vtk``, ``domain``, ``matrix``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .assembly import BCData, EdgeBC, PenaltyParams
from .bench import (BENCHMARKS, BenchmarkError, benchmark_partition, build_benchmark, default_spec,
                    strip_overlap)
from .geometry import (GeometryError, PointCloud, generate_grid_points, partition_mapped,
                       partition_polar, partition_quadrilateral, partition_voronoi, rectangle,
                       trapezoid)
from .io import DomainFormatError, read_domain
from .material import MaterialError, MaterialProperties, constitutive_set
from .model import Problem
from .oracle import lame_cylinder_oracle, radial_flexo_oracle
from .solver import ConstraintSet

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "build_problem",
           "build_partition", "build_reference", "solver_options"]


class ConfigError(ValueError):
    pass


MATERIAL_KEYS = tuple(f.name for f in fields(MaterialProperties))
PENALTY_KEYS = ("eta11", "eta12", "eta13", "eta21", "eta22", "eta23")
_SECTIONS = {
    "geometry": {"benchmark", "outline", "generator", "nx", "ny", "seed", "jitter", "domain_file",
                 "x0", "y0", "x1", "y1", "bottom_width", "top_width", "height", "r_inner",
                 "r_outer", "partition"},
    "material": set(MATERIAL_KEYS),
    "bc": None,  # validated item by item
    "numerics": {"c0", "phi_sign", "tol", "solver", *PENALTY_KEYS},
    "reference": {"oracle"},
    "output": {"directory", "nodal", "gauss", "vtk", "domain", "matrix"},
}
_BC_ITEMS = {"u": 2, "u1": 1, "u2": 1, "un": 1, "ut": 1, "ur": 1, "Q": 2, "strip": 3,
             "d": 2, "d1": 1, "d2": 1, "dn": 1, "dt": 1, "R": 2, "phi": 1, "omega": 1,
             "pin": 2, "roller": 2, "tie_phi": 0}
_OUTPUT_DEFAULTS = {"directory": ".", "nodal": "nodal.csv", "gauss": "gauss.csv",
                    "vtk": "partition.vtk", "domain": "domain.txt", "matrix": ""}


@dataclass
class RunConfig:
    path: Path
    geometry: dict
    material: dict
    bc: dict
    numerics: dict
    reference: str = "none"
    output: dict = field(default_factory=lambda: dict(_OUTPUT_DEFAULTS))

    @property
    def benchmark(self):
        return self.geometry.get("benchmark")

    def output_path(self, key):
        name = self.output.get(key, "")
        if not name:
            return None
        base = Path(self.output["directory"])
        if not base.is_absolute():
            base = self.path.parent / base
        return base / name


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path)


def parse_config(text, path=Path("config.ini")):
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (E_young, Q, ...)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        allowed = _SECTIONS[sec]
        if allowed is not None:
            for key in cp[sec]:
                if key not in allowed:
                    raise ConfigError(f"unknown key '{key}' in [{sec}]")
    get = lambda s: dict(cp[s]) if cp.has_section(s) else {}  # noqa: E731
    geometry = get("geometry")
    if not geometry:
        raise ConfigError("missing [geometry] section")
    material = get("material")
    bench = geometry.get("benchmark")
    if bench is None:
        missing = [k for k in MATERIAL_KEYS if k != "eps0" and k not in material]
        if missing:
            raise ConfigError(f"missing material key '{missing[0]}' in [material]")
    elif bench not in BENCHMARKS:
        raise ConfigError(f"unknown benchmark '{bench}'")
    bc = {}
    for key, value in get("bc").items():
        label, _, item = key.rpartition(".")
        if not label or item not in _BC_ITEMS:
            raise ConfigError(f"bad boundary key '{key}' (expected <label>.<item>)")
        bc.setdefault(label, {})[item] = value
    output = dict(_OUTPUT_DEFAULTS)
    output.update(get("output"))
    reference = get("reference").get("oracle", "none")
    if reference not in ("none", "radial", "lame"):
        raise ConfigError(f"unknown oracle '{reference}'")
    return RunConfig(path, geometry, material, bc, get("numerics"), reference, output)


# --------------------------------------------------------------------------
# value parsing
# --------------------------------------------------------------------------

def _float(section, key, text):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key}: expected a number, got {text!r}") from None


def _int(section, key, text):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key}: expected an integer, got {text!r}") from None


def _vector(key, text, count):
    parts = text.replace(",", " ").split()
    if count == 0:
        if text.strip().lower() not in ("true", "yes", "1"):
            raise ConfigError(f"[bc] {key}: expected 'true'")
        return ()
    if len(parts) != count:
        raise ConfigError(f"[bc] {key}: expected {count} value(s), got {len(parts)}")
    return tuple(_float("bc", key, p) for p in parts)


def _scaled(key, text, scales):
    """'1e10*E' -> 1e10 * scales['E']; plain numbers pass through."""
    head, star, tail = text.partition("*")
    value = _float("numerics", key, head.strip())
    if star:
        name = tail.strip()
        if name not in scales:
            raise ConfigError(f"[numerics] {key}: unknown scale '{name}' (use E or k33)")
        value *= scales[name]
    return value


def _material(cfg, base=None):
    vals = {} if base is None else {f.name: getattr(base, f.name) for f in fields(base)}
    for k, v in cfg.material.items():
        vals[k] = _float("material", k, v)
    try:
        return MaterialProperties(**vals)
    except (MaterialError, TypeError) as exc:
        raise ConfigError(f"invalid material: {exc}") from None


def _penalties(cfg, mat, base=None):
    scales = {"E": mat.E_young, "k33": mat.k33}
    vals = {} if base is None else {k: getattr(base, k) for k in PENALTY_KEYS + ("phi_sign",)}
    if base is None:
        missing = [k for k in PENALTY_KEYS if k not in cfg.numerics]
        if missing:
            raise ConfigError(f"missing penalty '{missing[0]}' in [numerics]")
    for k in PENALTY_KEYS:
        if k in cfg.numerics:
            vals[k] = _scaled(k, cfg.numerics[k], scales)
    if "phi_sign" in cfg.numerics:
        vals["phi_sign"] = _float("numerics", "phi_sign", cfg.numerics["phi_sign"])
    try:
        return PenaltyParams(**vals)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid penalties: {exc}") from None


def solver_options(cfg):
    tol = _float("numerics", "tol", cfg.numerics.get("tol", "1e-10"))
    method = cfg.numerics.get("solver", "direct")
    if method not in ("direct", "minres"):
        raise ConfigError(f"unknown solver '{method}'")
    return tol, method


# --------------------------------------------------------------------------
# geometry and boundary conditions
# --------------------------------------------------------------------------

def _partition(cfg, refine=0):
    g = cfg.geometry
    f = 2 ** refine
    num = lambda k: _float("geometry", k, g.get(k))  # noqa: E731
    outline_kind = g.get("outline")
    gen = g.get("generator", "quad")
    if outline_kind == "file":
        if "domain_file" not in g:
            raise ConfigError("outline = file needs domain_file")
        p = Path(g["domain_file"])
        if not p.is_absolute():
            p = cfg.path.parent / p
        try:
            return read_domain(p)
        except DomainFormatError as exc:
            raise ConfigError(f"domain file: {exc}") from None
    if "nx" not in g or "ny" not in g:
        raise ConfigError("[geometry] needs nx and ny")
    nx = _int("geometry", "nx", g["nx"]) * f
    ny = _int("geometry", "ny", g["ny"]) * f
    if outline_kind == "annulus":
        if gen != "polar":
            raise ConfigError("the annulus outline needs generator = polar")
        return partition_polar(nx, ny, num("r_inner"), num("r_outer"))
    if outline_kind == "rectangle":
        outline = rectangle(num("x0"), num("y0"), num("x1"), num("y1"))
    elif outline_kind == "trapezoid":
        outline = trapezoid(num("bottom_width"), num("top_width"), num("height"))
    else:
        raise ConfigError(f"unknown outline '{outline_kind}'")
    if gen == "quad":
        return partition_quadrilateral(nx, ny, outline)
    if gen == "mapped":
        return partition_mapped(nx, ny, outline)
    if gen == "voronoi":
        if outline_kind != "rectangle":
            raise ConfigError("voronoi point clouds are generated on rectangles only")
        rng = np.random.default_rng(_int("geometry", "seed", g.get("seed", "0")))
        pts = generate_grid_points(nx, ny, outline).coords
        jit = _float("geometry", "jitter", g.get("jitter", "0.2"))
        h = min(np.ptp(outline.vertices[:, 0]) / nx, np.ptp(outline.vertices[:, 1]) / ny)
        pts = pts + rng.uniform(-jit * h, jit * h, pts.shape)
        return partition_voronoi(PointCloud(pts, outline))
    raise ConfigError(f"unknown generator '{gen}'")


def _radial(u0):
    def value(edge):
        x, y = edge.midpoint
        return u0 * np.array([x, y]) / np.hypot(x, y)
    return value


def _strip(F, width, xc):
    q = F / width

    def value(edge):
        (x0, _), (x1, _) = edge.endpoints
        return np.array([0.0, -q * strip_overlap(x0, x1, xc - width / 2, xc + width / 2)
                         / edge.length])
    return value


def _edge_bc(label, items):
    v = {k: _vector(f"{label}.{k}", s, _BC_ITEMS[k]) for k, s in items.items()}
    kw = {}
    xy = [k for k in ("u", "u1", "u2", "ur") if k in v]
    nt = [k for k in ("un", "ut") if k in v]
    if xy and nt:
        raise ConfigError(f"[bc] {label}: mixes Cartesian and normal/tangent displacement items")
    if "ur" in v and len(xy) > 1:
        raise ConfigError(f"[bc] {label}: ur cannot be combined with other displacement items")
    if "ur" in v:
        kw.update(u_fixed=(True, True), u=_radial(v["ur"][0]))
    elif "u" in v:
        kw.update(u_fixed=(True, True), u=v["u"])
    elif xy or nt:
        a, b = ("u1", "u2") if xy else ("un", "ut")
        val = (v.get(a, (0.0,))[0], v.get(b, (0.0,))[0])
        kw.update(u_fixed=(a in v, b in v), u_frame="xy" if xy else "nt")
        if nt:  # values given in the edge frame
            n0, n1 = val
            kw["u"] = lambda e, n0=n0, n1=n1: n0 * e.normal + n1 * np.array([-e.normal[1], e.normal[0]])
        else:
            kw["u"] = val
    if "Q" in v and "strip" in v:
        raise ConfigError(f"[bc] {label}: give either Q or strip")
    if "Q" in v:
        kw["Q"] = v["Q"]
    if "strip" in v:
        F, w, xc = v["strip"]
        if w <= 0:
            raise ConfigError(f"[bc] {label}.strip: width must be positive")
        kw["Q"] = _strip(F, w, xc)
    dxy = [k for k in ("d", "d1", "d2") if k in v]
    dnt = [k for k in ("dn", "dt") if k in v]
    if dxy and dnt:
        raise ConfigError(f"[bc] {label}: mixes Cartesian and normal/tangent derivative items")
    if "d" in v:
        kw.update(d_fixed=(True, True), d=v["d"])
    elif dxy or dnt:
        a, b = ("d1", "d2") if dxy else ("dn", "dt")
        val = (v.get(a, (0.0,))[0], v.get(b, (0.0,))[0])
        kw.update(d_fixed=(a in v, b in v), d_frame="xy" if dxy else "nt")
        if dnt:
            n0, n1 = val
            kw["d"] = lambda e, n0=n0, n1=n1: n0 * e.normal + n1 * np.array([-e.normal[1], e.normal[0]])
        else:
            kw["d"] = val
    if "R" in v:
        kw["R"] = v["R"]
    if "phi" in v and "omega" in v:
        raise ConfigError(f"[bc] {label}: give either phi or omega")
    if "phi" in v:
        kw.update(phi_fixed=True, phi=v["phi"][0])
    if "omega" in v:
        kw["omega"] = v["omega"][0]
    return EdgeBC(**kw), v


def _boundary(cfg, part):
    labels = set(part.outline.labels)
    for label in cfg.bc:
        if label not in labels:
            raise ConfigError(f"[bc] unknown boundary label '{label}' "
                              f"(outline has {', '.join(sorted(labels))})")
    bcs = BCData({lb: EdgeBC() for lb in labels})
    groups = []
    n = part.npoints
    for label, items in cfg.bc.items():
        bc, v = _edge_bc(label, items)
        bcs.by_label[label] = bc
        edges = part.edges_by_label(label)
        for key in ("pin", "roller"):
            if key in v:
                p = np.array(v[key])
                e = min(edges, key=lambda e: float(np.linalg.norm(e.midpoint - p)))
                base = bc
                if bc.u_frame != "xy" or callable(bc.u):
                    base = replace(bc, u_fixed=(False, False), u_frame="xy", u=(0.0, 0.0))
                fixed = (True, True) if key == "pin" else (base.u_fixed[0], True)
                bcs.by_edge[e.edge_id] = replace(base, u_fixed=fixed)
        if "tie_phi" in v:
            if bc.phi_fixed:
                raise ConfigError(f"[bc] {label}: tie_phi conflicts with a fixed phi")
            cells = sorted({e.left_cell for e in edges})
            groups.append([2 * n + c for c in cells])
    try:
        cons = ConstraintSet(groups)
    except ValueError as exc:
        raise ConfigError(f"[bc] tie_phi: {exc}") from None
    return bcs, cons


# --------------------------------------------------------------------------
# problem construction
# --------------------------------------------------------------------------

def benchmark_spec(cfg, refine=0):
    g = cfg.geometry
    kw = {}
    if "partition" in g or "generator" in g:
        kw["partition"] = g.get("partition", g.get("generator"))
    try:
        spec = default_spec(cfg.benchmark, **kw)
    except (BenchmarkError, TypeError) as exc:
        raise ConfigError(f"benchmark: {exc}") from None
    if "nx" in g or "ny" in g:
        nx = _int("geometry", "nx", g.get("nx", spec.grid[0]))
        ny = _int("geometry", "ny", g.get("ny", spec.grid[1]))
        spec = spec.with_(grid=(nx, ny))
    if "seed" in g:
        spec = spec.with_(seed=_int("geometry", "seed", g["seed"]))
    mat = _material(cfg, spec.material)
    pen = _penalties(cfg, mat, spec.penalties)
    c0 = _float("numerics", "c0", cfg.numerics["c0"]) if "c0" in cfg.numerics else spec.c0
    try:
        spec = spec.with_(material=mat, penalties=pen, c0=c0)
    except BenchmarkError as exc:
        raise ConfigError(str(exc)) from None
    return spec.refined(refine) if refine else spec


def build_partition(cfg, refine=0):
    if cfg.benchmark:
        try:
            return benchmark_partition(benchmark_spec(cfg, refine))
        except BenchmarkError as exc:
            raise ConfigError(str(exc)) from None
    try:
        return _partition(cfg, refine)
    except GeometryError as exc:
        raise ConfigError(f"geometry: {exc}") from None


def build_problem(cfg, refine=0):
    """Problem for the configuration, grid counts multiplied by ``2**refine``."""
    if cfg.benchmark:
        if cfg.bc:
            raise ConfigError("[bc] cannot be combined with a built-in benchmark")
        spec = benchmark_spec(cfg, refine)
        try:
            return build_benchmark(spec)
        except BenchmarkError as exc:
            raise ConfigError(str(exc)) from None
    mat = _material(cfg)
    pen = _penalties(cfg, mat)
    part = build_partition(cfg, refine)
    bcs, cons = _boundary(cfg, part)
    c0 = _float("numerics", "c0", cfg.numerics.get("c0", str(np.sqrt(10.0))))
    if c0 <= 0:
        raise ConfigError("[numerics] c0 must be positive")
    return Problem(part, constitutive_set(mat), bcs, pen, c0, constraints=cons)


def build_reference(cfg, problem):
    """Reference object with ``fields(xy) -> (u, phi)`` or None.

    Built-in cylinder runs always have one; otherwise ``[reference] oracle``
    selects it, using the inner/outer radial data of an annulus.
    """
    if cfg.benchmark == "cylinder" and cfg.reference == "none":
        from .bench import reference_for
        spec = benchmark_spec(cfg)
        m = spec.material
        if m.l == 0 and m.mu11 == m.mu12 == m.mu44 == 0:
            return _LameFields(_lame(spec.geometry["r_i"], spec.geometry["r_o"],
                                     spec.load["u_i"], spec.load["u_o"]))
        return reference_for(spec)
    if cfg.reference == "none":
        return None
    g = cfg.geometry
    if cfg.benchmark:
        spec = benchmark_spec(cfg)
        if spec.name != "cylinder":
            raise ConfigError(f"no oracle for benchmark '{spec.name}'")
        r_i, r_o = spec.geometry["r_i"], spec.geometry["r_o"]
        u_i, u_o, p_i, p_o = (spec.load[k] for k in ("u_i", "u_o", "phi_i", "phi_o"))
    else:
        if g.get("outline") != "annulus":
            raise ConfigError("oracles need the annulus outline")
        r_i = _float("geometry", "r_inner", g.get("r_inner"))
        r_o = _float("geometry", "r_outer", g.get("r_outer"))
        try:
            inner, outer = cfg.bc["inner"], cfg.bc["outer"]
            u_i = _vector("inner.ur", inner["ur"], 1)[0]
            u_o = _vector("outer.ur", outer["ur"], 1)[0]
            p_i = _vector("inner.phi", inner.get("phi", "0"), 1)[0]
            p_o = _vector("outer.phi", outer.get("phi", "0"), 1)[0]
        except KeyError as exc:
            raise ConfigError(f"oracle needs {exc.args[0]} data on the inner and outer arcs") from None
    if cfg.reference == "lame":
        return _LameFields(_lame(r_i, r_o, u_i, u_o))
    return radial_flexo_oracle(problem.cset, r_i, r_o, u_i, u_o, p_i, p_o, nelem=200)


def _lame(r_i, r_o, u_i, u_o):
    return lame_cylinder_oracle(r_i, r_o, u_i, u_o)


class _LameFields:
    """Adapter giving the Lame solution the oracle ``fields`` interface."""

    def __init__(self, sol):
        self.sol = sol

    def fields(self, xy):
        return self.sol.displacement(xy), None
