"""
Scenario documents: a YAML file whose keys carry their units.

Every section maps one-to-one onto a dataclass below.  Parsing resolves all
defaults and rejects unknown keys; :func:`serialize_scenario` writes the
fully resolved form, so parse -> serialize -> parse is the identity.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import yaml

from ..constitutive import MaterialParams
from ..errors import ConfigError, InvalidArgumentError
from ..flow import FlowParams
from ..momentum import GenAlphaParams
from ..problem import Physics
from ..solver import Probe, StaggeredConfig

BOUNDARIES = ("left", "right", "bottom", "top", "all")
EDGE_BOUNDARIES = ("left", "right", "bottom", "top")
CRACK_REPRESENTATIONS = ("H-seed", "phi-pin")
COMPONENTS = ("x", "y", "xy")
OUTPUT_FIELDS = ("u", "v", "p", "phi", "H", "sigma1", "eps_vol")


@dataclass(frozen=True)
class GeometryConfig:
    width: float
    height: float
    nx: int
    ny: int
    origin: Tuple[float, float] = (0.0, 0.0)

    @property
    def extent(self):
        x0, y0 = self.origin
        return x0, y0, x0 + self.width, y0 + self.height


@dataclass(frozen=True)
class CrackConfig:
    segment: Tuple[Tuple[float, float], Tuple[float, float]]
    representation: str = "H-seed"
    B: float = 1.0e3


@dataclass(frozen=True)
class SourceConfig:
    """Injection region: a band of ``half_width`` around ``segment`` or a box.

    ``q_F`` overrides the fracture source inside the region.
    """

    segment: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None
    half_width: Optional[float] = None
    box: Optional[Tuple[float, float, float, float]] = None
    q_F: Optional[float] = None


@dataclass(frozen=True)
class DisplacementBC:
    boundary: str
    component: str = "xy"
    value: float = 0.0


@dataclass(frozen=True)
class TractionBC:
    boundary: str
    traction: Tuple[float, float]


@dataclass(frozen=True)
class PressureDirichlet:
    boundary: str
    p: float


@dataclass(frozen=True)
class PressureNeumann:
    boundary: str
    M_N: float


@dataclass(frozen=True)
class PhasePin:
    boundary: str
    phi: float


@dataclass(frozen=True)
class InitialConditions:
    u: Tuple[float, float] = (0.0, 0.0)
    v: Tuple[float, float] = (0.0, 0.0)
    p: float = 0.0
    phi: float = 0.0


@dataclass(frozen=True)
class TimeConfig:
    dt: float = 1.0e-6
    t_end: float = 1.0e-6
    steady: bool = False


@dataclass(frozen=True)
class OutputSpec:
    snapshot_every: int = 100
    fields: Tuple[str, ...] = ()
    probe_series: bool = True
    output_dir: str = "output"


@dataclass(frozen=True)
class SymmetryConfig:
    """Mirror planes of a reduced model, used when post-processing cracks."""

    mirror_x: bool = False   # reflect across the vertical line x = x0
    mirror_y: bool = False   # reflect across the horizontal line y = y0


@dataclass(frozen=True)
class ScenarioConfig:
    geometry: GeometryConfig
    material: MaterialParams
    flow: Optional[FlowParams] = None
    name: str = "scenario"
    description: str = ""
    physics: Physics = Physics(flow=False)
    cracks: Tuple[CrackConfig, ...] = ()
    sources: Tuple[SourceConfig, ...] = ()
    displacement_bcs: Tuple[DisplacementBC, ...] = ()
    tractions: Tuple[TractionBC, ...] = ()
    pressure_dirichlet: Tuple[PressureDirichlet, ...] = ()
    pressure_neumann: Tuple[PressureNeumann, ...] = ()
    phase_pins: Tuple[PhasePin, ...] = ()
    initial: InitialConditions = InitialConditions()
    time: TimeConfig = TimeConfig()
    stagger: Optional[StaggeredConfig] = None
    genalpha: GenAlphaParams = GenAlphaParams()
    outputs: OutputSpec = OutputSpec()
    probes: Tuple[Probe, ...] = ()
    symmetry: SymmetryConfig = SymmetryConfig()


# -- YAML with source positions ---------------------------------------------

class _Doc:
    """Plain Python data plus the (line, column) of every dotted key."""

    def __init__(self, data, marks):
        self.data = data
        self.marks = marks


def _to_python(node, path, marks):
    marks[path] = (node.start_mark.line + 1, node.start_mark.column + 1)
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            sub = f"{path}.{key}" if path else key
            if key in out:
                raise ConfigError("duplicate key", key=sub,
                                  line=k.start_mark.line + 1, column=k.start_mark.column + 1)
            out[key] = _to_python(v, sub, marks)
            marks[sub] = (k.start_mark.line + 1, k.start_mark.column + 1)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(v, f"{path}[{i}]", marks) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def _load(text):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ConfigError(f"syntax error: {exc.problem}", line=line, column=col) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    marks = {}
    data = {} if node is None else _to_python(node, "", marks)
    if not isinstance(data, dict):
        raise ConfigError("document must be a mapping", line=1, column=1)
    return _Doc(data, marks)


# -- typed accessors ----------------------------------------------------------

class _Section:
    """Reads typed values from one mapping and tracks which keys were used."""

    def __init__(self, doc, path, data):
        self.doc = doc
        self.path = path
        if data is None:
            data = {}
        if not isinstance(data, dict):
            self.fail("expected a mapping", path)
        self.data = data
        self.used = set()

    def key(self, name):
        return f"{self.path}.{name}" if self.path else name

    def fail(self, msg, key):
        line, col = self.doc.marks.get(key, (None, None))
        raise ConfigError(msg, key=key, line=line, column=col)

    def has(self, name):
        return name in self.data and self.data[name] is not None

    def raw(self, name, default=None):
        self.used.add(name)
        return self.data.get(name, default)

    def float(self, name, default=None, required=False):
        v = self.raw(name)
        if v is None:
            if required:
                self.fail("missing required value", self.key(name))
            return default
        return _as_float(v, self, self.key(name))

    def int(self, name, default=None, required=False):
        v = self.raw(name)
        if v is None:
            if required:
                self.fail("missing required value", self.key(name))
            return default
        if isinstance(v, bool) or not isinstance(v, int):
            f = _as_float(v, self, self.key(name))
            if f != int(f):
                self.fail("expected an integer", self.key(name))
            v = int(f)
        return v

    def bool(self, name, default):
        v = self.raw(name)
        if v is None:
            return default
        if not isinstance(v, bool):
            self.fail("expected true or false", self.key(name))
        return v

    def str(self, name, default=None, choices=None, required=False):
        v = self.raw(name)
        if v is None:
            if required:
                self.fail("missing required value", self.key(name))
            return default
        if not isinstance(v, str):
            self.fail("expected a string", self.key(name))
        if choices is not None and v not in choices:
            self.fail(f"must be one of {', '.join(choices)}", self.key(name))
        return v

    def vec(self, name, n, default=None, required=False):
        v = self.raw(name)
        if v is None:
            if required:
                self.fail("missing required value", self.key(name))
            return default
        key = self.key(name)
        if not isinstance(v, list) or len(v) != n:
            self.fail(f"expected a list of {n} numbers", key)
        return tuple(_as_float(x, self, f"{key}[{i}]") for i, x in enumerate(v))

    def segment(self, name, required=True):
        v = self.raw(name)
        key = self.key(name)
        if v is None:
            if required:
                self.fail("missing required value", key)
            return None
        if not (isinstance(v, list) and len(v) == 2 and all(isinstance(p, list) and len(p) == 2
                                                            for p in v)):
            self.fail("expected [[x0, y0], [x1, y1]]", key)
        seg = tuple(tuple(_as_float(c, self, f"{key}[{i}]") for c in p) for i, p in enumerate(v))
        if seg[0] == seg[1]:
            self.fail("segment endpoints must differ", key)
        return seg

    def list(self, name):
        v = self.raw(name)
        if v is None:
            return []
        if not isinstance(v, list):
            self.fail("expected a list", self.key(name))
        return [_Section(self.doc, f"{self.key(name)}[{i}]", item) for i, item in enumerate(v)]

    def section(self, name):
        self.used.add(name)
        return _Section(self.doc, self.key(name), self.data.get(name))

    def finish(self):
        for k in self.data:
            if k not in self.used:
                self.fail("unknown key", self.key(k))


def _as_float(v, sec, key):
    if isinstance(v, bool):
        sec.fail("expected a number", key)
    if isinstance(v, (int, float)):
        f = float(v)
    elif isinstance(v, str):
        # YAML 1.1 reads 1e-9 (no dot) as a string
        try:
            f = float(v)
        except ValueError:
            sec.fail("expected a number", key)
    else:
        sec.fail("expected a number", key)
    if not math.isfinite(f):
        sec.fail("expected a finite number", key)
    return f


def _build(sec, key, factory, names=None, **kwargs):
    """Run a validating constructor, reporting failures against ``key``.

    ``names`` maps constructor arguments to document keys; when the error
    message mentions one of them, that key is reported instead.
    """
    try:
        return factory(**kwargs)
    except InvalidArgumentError as exc:
        msg = str(exc)
        for word in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", msg):
            if names and word in names:
                key = sec.key(names[word])
                break
        sec.fail(msg, key)


# -- sections -----------------------------------------------------------------

def _geometry(sec):
    g = _build(sec, sec.path, GeometryConfig,
               width=sec.float("width_m", required=True),
               height=sec.float("height_m", required=True),
               nx=sec.int("nx", required=True), ny=sec.int("ny", required=True),
               origin=sec.vec("origin_m", 2, (0.0, 0.0)))
    if not (g.width > 0 and g.height > 0):
        sec.fail("width and height must be positive", sec.path)
    if g.nx < 1 or g.ny < 1:
        sec.fail("nx and ny must be >= 1", sec.path)
    sec.finish()
    return g


MATERIAL_KEYS = {"E": "E_Pa", "nu": "nu", "Gc": "Gc_N_per_m", "l0": "l0_m", "k": "k",
                 "rho_s": "rho_s_kg_per_m3", "plane": "plane"}


def _material(sec):
    m = _build(sec, sec.path, MaterialParams, MATERIAL_KEYS,
               E=sec.float("E_Pa", required=True), nu=sec.float("nu", required=True),
               Gc=sec.float("Gc_N_per_m", required=True), l0=sec.float("l0_m", required=True),
               k=sec.float("k", 1.0e-9), rho_s=sec.float("rho_s_kg_per_m3", 2700.0),
               plane=sec.str("plane", "strain", ("strain", "stress")))
    sec.finish()
    return m


FLOW_KEYS = (
    ("c1", "c1"), ("c2", "c2"), ("eps_pR", "eps_pR"), ("alpha_R", "alpha_R"),
    ("rho_R", "rho_R_kg_per_m3"), ("rho_F", "rho_F_kg_per_m3"),
    ("K_R", "K_R_m2"), ("K_F", "K_F_m2"), ("c_R", "c_R_per_Pa"), ("c_F", "c_F_per_Pa"),
    ("mu_R", "mu_R_Pa_s"), ("mu_F", "mu_F_Pa_s"),
)


def _flow(sec):
    kwargs = {attr: sec.float(key, required=True) for attr, key in FLOW_KEYS}
    kwargs["q_R"] = sec.float("q_R_kg_per_m3s", 0.0)
    kwargs["q_F"] = sec.float("q_F_kg_per_m3s", 0.0)
    kwargs["K_VR"] = sec.float("K_VR_Pa", None)
    kwargs["gravity"] = sec.vec("gravity_m_per_s2", 2, (0.0, 0.0))
    kwargs["storage_model"] = sec.str("storage_model", "blended", ("blended", "formula"))
    names = dict(FLOW_KEYS, q_R="q_R_kg_per_m3s", q_F="q_F_kg_per_m3s", K_VR="K_VR_Pa",
                 storage_model="storage_model")
    f = _build(sec, sec.path, FlowParams, names, **kwargs)
    sec.finish()
    return f


def _boundary(sec, name="boundary", edges=False):
    b = sec.str(name, required=True, choices=EDGE_BOUNDARIES if edges else BOUNDARIES)
    return b


def _segment_inside(sec, seg, geom, key):
    x0, y0, x1, y1 = geom.extent
    tol = 1e-9 * max(geom.width, geom.height)
    for x, y in seg:
        if not (x0 - tol <= x <= x1 + tol and y0 - tol <= y <= y1 + tol):
            sec.fail("segment lies outside the domain", key)


def parse_scenario(text):
    """Parse and validate a scenario document; raises ConfigError."""
    doc = _load(text)
    top = _Section(doc, "", doc.data)
    if not top.has("geometry"):
        top.fail("missing required section", "geometry")
    if not top.has("material"):
        top.fail("missing required section", "material")
    geom = _geometry(top.section("geometry"))
    mat = _material(top.section("material"))
    flow = _flow(top.section("flow")) if top.has("flow") else None
    top.used.add("flow")

    ps = top.section("physics")
    physics = _build(ps, "physics", Physics,
                     mechanics=ps.bool("mechanics", True),
                     flow=ps.bool("flow", flow is not None),
                     coupling=ps.bool("coupling", True),
                     inertia=ps.bool("inertia", True))
    ps.finish()
    if physics.flow and flow is None:
        top.fail("flow is active but the flow section is missing", "physics.flow")

    cracks = []
    for cs in top.list("cracks"):
        seg = cs.segment("segment_m")
        _segment_inside(cs, seg, geom, cs.key("segment_m"))
        rep = cs.str("representation", "H-seed", CRACK_REPRESENTATIONS)
        B = cs.float("B", 1.0e3)
        if not B > 0:
            cs.fail("B must be positive", cs.key("B"))
        cs.finish()
        cracks.append(CrackConfig(seg, rep, B))

    sources = []
    for ss in top.list("sources"):
        seg = ss.segment("segment_m", required=False)
        box = ss.vec("box_m", 4, None)
        hw = ss.float("half_width_m", None)
        q = ss.float("q_F_kg_per_m3s", None)
        if (seg is None) == (box is None):
            ss.fail("give exactly one of segment_m and box_m", ss.path)
        if seg is not None:
            _segment_inside(ss, seg, geom, ss.key("segment_m"))
            if hw is None:
                hw = 1.5 * mat.l0
            if not hw > 0:
                ss.fail("half_width_m must be positive", ss.key("half_width_m"))
        elif hw is not None:
            ss.fail("half_width_m only applies to segment_m", ss.key("half_width_m"))
        if box is not None and not (box[0] < box[2] and box[1] < box[3]):
            ss.fail("box_m must be [xmin, ymin, xmax, ymax]", ss.key("box_m"))
        ss.finish()
        sources.append(SourceConfig(seg, hw, box, q))
    if sources and flow is None:
        top.fail("sources need a flow section", "sources")

    dbcs = []
    for ds in top.list("displacement_bcs"):
        dbcs.append(DisplacementBC(_boundary(ds), ds.str("component", "xy", COMPONENTS),
                                   ds.float("value_m", 0.0)))
        ds.finish()
    tractions = []
    for ts in top.list("tractions"):
        tractions.append(TractionBC(_boundary(ts, edges=True),
                                    ts.vec("traction_Pa", 2, required=True)))
        ts.finish()

    pbs = top.section("pressure_bcs")
    pd, pn = [], []
    for s in pbs.list("dirichlet"):
        pd.append(PressureDirichlet(_boundary(s), s.float("p_Pa", required=True)))
        s.finish()
    for s in pbs.list("neumann"):
        pn.append(PressureNeumann(_boundary(s, edges=True),
                                  s.float("M_N_kg_per_m2s", required=True)))
        s.finish()
    pbs.finish()
    if (pd or pn) and flow is None:
        top.fail("pressure boundary conditions need a flow section", "pressure_bcs")

    pins = []
    for s in top.list("phase_bcs"):
        val = s.float("phi", required=True)
        if val not in (0.0, 1.0):
            s.fail("pinned phase values must be 0 or 1", s.key("phi"))
        pins.append(PhasePin(_boundary(s), val))
        s.finish()

    ic = top.section("initial")
    initial = InitialConditions(ic.vec("u_m", 2, (0.0, 0.0)), ic.vec("v_m_per_s", 2, (0.0, 0.0)),
                                ic.float("p_Pa", 0.0), ic.float("phi", 0.0))
    if not 0.0 <= initial.phi <= 1.0:
        ic.fail("phi must lie in [0, 1]", ic.key("phi"))
    ic.finish()

    tsec = top.section("time")
    tc = TimeConfig(tsec.float("dt_s", 1.0e-6), tsec.float("t_end_s", None), tsec.bool("steady", False))
    if tc.t_end is None:
        tc = TimeConfig(tc.dt, tc.dt, tc.steady)
    tsec.finish()

    ss = top.section("stagger")
    stagger = _build(ss, "time", StaggeredConfig, dt=tc.dt, t_end=tc.t_end,
                     eps_t=ss.float("eps_t", 1.0e-3),
                     max_stagger_iters=ss.int("max_stagger_iters", 50),
                     relaxation=ss.float("relaxation", 1.0),
                     up_coupling=ss.str("up_coupling", "block_coupled", ("block_coupled", "sequential")),
                     newton_tol=ss.float("newton_tol", 1.0e-8),
                     max_newton_iters=ss.int("max_newton_iters", 25),
                     max_halvings=ss.int("max_halvings", 3),
                     restore_after=ss.int("restore_after", 5))
    ss.finish()

    gs = top.section("genalpha")
    genalpha = _build(gs, "genalpha.rho_inf", GenAlphaParams, rho_inf=gs.float("rho_inf", 0.9))
    gs.finish()

    os_ = top.section("outputs")
    flds = os_.raw("fields", [])
    if not isinstance(flds, list) or any(f not in OUTPUT_FIELDS for f in flds):
        os_.fail(f"fields must be a list drawn from {', '.join(OUTPUT_FIELDS)}", os_.key("fields"))
    outputs = OutputSpec(os_.int("snapshot_every", 100), tuple(flds),
                         os_.bool("probe_series", True), os_.str("output_dir", "output"))
    if outputs.snapshot_every < 1:
        os_.fail("snapshot_every must be >= 1", os_.key("snapshot_every"))
    os_.finish()

    probes = []
    names = set()
    for s in top.list("probes"):
        name = s.str("name", required=True)
        if name in names or name == "time" or "," in name:
            s.fail("probe names must be unique, not 'time', without commas", s.key("name"))
        names.add(name)
        point = s.vec("point_m", 2, required=True)
        x0, y0, x1, y1 = geom.extent
        tol = 1e-9 * max(geom.width, geom.height)
        if not (x0 - tol <= point[0] <= x1 + tol and y0 - tol <= point[1] <= y1 + tol):
            s.fail("probe point lies outside the domain", s.key("point_m"))
        probes.append(Probe(name, s.str("field", required=True, choices=Probe.FIELDS), point))
        s.finish()

    sy = top.section("symmetry")
    symmetry = SymmetryConfig(sy.bool("mirror_x", False), sy.bool("mirror_y", False))
    sy.finish()

    cfg = ScenarioConfig(
        geometry=geom, material=mat, flow=flow,
        name=top.str("name", "scenario"), description=top.str("description", ""),
        physics=physics, cracks=tuple(cracks), sources=tuple(sources),
        displacement_bcs=tuple(dbcs), tractions=tuple(tractions),
        pressure_dirichlet=tuple(pd), pressure_neumann=tuple(pn), phase_pins=tuple(pins),
        initial=initial, time=tc, stagger=stagger, genalpha=genalpha, outputs=outputs,
        probes=tuple(probes), symmetry=symmetry)
    top.finish()
    return cfg


def load_scenario(path):
    """Read and parse a scenario file."""
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# -- serialization --------------------------------------------------------------

def _seg(seg):
    return [list(seg[0]), list(seg[1])]


def scenario_to_dict(cfg):
    """Fully resolved document form of a scenario."""
    g, m = cfg.geometry, cfg.material
    d: Dict[str, Any] = {"name": cfg.name, "description": cfg.description}
    d["geometry"] = {"width_m": g.width, "height_m": g.height, "nx": g.nx, "ny": g.ny,
                     "origin_m": list(g.origin)}
    d["material"] = {"E_Pa": m.E, "nu": m.nu, "Gc_N_per_m": m.Gc, "l0_m": m.l0, "k": m.k,
                     "rho_s_kg_per_m3": m.rho_s, "plane": m.plane}
    if cfg.flow is not None:
        f = cfg.flow
        fd = {key: getattr(f, attr) for attr, key in FLOW_KEYS}
        fd.update({"q_R_kg_per_m3s": f.q_R, "q_F_kg_per_m3s": f.q_F, "K_VR_Pa": f.K_VR,
                   "gravity_m_per_s2": list(f.gravity), "storage_model": f.storage_model})
        d["flow"] = fd
    p = cfg.physics
    d["physics"] = {"mechanics": p.mechanics, "flow": p.flow, "coupling": p.coupling,
                    "inertia": p.inertia}
    d["cracks"] = [{"segment_m": _seg(c.segment), "representation": c.representation, "B": c.B}
                   for c in cfg.cracks]
    srcs = []
    for s in cfg.sources:
        e = {"segment_m": _seg(s.segment), "half_width_m": s.half_width} if s.segment else \
            {"box_m": list(s.box)}
        if s.q_F is not None:
            e["q_F_kg_per_m3s"] = s.q_F
        srcs.append(e)
    d["sources"] = srcs
    d["displacement_bcs"] = [{"boundary": b.boundary, "component": b.component, "value_m": b.value}
                             for b in cfg.displacement_bcs]
    d["tractions"] = [{"boundary": t.boundary, "traction_Pa": list(t.traction)} for t in cfg.tractions]
    d["pressure_bcs"] = {
        "dirichlet": [{"boundary": b.boundary, "p_Pa": b.p} for b in cfg.pressure_dirichlet],
        "neumann": [{"boundary": b.boundary, "M_N_kg_per_m2s": b.M_N} for b in cfg.pressure_neumann],
    }
    d["phase_bcs"] = [{"boundary": b.boundary, "phi": b.phi} for b in cfg.phase_pins]
    i = cfg.initial
    d["initial"] = {"u_m": list(i.u), "v_m_per_s": list(i.v), "p_Pa": i.p, "phi": i.phi}
    d["time"] = {"dt_s": cfg.time.dt, "t_end_s": cfg.time.t_end, "steady": cfg.time.steady}
    s = cfg.stagger
    d["stagger"] = {"eps_t": s.eps_t, "max_stagger_iters": s.max_stagger_iters,
                    "relaxation": s.relaxation, "up_coupling": s.up_coupling,
                    "newton_tol": s.newton_tol, "max_newton_iters": s.max_newton_iters,
                    "max_halvings": s.max_halvings, "restore_after": s.restore_after}
    d["genalpha"] = {"rho_inf": cfg.genalpha.rho_inf}
    o = cfg.outputs
    d["outputs"] = {"snapshot_every": o.snapshot_every, "fields": list(o.fields),
                    "probe_series": o.probe_series, "output_dir": o.output_dir}
    d["probes"] = [{"name": pb.name, "field": pb.field, "point_m": list(pb.point)}
                   for pb in cfg.probes]
    d["symmetry"] = {"mirror_x": cfg.symmetry.mirror_x, "mirror_y": cfg.symmetry.mirror_y}
    return d


def serialize_scenario(cfg):
    """YAML text of the resolved scenario; floats are written round-trip exact."""
    return yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False, default_flow_style=None)


def with_overrides(cfg, **changes):
    """Copy of ``cfg`` with top-level fields replaced (keeps stagger/time in sync)."""
    from dataclasses import replace
    out = replace(cfg, **changes)
    if "time" in changes:
        out = replace(out, stagger=replace(out.stagger, dt=out.time.dt, t_end=out.time.t_end))
    return out
