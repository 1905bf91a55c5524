"""
Built-in verification benchmarks with closed-form or derived references.

Each benchmark runs a shipped scenario and returns a :class:`BenchmarkResult`
holding one row per checked quantity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Dict, List, Optional

import numpy as np

from .io.config import load_scenario
from .oracles import (SeriesParams, consolidation_references, crack_pressure_series,
                      dimensionless_time, joint_water_head, position_to_xi,
                      time_from_dimensionless)
from .scenario import run_scenario

SINGLE_CRACK_TD = (0.1, 0.2, 0.3, 0.5)
SINGLE_CRACK_TOL = 0.01
JOINT_HEAD = 6.0
JOINT_REL_TOL = 0.01
PEAK_BAND = (1.7, 2.3)
PERIOD_REL_TOL = 0.15


def scenario_path(name):
    """Path of a shipped scenario file (``name`` without extension)."""
    return resources.files("porofrac") / "scenarios" / f"{name}.yaml"


def shipped_scenarios():
    return sorted(p.name[:-5] for p in (resources.files("porofrac") / "scenarios").iterdir()
                  if p.name.endswith(".yaml"))


@dataclass
class Check:
    name: str
    value: float
    reference: float
    error: float
    tolerance: float
    passed: bool


@dataclass
class BenchmarkResult:
    name: str
    checks: List[Check] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self):
        return bool(self.checks) and all(c.passed for c in self.checks)

    def table(self):
        head = f"{'check':<28}{'value':>14}{'reference':>14}{'error':>12}{'tol':>10}  result"
        rows = [head]
        for c in self.checks:
            rows.append(f"{c.name:<28}{c.value:>14.6g}{c.reference:>14.6g}{c.error:>12.3e}"
                        f"{c.tolerance:>10.3g}  {'PASS' if c.passed else 'FAIL'}")
        return "\n".join(rows)


def single_crack_diffusion(output_dir=None, threads=None, write=False, cfg=None):
    """Pressure along the crack against the series at the listed Td values."""
    cfg = cfg or load_scenario(scenario_path("single_crack"))
    x0, _, x1, _ = cfg.geometry.extent
    L = x1 - x0
    P0 = max(b.p for b in cfg.pressure_dirichlet)
    params = SeriesParams(L=L, a=3.0e-5, K_w=1.0 / cfg.flow.c_F, mu_F=cfg.flow.mu_F)
    targets = {Td: time_from_dimensionless(Td, params) for Td in SINGLE_CRACK_TD}
    half = 0.5 * cfg.stagger.dt
    caught = {}

    def grab(step, st, report):
        for Td, t in targets.items():
            if Td not in caught and abs(st.time - t) <= half * (1 + 1e-9):
                caught[Td] = (st.time, st.p.copy())

    res = run_scenario(cfg, output_dir=output_dir, threads=threads, write=write,
                       on_step=grab, keep_reports=False)
    mesh = res.problem.mesh
    line = mesh.boundary_nodes["bottom"]
    x = mesh.nodes[line, 0] - x0
    out = BenchmarkResult("single-crack-diffusion")
    for Td in SINGLE_CRACK_TD:
        if Td not in caught:
            out.checks.append(Check(f"max|P/P0 err| Td={Td}", np.nan, 0.0, np.inf, SINGLE_CRACK_TOL, False))
            continue
        t, p = caught[Td]
        ref = crack_pressure_series(position_to_xi(x, L), dimensionless_time(t, params))
        err = float(np.abs(p[line] / P0 - ref).max())
        out.checks.append(Check(f"max|P/P0 err| Td={Td}", err, 0.0, err, SINGLE_CRACK_TOL,
                                err <= SINGLE_CRACK_TOL))
    return out


def consolidation(output_dir=None, threads=None, write=False, cfg=None):
    """Peak base pressure and top-displacement period of the loaded column."""
    cfg = cfg or load_scenario(scenario_path("consolidation"))
    Ps = -min(t.traction[1] for t in cfg.tractions)
    height = cfg.geometry.height
    res = run_scenario(cfg, output_dir=output_dir, threads=threads, write=write, keep_reports=False)
    t = np.asarray(res.times)
    uy = np.asarray(res.probes["uy_top"])
    p = np.asarray(res.probes["p_bottom"])
    ref = consolidation_references(cfg.material, cfg.flow, height, Ps)
    out = BenchmarkResult("consolidation")
    ratio = float(p.max() / Ps)
    lo, hi = PEAK_BAND
    out.checks.append(Check("peak p_bottom / Ps", ratio, 2.0, abs(ratio - 2.0), hi - 2.0,
                            lo <= ratio <= hi))
    period = observed_period(t, uy)
    err = abs(period - ref.period) / ref.period if np.isfinite(period) else np.inf
    out.checks.append(Check("top uy period [s]", period, ref.period, err, PERIOD_REL_TOL,
                            err <= PERIOD_REL_TOL))
    return out


def observed_period(t, signal):
    """Period of a decaying oscillation from the first rise of the signal.

    The signal starts at a rest state; its first extremum is half a period
    after loading.  When two extrema are present the period is instead
    twice their spacing.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(signal, dtype=float)
    if len(s) < 3:
        return np.nan
    s = s - s[0]
    ds = np.diff(s)
    ext = np.flatnonzero(np.sign(ds[1:]) * np.sign(ds[:-1]) < 0) + 1
    big = [i for i in ext if abs(s[i]) > 0.25 * np.abs(s).max()]
    if not big:
        return np.nan
    return 2.0 * t[big[0]]


def jointed_specimen(output_dir=None, threads=None, write=False, cfg=None):
    """Steady water head at every joint node."""
    cfg = cfg or load_scenario(scenario_path("jointed"))
    res = run_scenario(cfg, output_dir=output_dir, threads=threads, write=write)
    st, mesh = res.state, res.problem.mesh
    joint = np.flatnonzero(st.phi >= 1.0 - 1e-12)
    g = float(np.linalg.norm(cfg.flow.gravity))
    head = joint_water_head(st.p[joint], mesh.nodes[joint, 1], cfg.flow.rho_F, g)
    err = float(np.abs(head - JOINT_HEAD).max() / JOINT_HEAD) if len(joint) else np.inf
    out = BenchmarkResult("jointed-specimen")
    out.checks.append(Check("max rel head error", float(head.max()) if len(joint) else np.nan,
                            JOINT_HEAD, err, JOINT_REL_TOL, err <= JOINT_REL_TOL))
    return out


BENCHMARKS: Dict[str, Callable[..., BenchmarkResult]] = {
    "single-crack-diffusion": single_crack_diffusion,
    "consolidation": consolidation,
    "jointed-specimen": jointed_specimen,
}


def run_benchmark(name, output_dir: Optional[str] = None, threads=None):
    import time

    t0 = time.perf_counter()
    res = BENCHMARKS[name](output_dir=output_dir, threads=threads, write=output_dir is not None)
    res.wall_time = time.perf_counter() - t0
    return res
