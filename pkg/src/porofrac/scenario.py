"""
Turn a parsed :class:`~porofrac.io.config.ScenarioConfig` into a discrete
problem, run it, and write the requested outputs.
"""

from __future__ import annotations

import contextlib
import logging
import os
from dataclasses import replace
from pathlib import Path

import numpy as np

from .flow import FlowBC
from .mesh import build_structured_grid, distance_to_segment
from .phasefield import PhaseBC, pins_along_segment, seed_crack_history
from .problem import Problem, initial_state
from .solver import SimulationResult, simulate, steady_flow

log = logging.getLogger(__name__)

THREADS_ENV = "POROFRAC_THREADS"
_COMPONENT_OFFSETS = {"x": (0,), "y": (1,), "xy": (0, 1)}


def _last_wins(idx, vals):
    """Deduplicate (index, value) pairs keeping the last assignment."""
    idx = np.asarray(idx, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    if len(idx) == 0:
        return idx, vals
    _, last = np.unique(idx[::-1], return_index=True)
    keep = len(idx) - 1 - last
    return idx[keep], vals[keep]


def source_field(mesh, sources, q_F_default):
    """(E, 4) fracture-source field from the listed injection regions."""
    q = np.zeros(mesh.wdetJ.shape)
    xy = mesh.qp_xy
    for s in sources:
        if s.segment is not None:
            inside = distance_to_segment(xy, s.segment) <= s.half_width
        else:
            x0, y0, x1, y1 = s.box
            inside = ((xy[..., 0] >= x0) & (xy[..., 0] <= x1)
                      & (xy[..., 1] >= y0) & (xy[..., 1] <= y1))
        q[inside] = q_F_default if s.q_F is None else s.q_F
    return q


def build_problem(cfg):
    """(Problem, initial FieldState) for a scenario."""
    g = cfg.geometry
    mesh = build_structured_grid(g.width, g.height, g.nx, g.ny, g.origin)
    bn = mesh.boundary_nodes

    dofs, vals = [], []
    for bc in cfg.displacement_bcs:
        for off in _COMPONENT_OFFSETS[bc.component]:
            d = 2 * bn[bc.boundary] + off
            dofs.append(d)
            vals.append(np.full(len(d), bc.value))
    u_fixed, u_vals = _last_wins(np.concatenate(dofs) if dofs else [],
                                 np.concatenate(vals) if vals else [])

    p_nodes = [bn[b.boundary] for b in cfg.pressure_dirichlet]
    p_vals = [np.full(len(bn[b.boundary]), b.p) for b in cfg.pressure_dirichlet]
    pn, pv = _last_wins(np.concatenate(p_nodes) if p_nodes else [],
                        np.concatenate(p_vals) if p_vals else [])
    flow_bc = FlowBC(pn, pv, [(b.boundary, b.M_N) for b in cfg.pressure_neumann])

    pins = [PhaseBC(bn[b.boundary], np.full(len(bn[b.boundary]), b.phi)) for b in cfg.phase_pins]
    H0 = np.zeros(mesh.wdetJ.shape)
    for c in cfg.cracks:
        if c.representation == "phi-pin":
            pins.append(pins_along_segment(mesh, c.segment, 1.0))
        else:
            H0 = seed_crack_history(H0, mesh.qp_xy, c.segment, cfg.material, c.B)
    phase_bc = PhaseBC.merge(*pins) if pins else PhaseBC()

    q_F = None
    if cfg.sources:
        q_F = source_field(mesh, cfg.sources, cfg.flow.q_F)

    problem = Problem(mesh, cfg.material, cfg.flow, cfg.physics, cfg.genalpha,
                      u_fixed, u_vals, [(t.boundary, t.traction) for t in cfg.tractions],
                      flow_bc=flow_bc, phase_bc=phase_bc, q_F=q_F)
    ic = cfg.initial
    state = initial_state(problem, ic.u, ic.v, ic.p, H0)
    if ic.phi > 0.0:
        state.phi = np.maximum(state.phi, ic.phi)
        state.phi[phase_bc.nodes] = phase_bc.values
    return problem, state


def resolve_threads(threads=None):
    """Worker count: explicit value, else the environment variable, else 1."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError("thread count must be >= 1")
    return threads


@contextlib.contextmanager
def thread_limit(threads):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        yield
        return
    with threadpool_limits(limits=threads):
        yield


def run_scenario(cfg, output_dir=None, threads=None, dt_override=None, write=True,
                 on_step=None, keep_reports=True):
    """Run a scenario and write its outputs; returns the SimulationResult.

    Outputs go to ``output_dir`` (default: the scenario's own setting):
    ``probes.csv`` with one row per step, ``steps.csv`` with solver
    diagnostics and ``snapshot_NNNNNN.vtk`` files for the requested fields.
    """
    from .io.output import snapshot_fields, write_probe_csv, write_steps_csv, write_vtk_snapshot

    stagger = cfg.stagger
    if dt_override is not None:
        stagger = replace(stagger, dt=float(dt_override))
    problem, state = build_problem(cfg)
    out = Path(output_dir if output_dir is not None else cfg.outputs.output_dir)
    fields = cfg.outputs.fields
    every = cfg.outputs.snapshot_every
    if write:
        out.mkdir(parents=True, exist_ok=True)

    snapshots = []

    def snap(step, st):
        if not (write and fields):
            return
        path = out / f"snapshot_{step:06d}.vtk"
        write_vtk_snapshot(path, problem.mesh, snapshot_fields(problem, st, fields),
                           title=f"{cfg.name} t={st.time:.17g}")
        snapshots.append(str(path))

    with thread_limit(resolve_threads(threads)):
        snap(0, state)
        if cfg.time.steady:
            if problem.flow is not None and problem.physics.flow:
                state.p = steady_flow(problem, state.phi)
            result = SimulationResult(state=state, initial_state=state.copy())
            result.probes = {pb.name: [] for pb in cfg.probes}
            snap(1, state)
        else:
            def hook(step, st, report):
                if step % every == 0:
                    snap(step, st)
                return on_step is not None and on_step(step, st, report)

            result = simulate(problem, state, stagger, cfg.probes, hook, keep_reports)
    result.snapshots = snapshots
    result.problem = problem
    if write:
        if cfg.outputs.probe_series:
            write_probe_csv(out / "probes.csv", result.times, result.probes)
        if not cfg.time.steady:
            write_steps_csv(out / "steps.csv", result.records)
    return result
