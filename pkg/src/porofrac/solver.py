"""
Staggered time stepping: the (u, p) block, the history update and the
phase-field solve are repeated within each step until the fields stop
changing, then the step is accepted and the dynamics advanced.
"""

from __future__ import annotations

import hashlib
import logging
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import constitutive as cm
from . import momentum as mo
from .errors import InvalidArgumentError, SolverError, StepFailure
from .flow import assemble_flow_system, flow_terms, phi_at_qp
from .phasefield import (LinearSystem, assemble_phase_system, assemble_scalar, solve_dirichlet,
                         solve_phase, update_history)
from .problem import FieldState

log = logging.getLogger(__name__)

UP_COUPLINGS = ("block_coupled", "sequential")
# Fraction of the nominal step below which a leftover interval is merged.
END_SLACK = 1e-6


@dataclass(frozen=True)
class StaggeredConfig:
    """Time stepping and staggered-iteration controls.

    Attributes
    ----------
    dt, t_end : time step and final time [s]
    eps_t : tolerance on the relative change between staggered passes
    max_stagger_iters : passes allowed before the step is declared failed
    relaxation : under-relaxation factor on phi, 1 = none
    up_coupling : ``"block_coupled"`` solves u and p in one Newton system,
        ``"sequential"`` solves u then p and lets the staggered loop couple them
    newton_tol : relative residual tolerance of the (u, p) block
    max_halvings, restore_after : step-failure policy of the time loop
    """

    dt: float
    t_end: float
    eps_t: float = 1.0e-3
    max_stagger_iters: int = 50
    relaxation: float = 1.0
    up_coupling: str = "block_coupled"
    newton_tol: float = 1.0e-8
    max_newton_iters: int = 25
    max_halvings: int = 3
    restore_after: int = 5

    def __post_init__(self):
        if not self.eps_t > 0:
            raise InvalidArgumentError("eps_t must be positive")
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if not self.t_end >= self.dt * (1.0 - 1e-12):
            raise InvalidArgumentError("t_end must be at least dt")
        if not 0.0 < self.relaxation <= 1.0:
            raise InvalidArgumentError("relaxation must lie in (0, 1]")
        if self.up_coupling not in UP_COUPLINGS:
            raise InvalidArgumentError(f"up_coupling must be one of {UP_COUPLINGS}")
        if self.max_stagger_iters < 1 or self.max_newton_iters < 1:
            raise InvalidArgumentError("iteration limits must be >= 1")
        if not self.newton_tol > 0:
            raise InvalidArgumentError("newton_tol must be positive")


@dataclass
class StepReport:
    dt: float = 0.0
    stagger_iterations: int = 0
    relative_error_history: List[float] = field(default_factory=list)
    newton_iterations: Dict[str, List[int]] = field(default_factory=dict)
    newton_residuals: Dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0
    converged: bool = False

    @property
    def total_newton_iterations(self):
        return sum(sum(v) for v in self.newton_iterations.values())


def relative_error(new, old, floor=1.0e-12):
    """max over fields of ||x_new - x_old|| / max(||x_new||, floor)."""
    err = 0.0
    for a, b in zip(new, old):
        a = np.asarray(a, dtype=float)
        d = np.linalg.norm(a - np.asarray(b, dtype=float))
        err = max(err, d / max(np.linalg.norm(a), floor))
    return float(err)


def extrapolate_predictor(history, dt_ratio=1.0):
    """Linear extrapolation x_n + (x_n - x_{n-1}) dt_n/dt_{n-1}.

    ``history`` holds the converged states oldest first; with a single
    entry the constant predictor is returned.
    """
    if len(history) == 0:
        raise InvalidArgumentError("predictor needs at least one state")
    x_n = np.asarray(history[-1], dtype=float)
    if len(history) == 1:
        return x_n.copy()
    return x_n + (x_n - np.asarray(history[-2], dtype=float)) * dt_ratio


class Guess(NamedTuple):
    u: np.ndarray
    p: np.ndarray
    phi: np.ndarray


def _pattern(rows, cols):
    """COO index arrays for dense element blocks rows (E, a) x cols (E, b)."""
    a, b = rows.shape[1], cols.shape[1]
    return np.repeat(rows, b, axis=1).ravel(), np.tile(cols, (1, a)).ravel()


def _free_norm(x, free):
    return float(np.linalg.norm(x[free]))


class _DirectSolver:
    """Sparse LU with symmetric diagonal scaling and factor reuse.

    ``perm`` is a symmetric fill-reducing permutation of the unknowns; with
    it the factorization keeps the (scaled, unit) diagonal as pivot unless
    it is 100x smaller than the column maximum.  Without it SuperLU's
    COLAMD column ordering is used.  The factorization is reused while the
    scaled matrix is unchanged to round-off, and :meth:`solve_frozen`
    reuses it unconditionally for modified-Newton steps.
    """

    def __init__(self, perm=None):
        self._matrix = None
        self._lu = None
        self._scale = None
        self.tag = None
        self.perm = None if perm is None else np.asarray(perm, dtype=np.int64)
        self.factorizations = 0

    def solve(self, J, rhs, fixed_mask):
        J = J.tocsr()
        d = np.abs(J.diagonal())
        s = np.where(d > 0.0, 1.0 / np.sqrt(np.where(d > 0.0, d, 1.0)), 1.0)
        s[fixed_mask] = 0.0
        S = sp.diags(s) @ J @ sp.diags(s) + sp.diags(fixed_mask.astype(float))
        if self.perm is not None:
            S = S[self.perm][:, self.perm]
        S = S.tocsc()
        S.sort_indices()
        if not self._same(S):
            try:
                if self.perm is None:
                    self._lu = spla.splu(S, permc_spec="COLAMD")
                else:
                    self._lu = spla.splu(S, permc_spec="NATURAL", diag_pivot_thresh=0.01,
                                         options=dict(SymmetricMode=True))
            except RuntimeError as exc:
                raise SolverError(f"factorization failed: {exc}") from exc
            self._matrix = S
            self.factorizations += 1
        self._scale = s
        return self._apply(rhs)

    @property
    def has_factor(self):
        return self._lu is not None

    def solve_frozen(self, rhs):
        """Solve with the last factorization (None when there is none)."""
        if self._lu is None:
            return None
        return self._apply(rhs)

    def _apply(self, rhs):
        s = self._scale
        b = s * rhs
        if self.perm is None:
            y = self._lu.solve(b)
        else:
            y = np.empty_like(b)
            y[self.perm] = self._lu.solve(b[self.perm])
        x = s * y
        if not np.all(np.isfinite(x)):
            raise SolverError("linear solve produced non-finite values")
        return x

    def _same(self, S):
        M = self._matrix
        if M is None or M.shape != S.shape or M.nnz != S.nnz:
            return False
        if not (np.array_equal(M.indptr, S.indptr) and np.array_equal(M.indices, S.indices)):
            return False
        return bool(np.max(np.abs(M.data - S.data), initial=0.0) <= 1e-13)

    def reset(self):
        self.tag = None
        self._matrix = None
        self._lu = None
        self._scale = None


class Workspace:
    """Per-problem caches shared by consecutive steps."""

    def __init__(self, problem):
        self.problem = problem
        mesh = problem.mesh
        n = mesh.n_nodes
        self.n = n
        self.u_fixed_mask = np.zeros(2 * n, dtype=bool)
        self.u_fixed_mask[problem.u_fixed] = True
        self.p_fixed_mask = np.zeros(n, dtype=bool)
        self.p_fixed_mask[problem.flow_bc.dirichlet_nodes] = True
        self.q_pattern = _pattern(mesh.element_dofs(), mesh.elements)
        self.c_pattern = _pattern(mesh.elements, mesh.element_dofs())
        o = mesh.dissection_order()
        self.solvers = {"up": _DirectSolver(np.column_stack([2 * o, 2 * o + 1, 2 * n + o]).ravel()),
                        "u": _DirectSolver(np.column_stack([2 * o, 2 * o + 1]).ravel()),
                        "p": _DirectSolver(o)}
        self._flow_key = None
        self._flow_cache = None
        ph = problem.physics
        self.use_Q = ph.mechanics and ph.coupling and problem.flow is not None
        self.use_C = ph.coupled

    # -- flow and coupling operators for a fixed phase field -------------
    def flow_operators(self, phi, dt):
        """(terms, A, b, Q, C) for the current phi; cached on (phi, dt)."""
        pr = self.problem
        key = (hashlib.blake2b(np.ascontiguousarray(phi).tobytes(), digest_size=16).digest(), dt)
        if key == self._flow_key:
            return self._flow_cache
        mesh = pr.mesh
        terms = A = b = Q = C = None
        if pr.flow is not None:
            terms = flow_terms(mesh, phi, pr.flow, pr.mat, pr.q_F)
            if pr.physics.flow:
                system = assemble_flow_system(mesh, phi, pr.flow, pr.mat, dt,
                                              np.zeros(self.n), pr.flow_bc, terms=terms)
                A, b = system.matrix, system.rhs     # b excludes the storage history term
            n2 = 2 * self.n
            if self.use_Q:
                Qe = mo.element_pressure_coupling(mesh, terms.props.alpha)
                Q = sp.csr_matrix((Qe.ravel(), self.q_pattern), shape=(n2, self.n))
            if self.use_C:
                Ce = np.transpose(mo.element_pressure_coupling(mesh, terms.coupling_coef), (0, 2, 1))
                C = sp.csr_matrix((Ce.ravel(), self.c_pattern), shape=(self.n, n2))
        storage = None
        if terms is not None and pr.physics.flow and dt is not None:
            storage = assemble_scalar(mesh, terms.storage) / dt
        self._flow_key = key
        self._flow_cache = (terms, A, b, Q, C, storage)
        return self._flow_cache


def _momentum_residual(ws, state, u, phi_qp, p_force, dt):
    """R_u, a lazy tangent builder and the reference magnitude for a trial u_{n+1}."""
    pr = ws.problem
    mesh = pr.mesh
    free = ~ws.u_fixed_mask
    if pr.physics.inertia:
        ga = pr.genalpha
        u_a, a_a = mo.midpoint(state.dynamic, u, ga, dt)
        c_m, c_k = mo.mass_coefficients(ga, dt)
    else:
        u_a, a_a, c_m, c_k = u, None, 0.0, 1.0
    fe, _, eps = mo.internal_force(mesh, u_a, phi_qp, pr.mat, tangent=False)
    f_int = mo.assemble_vector_rhs(mesh, fe)
    R = f_int - pr.f_ext
    # reactions on fixed dofs set the scale of displacement-driven problems
    refs = [_free_norm(f_int, free), _free_norm(pr.f_ext, free), _free_norm(f_int, ~free)]
    if a_a is not None:
        Ma = pr.mass @ a_a
        R += Ma
        refs.append(_free_norm(Ma, free))
    if p_force is not None:
        R -= p_force
        refs.append(_free_norm(p_force, free))

    def tangent():
        K = c_k * mo.assemble_vector_matrix(mesh, mo.element_tangent(mesh, eps, phi_qp, pr.mat))
        return K + c_m * pr.mass if c_m else K

    return R, tangent, max(refs)


def _flow_residual(ws, state, p, u, ops, dt):
    terms, A, b, Q, C, storage = ops
    free = ~ws.p_fixed_mask
    Ap = A @ p
    rhs = b + storage @ state.p
    R = Ap - rhs
    refs = [_free_norm(Ap, free), _free_norm(rhs, free), _free_norm(Ap, ~free)]
    if C is not None:
        cu = C @ ((u - state.u) / dt)
        R += cu
        refs.append(_free_norm(cu, free))
    return R, max(refs)


def _converged(R, free, ref, tol):
    r = _free_norm(R, free)
    if not np.isfinite(r):
        raise SolverError("non-finite residual")
    return r <= tol * ref or r == 0.0, (r / ref if ref > 0 else 0.0)


def _apply_dirichlet(ws, u, p):
    pr = ws.problem
    u = u.copy()
    p = p.copy()
    u[pr.u_fixed] = pr.u_fixed_values
    p[pr.flow_bc.dirichlet_nodes] = pr.flow_bc.dirichlet_values
    return u, p


def solve_up_block(ws, state, phi, u, p, dt, config):
    """Solve the (u, p) block for a fixed phase field.

    Returns (u, p, newton_iterations dict, relative residual dict).
    """
    pr = ws.problem
    ph = pr.physics
    u, p = _apply_dirichlet(ws, u, p)
    if not ph.mechanics:
        u = state.u.copy()
    if not ph.flow:
        p = state.p.copy()
    ops = ws.flow_operators(phi, dt)
    phi_qp = phi_at_qp(pr.mesh, phi)
    iters, resid = {}, {}

    if ph.mechanics and ph.flow and config.up_coupling == "block_coupled":
        u, p, iters["up"], resid = _newton_coupled(ws, state, phi_qp, u, p, ops, dt, config)
        return u, p, iters, resid
    if ph.mechanics:
        u, iters["u"], resid["u"] = _newton_u(ws, state, phi_qp, u, p, ops, dt, config)
    if ph.flow:
        p, iters["p"], resid["p"] = _solve_p(ws, state, u, ops, dt)
    return u, p, iters, resid


def _pressure_force(ws, state, p, Q):
    if Q is None:
        return None, 0.0
    pr = ws.problem
    if pr.physics.inertia:
        af = pr.genalpha.alpha_f
        return Q @ ((1.0 - af) * p + af * state.p), 1.0 - af
    return Q @ p, 1.0


def _keep_factor(solver, tag, it, prev, rel):
    """Modified Newton policy.

    The last factorization is kept (also across steps with the same
    ``tag``) while each iteration cuts the residual tenfold; otherwise the
    tangent is rebuilt and refactored.
    """
    if solver.tag != tag:
        return False
    if it == 0:
        return solver.has_factor
    return prev is not None and rel < 0.1 * prev


def _newton_u(ws, state, phi_qp, u, p, ops, dt, config):
    free = ~ws.u_fixed_mask
    p_force, _ = _pressure_force(ws, state, p, ops[3])
    solver = ws.solvers["u"]
    prev = None
    for it in range(config.max_newton_iters + 1):
        R, tangent, ref = _momentum_residual(ws, state, u, phi_qp, p_force, dt)
        ok, rel = _converged(R, free, ref, config.newton_tol)
        if ok:
            return u, it, rel
        if it == config.max_newton_iters:
            break
        rhs = np.where(free, R, 0.0)
        if _keep_factor(solver, dt, it, prev, rel):
            du = solver.solve_frozen(rhs)
        else:
            du = solver.solve(tangent(), rhs, ws.u_fixed_mask)
            solver.tag = dt
        prev = rel
        u = u - du
    raise SolverError(f"momentum Newton did not converge (relative residual {rel:.3e})")


def _solve_p(ws, state, u, ops, dt):
    pr = ws.problem
    terms, A, b, Q, C, storage = ops
    rhs = b + storage @ state.p
    if C is not None:
        rhs = rhs - C @ ((u - state.u) / dt)
    # the flow matrix only changes with phi and dt, so the factor is reused
    p = np.zeros(ws.n)
    p[pr.flow_bc.dirichlet_nodes] = pr.flow_bc.dirichlet_values
    free = ~ws.p_fixed_mask
    p -= ws.solvers["p"].solve(A, np.where(free, A @ p - rhs, 0.0), ws.p_fixed_mask)
    R, ref = _flow_residual(ws, state, p, u, ops, dt)
    ok, rel = _converged(R, free, ref, 1e-8)
    if not ok:
        raise SolverError(f"pressure solve residual {rel:.3e} above tolerance")
    return p, 1, rel


def _newton_coupled(ws, state, phi_qp, u, p, ops, dt, config):
    terms, A, b, Q, C, storage = ops
    n2 = 2 * ws.n
    fixed = np.concatenate([ws.u_fixed_mask, ws.p_fixed_mask])
    free_u, free_p = ~ws.u_fixed_mask, ~ws.p_fixed_mask
    solver = ws.solvers["up"]
    prev = None
    for it in range(config.max_newton_iters + 1):
        p_force, c_p = _pressure_force(ws, state, p, Q)
        R_u, tangent, ref_u = _momentum_residual(ws, state, u, phi_qp, p_force, dt)
        R_p, ref_p = _flow_residual(ws, state, p, u, ops, dt)
        ok_u, rel_u = _converged(R_u, free_u, ref_u, config.newton_tol)
        ok_p, rel_p = _converged(R_p, free_p, ref_p, config.newton_tol)
        if ok_u and ok_p:
            return u, p, it, {"u": rel_u, "p": rel_p}
        if it == config.max_newton_iters:
            break
        R = np.where(fixed, 0.0, np.concatenate([R_u, R_p]))
        rel = max(rel_u, rel_p)
        if _keep_factor(solver, dt, it, prev, rel):
            dx = solver.solve_frozen(R)
        else:
            J = sp.bmat([[tangent(), None if Q is None else -c_p * Q],
                         [None if C is None else C / dt, A]], format="csr")
            dx = solver.solve(J, R, fixed)
            solver.tag = dt
        prev = rel
        u = u - dx[:n2]
        p = p - dx[n2:]
    raise SolverError(f"(u, p) Newton did not converge (relative residuals {rel_u:.3e}, {rel_p:.3e})")


def _phase_update(ws, state, H, phi_k, relaxation):
    pr = ws.problem
    if np.array_equal(H, state.H) and np.array_equal(phi_k, state.phi):
        return phi_k
    sol = solve_phase(assemble_phase_system(pr.mesh, H, pr.mat, pr.phase_bc))
    if relaxation == 1.0:
        return sol
    return phi_k + relaxation * (sol - phi_k)


def staggered_step(ws, state, config, dt, guess=None):
    """Advance ``state`` by ``dt``; returns (new state, StepReport).

    Raises StepFailure (carrying the report) when the staggered loop or a
    sub-solve does not converge.
    """
    if not dt > 0:
        raise InvalidArgumentError("dt must be positive")
    pr = ws.problem
    t0 = _time.perf_counter()
    guess = guess if guess is not None else Guess(state.u, state.p, state.phi)
    phi_k = np.clip(np.asarray(guess.phi, dtype=float), 0.0, 1.0)
    phi_k = phi_k.copy()
    phi_k[pr.phase_bc.nodes] = pr.phase_bc.values
    u_k, p_k = guess.u, guess.p
    report = StepReport(dt=dt)
    # The coupled block leaves u and p consistent with phi after one pass;
    # the sequential split does not, so its first pass is measured against the guess.
    u_prev, p_prev = (u_k, p_k) if config.up_coupling == "sequential" else (None, None)
    H_k = state.H
    try:
        for it in range(1, config.max_stagger_iters + 1):
            u_k, p_k, iters, resid = solve_up_block(ws, state, phi_k, u_k, p_k, dt, config)
            for name, count in iters.items():
                report.newton_iterations.setdefault(name, []).append(count)
            report.newton_residuals = resid
            if pr.physics.mechanics:
                psi = cm.psi_plus(mo.qp_strain(pr.mesh, u_k), pr.mat)
                H_k = update_history(state.H, psi)
            phi_new = _phase_update(ws, state, H_k, phi_k, config.relaxation)
            err = relative_error(
                [u_k, p_k, phi_new],
                [u_k if u_prev is None else u_prev, p_k if p_prev is None else p_prev, phi_k])
            report.relative_error_history.append(err)
            report.stagger_iterations = it
            u_prev, p_prev = u_k, p_k
            if err < config.eps_t:
                report.converged = True
                break
            phi_k = phi_new
    except SolverError as exc:
        report.wall_time = _time.perf_counter() - t0
        raise StepFailure(str(exc), report) from exc
    report.wall_time = _time.perf_counter() - t0
    if not report.converged:
        raise StepFailure("staggered iteration did not converge", report)

    if pr.physics.inertia and pr.physics.mechanics:
        dyn = mo.genalpha_advance(state.dynamic, u_k, pr.genalpha, dt)
        v, a = dyn.v, dyn.a
    else:
        v, a = (u_k - state.u) / dt, np.zeros_like(u_k)
    new = FieldState(u_k, v, a, p_k, phi_new, H_k, state.time + dt)
    return new, report


def initial_acceleration(ws, state):
    """Acceleration balancing the loads at t0: M a0 = F_ext + Q p0 - F_int(u0)."""
    pr = ws.problem
    if not (pr.physics.inertia and pr.physics.mechanics):
        return np.zeros_like(state.u)
    phi_qp = phi_at_qp(pr.mesh, state.phi)
    fe, _, _ = mo.internal_force(pr.mesh, state.u, phi_qp, pr.mat, tangent=False)
    r = pr.f_ext - mo.assemble_vector_rhs(pr.mesh, fe)
    ops = ws.flow_operators(state.phi, None)
    if ops[3] is not None:
        r = r + ops[3] @ state.p
    fixed = ws.u_fixed_mask
    M = pr.mass
    return solve_dirichlet(LinearSystem(M, r, np.flatnonzero(fixed), np.zeros(fixed.sum())))


def steady_flow(problem, phi):
    """Steady pressure field for a fixed phase field (no storage, no coupling)."""
    system = assemble_flow_system(problem.mesh, phi, problem.flow, problem.mat, None,
                                  None, problem.flow_bc, q_F=problem.q_F)
    return solve_dirichlet(system)


# -- time loop -----------------------------------------------------------

@dataclass
class Probe:
    """Point probe of a nodal field: ``p``, ``phi``, ``ux``, ``uy``, ``vx``, ``vy``."""

    name: str
    field: str
    point: Sequence[float]

    FIELDS = ("p", "phi", "ux", "uy", "vx", "vy")

    def __post_init__(self):
        if self.field not in self.FIELDS:
            raise InvalidArgumentError(f"unknown probe field '{self.field}'")

    def evaluate(self, mesh, state):
        name = self.field
        if name in ("p", "phi"):
            nodal = getattr(state, name)
        else:
            vec = state.u if name[0] == "u" else state.v
            nodal = vec[0::2] if name[1] == "x" else vec[1::2]
        return mesh.interpolate(nodal, self.point)


@dataclass
class StepRecord:
    """Deterministic per-step diagnostics (wall time is kept out on purpose)."""

    time: float
    dt: float
    stagger_iterations: int
    newton_iterations: int
    relative_error: float
    max_phi: float
    cracked_area: float


@dataclass
class SimulationResult:
    times: List[float] = field(default_factory=list)
    probes: Dict[str, List[float]] = field(default_factory=dict)
    records: List[StepRecord] = field(default_factory=list)
    reports: List[StepReport] = field(default_factory=list)
    state: Optional[FieldState] = None
    initial_state: Optional[FieldState] = None
    snapshots: List[str] = field(default_factory=list)
    stopped_early: bool = False


def cracked_area(mesh, phi, threshold=0.95):
    """Area of elements whose mean phase field exceeds ``threshold``."""
    pe = np.asarray(phi)[mesh.elements].mean(axis=1)
    return float(np.sum(mesh.wdetJ.sum(axis=1)[pe > threshold]))


def step_length(time, dt, t_end, dt_nominal):
    """Length of the next step, or None once ``t_end`` is reached.

    A remainder shorter than ``END_SLACK * dt_nominal`` is absorbed into
    the current step, so accumulated round-off in ``time`` never produces
    a vanishing final step.
    """
    slack = END_SLACK * dt_nominal
    left = t_end - time
    if left <= slack:
        return None
    return left if left <= dt + slack else dt


def simulate(problem, state, config, probes=(), on_step: Optional[Callable] = None,
             keep_reports=True):
    """Run the time loop from ``state`` to ``config.t_end``.

    ``on_step(step_index, state, report)`` is called after every accepted
    step; a true return value ends the run early.  Step failures halve dt
    (at most ``config.max_halvings`` times in a row); the nominal dt is
    restored after ``config.restore_after`` successful reduced steps.
    """
    ws = Workspace(problem)
    state = state.copy()
    if problem.physics.inertia and problem.physics.mechanics and not np.any(state.a):
        state.a = initial_acceleration(ws, state)
    result = SimulationResult(initial_state=state.copy())
    result.probes = {pb.name: [] for pb in probes}
    history = [(state.time, state.u, state.p, state.phi)]
    dt_nominal = config.dt
    dt = dt_nominal
    halvings = 0
    successes = 0
    step = 0
    t_end = config.t_end
    while (dt_step := step_length(state.time, dt, t_end, dt_nominal)) is not None:
        if len(history) == 2:
            ratio = dt_step / (history[1][0] - history[0][0])
            guess = Guess(*(extrapolate_predictor([history[0][i], history[1][i]], ratio)
                            for i in (1, 2, 3)))
        else:
            guess = Guess(state.u, state.p, state.phi)
        try:
            new, report = staggered_step(ws, state, config, dt_step, guess)
        except StepFailure as exc:
            if halvings >= config.max_halvings:
                raise
            halvings += 1
            successes = 0
            dt = dt / 2.0
            log.warning("step failed at t=%.6e (%s); retrying with dt=%.3e",
                        state.time, exc, dt)
            continue
        step += 1
        state = new
        history = [history[-1], (state.time, state.u, state.p, state.phi)]
        if dt < dt_nominal:
            successes += 1
            if successes >= config.restore_after:
                dt, halvings, successes = dt_nominal, 0, 0
        else:
            halvings = 0
        result.times.append(state.time)
        for pb in probes:
            result.probes[pb.name].append(pb.evaluate(problem.mesh, state))
        result.records.append(StepRecord(
            state.time, dt_step, report.stagger_iterations, report.total_newton_iterations,
            report.relative_error_history[-1], float(state.phi.max()),
            cracked_area(problem.mesh, state.phi)))
        if keep_reports:
            result.reports.append(report)
        if on_step is not None and on_step(step, state, report):
            result.stopped_early = True
            break
    result.state = state
    return result
