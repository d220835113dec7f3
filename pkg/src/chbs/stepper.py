"""Implicit time stepping for the coupled bulk-surface system.

Each step solves the monolithic nonlinear system for the new bulk order
parameter, bulk chemical potential and boundary potential (the boundary
order parameter is the trace of the bulk one, eliminated exactly).  The
graph nonlinearities are applied nodally and multiplied by the consistent
mass matrices; the solver is a damped semismooth Newton method with a
line search.  After convergence the two linear balance equations are
re-solved exactly, which pins the augmented mean values to rounding
level.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse as sp
from scipy.sparse.linalg import splu

from . import diskfem, graphs
from .errors import (IterationFailure, LinSolveFailure, NewtonFailure,
                     OutOfRange, ParseError, ValidationFailure)

_GAUSS3_NODES = (-math.sqrt(0.6), 0.0, math.sqrt(0.6))
_GAUSS3_WEIGHTS = (5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0)


@dataclass
class SchemeParams:
    """Time-stepping parameters.

    ``tau`` and ``sigma`` are the bulk and boundary viscosity
    coefficients, ``eps`` the graph regularization parameter.  Zero
    viscosities are accepted but flagged as outside the well-posedness
    guard.
    """

    h: float
    t_final: float
    tau: float = 0.1
    sigma: float = 0.1
    eps: float = 0.1
    newton_tol: float = 1e-10
    newton_max: int = 50
    damping_min: float = 1.0 / 1024.0

    def check(self):
        bad = []
        if not self.h > 0.0:
            bad.append("time step h must be positive")
        if not self.t_final >= self.h:
            bad.append("t_final must be at least one step")
        if not 0.0 < self.eps <= 1.0:
            bad.append("eps must lie in (0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            bad.append("tau must lie in [0, 1]")
        if not 0.0 <= self.sigma <= 1.0:
            bad.append("sigma must lie in [0, 1]")
        return bad

    @property
    def n_steps(self):
        return int(round(self.t_final / self.h))


@dataclass
class ProblemData:
    """Initial data, sources and the potential pair.

    Sources may be ``None`` (zero), a nodal array (constant in time) or a
    callable ``t -> nodal array``.
    """

    phi0: np.ndarray
    psi0: np.ndarray
    f: object
    g: object
    pair: graphs.PotentialPair


def problem_data(ops, phi0, pair, f=None, g=None):
    """Assemble a :class:`ProblemData`, deriving psi0 as the trace of phi0."""
    phi0 = np.asarray(phi0, dtype=float)
    return ProblemData(phi0, diskfem.trace(ops, phi0), f, g, pair)


@dataclass
class SchemeState:
    """One time level.  ``psi`` is the boundary trace of ``phi``."""

    n: int
    t: float
    phi: np.ndarray
    mu: np.ndarray
    psi: np.ndarray
    w: np.ndarray


@dataclass
class StepReport:
    newton_iters: int
    final_residual: float
    guard_ok: bool
    linsolves: int


@dataclass
class GuardReport:
    h_max: float
    ok: bool
    reason: str = ""


@dataclass
class Trajectory:
    """Computed states plus per-step solver reports.

    ``reports[0]`` is ``None`` (the initial state is given, not solved).
    On a solver failure the partial trajectory is kept and ``failure``
    holds the raised error.
    """

    states: list
    reports: list
    params: SchemeParams
    guard: GuardReport
    outside_theory: bool = False
    failure: Exception = None
    failed_step: int = None

    def times(self):
        return np.array([s.t for s in self.states])

    @property
    def ok(self):
        return self.failure is None


@dataclass
class ValidationReport:
    ok: bool
    violations: list
    strong_norms: list = field(default_factory=list)
    strong_plateau: bool = None

    def raise_if_failed(self):
        if not self.ok:
            raise ValidationFailure(self.violations)
        return self


def step_guard(params, pair):
    """Largest step compatible with the monotone-solver theory.

    The bound is tau / (2 L) in the bulk and sigma / (2 L_Gamma) on the
    boundary; with vanishing viscosity the bound is unsatisfiable.
    """
    L, Lg = pair.lipschitz_bulk, pair.lipschitz_boundary
    term_b = math.inf if L == 0.0 else params.tau / (2.0 * L)
    term_g = math.inf if Lg == 0.0 else params.sigma / (2.0 * Lg)
    h_max = min(term_b, term_g)
    if params.tau == 0.0 or params.sigma == 0.0:
        return GuardReport(h_max, False,
                           "outside discrete well-posedness theory")
    ok = params.h < h_max
    return GuardReport(h_max, ok, "" if ok else "step exceeds h_max")


def average_source(source, n, h, size):
    """Average of the source over step ``n`` by 3-point Gauss quadrature.

    Exact for sources polynomial in time up to degree five.
    """
    if source is None:
        return np.zeros(size)
    if not callable(source):
        return np.asarray(source, dtype=float).copy()
    t0 = n * h
    acc = np.zeros(size)
    for node, weight in zip(_GAUSS3_NODES, _GAUSS3_WEIGHTS):
        acc += weight * np.asarray(source(t0 + 0.5 * h * (node + 1.0)),
                                   dtype=float)
    return acc


def source_at(source, t, size):
    """Point value of a source (for validation-time checks)."""
    if source is None:
        return np.zeros(size)
    if not callable(source):
        return np.asarray(source, dtype=float).copy()
    return np.asarray(source(t), dtype=float)


def initial_state(data, ops):
    """Time level zero: both potentials start at zero."""
    phi = np.asarray(data.phi0, dtype=float).copy()
    return SchemeState(0, 0.0, phi, np.zeros(ops.mesh.n_bulk),
                       diskfem.trace(ops, phi), np.zeros(ops.mesh.n_bdry))


def validate(data, params, ops, strong=False,
             strong_eps_ladder=(0.4, 0.2, 0.1, 0.05)):
    """Check the admissibility of problem data and parameters.

    With ``strong=True`` additionally evaluates the compatibility
    expression  -Lap(phi0) + beta_eps(phi0) + pi(phi0) - f(0)  in the
    discrete H1 norm over a decreasing regularization ladder and reports
    whether those norms plateau (relative growth of the last rung below
    ten percent).
    """
    violations = list(params.check())
    pair = data.pair
    phi0 = np.asarray(data.phi0, dtype=float)
    psi0 = np.asarray(data.psi0, dtype=float)
    if phi0.shape[0] != ops.mesh.n_bulk:
        violations.append("phi0 has %d entries, mesh has %d vertices"
                          % (phi0.shape[0], ops.mesh.n_bulk))
        return ValidationReport(False, violations)
    tr = diskfem.trace(ops, phi0)
    if psi0.shape != tr.shape or not np.array_equal(tr, psi0):
        bad = (np.nonzero(tr != psi0)[0] if psi0.shape == tr.shape
               else np.array([0]))
        violations.append(
            "psi0 is not the trace of phi0 (first mismatch at boundary "
            "node %d)" % int(bad[0]))
    m0 = diskfem.mean_bulk(ops, phi0)
    if not pair.bulk.contains(m0, interior=True):
        violations.append("bulk mean %.6g not interior to the bulk graph "
                          "domain" % m0)
    mg0 = diskfem.mean_bdry(ops, psi0)
    if not pair.boundary.contains(mg0, interior=True):
        violations.append("boundary mean %.6g not interior to the boundary "
                          "graph domain" % mg0)
    if not np.isfinite(pair.bulk.primitive(phi0)).all():
        violations.append("initial bulk potential energy is infinite")
    if not np.isfinite(pair.boundary.primitive(psi0)).all():
        violations.append("initial boundary potential energy is infinite")

    report = ValidationReport(not violations, violations)
    if strong and not violations:
        f0 = source_at(data.f, 0.0, ops.mesh.n_bulk)
        lap = ops.mass_bulk_solver().solve(ops.K_bulk @ phi0,
                                           "mass solve")
        norms = []
        for eps in strong_eps_ladder:
            e = lap + graphs.yosida_bulk(pair.bulk, eps, phi0) \
                + pair.bulk_pi(phi0) - f0
            norms.append(diskfem.norms_bulk(ops, e)["h1"])
        report.strong_norms = norms
        if len(norms) >= 2 and norms[-2] > 0.0:
            report.strong_plateau = (norms[-1] - norms[-2]) <= 0.1 * norms[-2]
        else:
            report.strong_plateau = True
    return report


class _StepWorkspace:
    """Per-run cache: constant Jacobian blocks, trace embedding, LU reuse.

    The Jacobian changes between iterations only through the nodal graph
    derivatives, which drift slowly along a trajectory, so one LU serves
    many Newton updates.  It is refreshed when it ages or when the line
    search signals a poor direction; correctness rests on the exact
    residual, not on the LU being current.
    """

    LU_MAX_AGE = 8

    def __init__(self, ops, pair, params):
        self.ops = ops
        self.pair = pair
        self.params = params
        mesh = ops.mesh
        self.loop = mesh.boundary_loop
        nb, ng = mesh.n_bulk, mesh.n_bdry
        self.nb, self.ng = nb, ng
        self.P = sp.csr_matrix((np.ones(ng), (np.arange(ng), self.loop)),
                               shape=(ng, nb))
        h, tau, sigma = params.h, params.tau, params.sigma
        sb = pair.bulk_pi.slope
        sg = pair.boundary_pi.slope
        Mb, Kb = ops.M_bulk, ops.K_bulk
        Mg, Kg = ops.M_bdry, ops.K_bdry
        self.A11 = (Mb / h).tocsr()
        self.A12 = (Mb + Kb).tocsr()
        self.A21_const = ((tau / h + sb) * Mb + Kb
                          + self.P.T @ ((sigma / h + sg) * Mg + Kg)
                          @ self.P).tocsr()
        self.A22 = (-Mb).tocsr()
        self.A23 = (-(self.P.T @ Mg)).tocsr()
        self.A31 = ((Mg / h) @ self.P).tocsr()
        self.A33 = (Mg + Kg).tocsr()
        self._lu = None
        self._lu_age = 0

    def jacobian_matrix(self, phi):
        pair, params = self.pair, self.params
        d_b = graphs.yosida_bulk_prime(pair.bulk, params.eps, phi)
        d_g = graphs.yosida_boundary_prime(pair.boundary, params.eps,
                                           pair.rho, phi[self.loop])
        A21 = self.A21_const + self.ops.M_bulk.multiply(d_b[None, :]) \
            + self.P.T @ self.ops.M_bdry.multiply(d_g[None, :]) @ self.P
        return sp.bmat([[self.A11, self.A12, None],
                        [A21, self.A22, self.A23],
                        [self.A31, None, self.A33]], format="csc")

    def refactor(self, phi):
        self._lu = splu(self.jacobian_matrix(phi))
        self._lu_age = 0

    def direction(self, phi, r, fresh=False):
        if fresh or self._lu is None or self._lu_age >= self.LU_MAX_AGE:
            self.refactor(phi)
        self._lu_age += 1
        return self._lu.solve(-r)


def _residual(work, state, fn, gn, phi, mu, w):
    ops, pair, params = work.ops, work.pair, work.params
    h, tau, sigma, eps = params.h, params.tau, params.sigma, params.eps
    loop = work.loop
    psi = phi[loop]
    dphi = phi - state.phi
    dpsi = psi - state.psi
    r1 = ops.M_bulk @ (dphi / h + (mu - state.mu)) + ops.K_bulk @ mu
    nl_b = graphs.yosida_bulk(pair.bulk, eps, phi) + pair.bulk_pi(phi) - fn
    r2 = (tau / h) * (ops.M_bulk @ dphi) + ops.K_bulk @ phi \
        + ops.M_bulk @ nl_b - ops.M_bulk @ mu
    nl_g = graphs.yosida_boundary(pair.boundary, eps, pair.rho, psi) \
        + pair.boundary_pi(psi) - gn
    r2[loop] += (sigma / h) * (ops.M_bdry @ dpsi) + ops.K_bdry @ psi \
        + ops.M_bdry @ nl_g - ops.M_bdry @ w
    r3 = ops.M_bdry @ (dpsi / h + (w - state.w)) + ops.K_bdry @ w
    total = float(r1 @ r1 + r2 @ r2 + r3 @ r3)
    rms = math.sqrt(total / (2 * work.nb + work.ng))
    return np.concatenate([r1, r2, r3]), rms


def solve_step(state, data, params, ops, fn=None, gn=None, work=None,
               guard_ok=None):
    """Advance one time level.

    Returns ``(new_state, StepReport)``.  Raises NewtonFailure when the
    damped iteration stagnates; linear solver errors propagate.
    """
    if work is None:
        work = _StepWorkspace(ops, data.pair, params)
    if guard_ok is None:
        guard_ok = step_guard(params, data.pair).ok
    if fn is None:
        fn = average_source(data.f, state.n, params.h, ops.mesh.n_bulk)
    if gn is None:
        gn = average_source(data.g, state.n, params.h, ops.mesh.n_bdry)

    h = params.h
    tol_inner = 0.25 * params.newton_tol
    phi, mu, w = state.phi.copy(), state.mu.copy(), state.w.copy()
    r, rms = _residual(work, state, fn, gn, phi, mu, w)
    iters = 0
    linsolves = 0
    while rms > tol_inner:
        if iters >= params.newton_max:
            raise NewtonFailure("no convergence in %d iterations"
                                % params.newton_max, residual=rms)
        dx = work.direction(phi, r)
        linsolves += 1
        refreshed = work._lu_age == 1
        alpha = 1.0
        while True:
            cand = (phi + alpha * dx[:work.nb],
                    mu + alpha * dx[work.nb:2 * work.nb],
                    w + alpha * dx[2 * work.nb:])
            r_c, rms_c = _residual(work, state, fn, gn, *cand)
            if rms_c < rms or rms_c <= tol_inner:
                phi, mu, w = cand
                r, rms = r_c, rms_c
                break
            alpha *= 0.5
            if alpha < 0.25 and not refreshed:
                # stale LU produced a poor direction; rebuild and retry
                dx = work.direction(phi, r, fresh=True)
                linsolves += 1
                refreshed = True
                alpha = 1.0
                continue
            if alpha < params.damping_min:
                raise NewtonFailure("line search stagnated", residual=rms)
        iters += 1

    # re-solve the two linear balances exactly; this pins the augmented
    # mean values at rounding level independently of the Newton tolerance
    mu = diskfem.inv_neumann_shifted(ops, state.mu - (phi - state.phi) / h)
    w = diskfem.inv_shifted_bdry(
        ops, state.w - (phi[work.loop] - state.psi) / h)
    linsolves += 2
    _, rms = _residual(work, state, fn, gn, phi, mu, w)
    if rms > params.newton_tol:
        raise NewtonFailure("post-enforcement residual %.3e above tolerance"
                            % rms, residual=rms)
    new = SchemeState(state.n + 1, (state.n + 1) * h, phi, mu,
                      phi[work.loop].copy(), w)
    return new, StepReport(iters, rms, bool(guard_ok), linsolves)


def run(data, params, ops, hooks=()):
    """Iterate the stepper from time zero to the final time.

    Diagnostic hooks are invoked as ``hook(state, report)`` for the
    initial state (report ``None``) and after every accepted step.  On a
    solver failure the partial trajectory is returned with the failure
    attached.
    """
    guard = step_guard(params, data.pair)
    work = _StepWorkspace(ops, data.pair, params)
    state = initial_state(data, ops)
    traj = Trajectory([state], [None], params, guard,
                      outside_theory=not guard.ok)
    for hook in hooks:
        hook(state, None)
    for n in range(params.n_steps):
        try:
            state, report = solve_step(state, data, params, ops,
                                       work=work, guard_ok=guard.ok)
        except (NewtonFailure, LinSolveFailure, IterationFailure) as exc:
            if isinstance(exc, NewtonFailure):
                exc.step = n
            traj.failure = exc
            traj.failed_step = n
            return traj
        traj.states.append(state)
        traj.reports.append(report)
        for hook in hooks:
            hook(state, report)
    return traj


def interpolants(traj, t):
    """Piecewise-linear and right-endpoint values at time ``t``.

    ``hat`` interpolates linearly between the enclosing states; ``bar``
    is the right-endpoint step function on left-open intervals, whose
    value at t = 0 is the first computed state.
    """
    h = traj.params.h
    N = len(traj.states) - 1
    T = N * h
    if t < -1e-12 or t > T * (1.0 + 1e-12) + 1e-300:
        raise OutOfRange("t=%.17g outside [0, %.17g]" % (t, T))
    t = min(max(t, 0.0), T)
    n = min(int(math.floor(t / h + 1e-9)), N - 1)
    theta = min(max(t / h - n, 0.0), 1.0)
    lo, hi = traj.states[n], traj.states[n + 1]
    hat = {name: (1.0 - theta) * getattr(lo, name)
           + theta * getattr(hi, name)
           for name in ("phi", "mu", "psi", "w")}
    k = min(max(int(math.ceil(t / h - 1e-9)), 1), N)
    bar_state = traj.states[k]
    bar = {name: getattr(bar_state, name).copy()
           for name in ("phi", "mu", "psi", "w")}
    return {"hat": hat, "bar": bar}


def save_trajectory(traj, path, stride=1):
    """Write the text checkpoint format, one block per recorded state."""
    with open(path, "w", encoding="utf-8") as fh:
        for state in traj.states:
            if state.n % stride != 0:
                continue
            fh.write("state %d %.17g\n" % (state.n, state.t))
            for name in ("phi", "mu", "psi", "w"):
                row = getattr(state, name)
                fh.write(" ".join("%.17g" % x for x in row) + "\n")


def load_states(path):
    """Read a checkpoint file back into a list of states."""
    states = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if head[0] != "state" or len(head) != 3 or i + 5 > len(lines):
            raise ParseError("bad checkpoint block at line %d" % (i + 1))
        try:
            n, t = int(head[1]), float(head[2])
            rows = [np.array([float(x) for x in lines[i + 1 + j].split()])
                    for j in range(4)]
        except ValueError:
            raise ParseError("malformed checkpoint entry near line %d"
                             % (i + 1)) from None
        states.append(SchemeState(n, t, rows[0], rows[1], rows[2], rows[3]))
        i += 5
    return states
