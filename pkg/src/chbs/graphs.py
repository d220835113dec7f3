"""Maximal monotone graphs, resolvents, Yosida maps and double-well pairs.

Three graph families are supported: the cubic ``regular`` graph on the
whole line, the ``log`` graph on (-1, 1), and the ``obstacle`` graph (the
subdifferential of the indicator of [-1, 1]).  Each comes with its convex
primitive, its resolvent, the Yosida approximation and the associated
smoothed primitive (inf-convolution envelope).  A bulk graph and a
boundary graph are combined into a :class:`PotentialPair` together with
the compatibility constants ``rho`` and ``c0`` that bound the bulk
minimal section by the boundary one.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import IterationFailure, OutOfDomain

RESOLVENT_TOL = 1e-12
RESOLVENT_MAX_ITER = 200

REGULAR = "regular"
LOG = "log"
OBSTACLE = "obstacle"


@dataclass(frozen=True)
class MonotoneGraph:
    """One maximal monotone graph with its convex primitive.

    Parameters
    ----------
    kind : str
        One of ``"regular"``, ``"log"``, ``"obstacle"``.
    param : float
        The family constant: unused for ``regular``, ``c1 > 1`` for
        ``log``, ``c2 > 0`` for ``obstacle``.  The constant only enters
        the paired perturbation; the graph itself does not depend on it.
    lo, hi : float
        Endpoints of the effective domain.
    closed : bool
        Whether finite endpoints belong to the effective domain.
    """

    kind: str
    param: float
    lo: float
    hi: float
    closed: bool

    def beta(self, r):
        """Single-valued graph value at interior points.

        For the obstacle graph this is 0 everywhere on [-1, 1]; values
        outside the domain are not meaningful and are clipped to 0.
        """
        r = np.asarray(r, dtype=float)
        if self.kind == REGULAR:
            out = r ** 3
        elif self.kind == LOG:
            out = np.log1p(r) - np.log1p(-r)
        else:
            out = np.zeros_like(r)
        return out if out.ndim else float(out)

    def beta_prime(self, r):
        """Derivative of the single-valued part (0 for the obstacle)."""
        r = np.asarray(r, dtype=float)
        if self.kind == REGULAR:
            out = 3.0 * r ** 2
        elif self.kind == LOG:
            out = 2.0 / ((1.0 - r) * (1.0 + r))
        else:
            out = np.zeros_like(r)
        return out if out.ndim else float(out)

    def primitive(self, r):
        """Convex primitive, +inf outside its effective domain.

        Normalised so that the primitive vanishes at 0 and is nonnegative.
        """
        r = np.asarray(r, dtype=float)
        if self.kind == REGULAR:
            out = 0.25 * r ** 4
        elif self.kind == LOG:
            inside = np.abs(r) <= 1.0
            rc = np.where(inside, r, 0.0)
            val = xlogy(1.0 + rc, 1.0 + rc) + xlogy(1.0 - rc, 1.0 - rc)
            out = np.where(inside, val, np.inf)
        else:
            out = np.where(np.abs(r) <= 1.0, 0.0, np.inf)
        return out if out.ndim else float(out)

    def contains(self, r, interior=False):
        """Whether ``r`` lies in the effective domain (or its interior)."""
        if interior or not self.closed:
            return self.lo < r < self.hi
        return self.lo <= r <= self.hi


def regular_graph():
    """Cubic graph on the whole line."""
    return MonotoneGraph(REGULAR, 0.0, -math.inf, math.inf, False)


def log_graph(c1=2.0):
    """Logarithmic graph on the open interval (-1, 1); requires c1 > 1."""
    if not c1 > 1.0:
        raise ValueError("log family needs c1 > 1, got %g" % c1)
    return MonotoneGraph(LOG, float(c1), -1.0, 1.0, False)


def obstacle_graph(c2=1.0):
    """Indicator subdifferential on the closed interval [-1, 1]; c2 > 0."""
    if not c2 > 0.0:
        raise ValueError("obstacle family needs c2 > 0, got %g" % c2)
    return MonotoneGraph(OBSTACLE, float(c2), -1.0, 1.0, True)


@dataclass(frozen=True)
class Perturbation:
    """Linear anti-monotone term pi(r) = slope * r with quadratic primitive.

    ``offset`` is the additive constant of the primitive, chosen per
    family so that primitive-of-graph + primitive-of-perturbation equals
    the full double-well potential.
    """

    slope: float
    offset: float = 0.0

    @property
    def lipschitz(self):
        return abs(self.slope)

    def __call__(self, r):
        return self.slope * np.asarray(r, dtype=float)

    def primitive(self, r):
        r = np.asarray(r, dtype=float)
        return 0.5 * self.slope * r ** 2 + self.offset


@dataclass(frozen=True)
class PotentialPair:
    """Bulk and boundary double-well data with compatibility constants."""

    name: str
    bulk: MonotoneGraph
    bulk_pi: Perturbation
    boundary: MonotoneGraph
    boundary_pi: Perturbation
    rho: float = 1.0
    c0: float = 0.0

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ValueError("rho must be positive")
        if self.c0 < 0.0:
            raise ValueError("c0 must be nonnegative")
        if self.boundary.lo < self.bulk.lo or self.boundary.hi > self.bulk.hi:
            raise ValueError(
                "boundary graph domain must be contained in the bulk domain")

    @property
    def lipschitz_bulk(self):
        return self.bulk_pi.lipschitz

    @property
    def lipschitz_boundary(self):
        return self.boundary_pi.lipschitz


def _family(kind, c1, c2):
    if kind == REGULAR:
        return regular_graph(), Perturbation(-1.0, 0.25)
    if kind == LOG:
        g = log_graph(c1)
        return g, Perturbation(-2.0 * g.param, 0.0)
    if kind == OBSTACLE:
        g = obstacle_graph(c2)
        return g, Perturbation(-2.0 * g.param, g.param)
    raise ValueError("unknown potential family %r" % kind)


def preset_pair(name, c1=2.0, c2=1.0, rho=None, c0=None):
    """Build one of the shipped equal bulk/boundary pairs.

    With identical graphs on both sides the compatibility bound holds
    with rho = 1 and c0 = 0, which are the defaults.
    """
    graph, pi = _family(name, c1, c2)
    return PotentialPair(
        name,
        graph, pi, graph, pi,
        rho=1.0 if rho is None else float(rho),
        c0=0.0 if c0 is None else float(c0),
    )


def mixed_pair(bulk_kind, boundary_kind, c1=2.0, c2=1.0, rho=None, c0=None,
               eps_grid=(0.5, 0.1, 0.02), samples=2001):
    """Build a pair with different bulk and boundary families.

    When ``rho``/``c0`` are not given they are fitted by sampling the two
    Yosida maps over the compatibility grid and taking the worst gap (plus
    a small slack).  The fitted constants are not unique; any larger pair
    works as well.
    """
    bulk, bulk_pi = _family(bulk_kind, c1, c2)
    bdry, bdry_pi = _family(boundary_kind, c1, c2)
    if bdry.lo < bulk.lo or bdry.hi > bulk.hi:
        raise ValueError("boundary domain exceeds bulk domain; no valid pair")
    if rho is None:
        rho = 1.0
    if c0 is None:
        worst = 0.0
        for eps in eps_grid:
            span = _sample_span(bulk, bdry, eps, float(rho))
            r = np.linspace(-span, span, samples)
            gap = np.abs(_yosida(bulk, eps, r)) \
                - rho * np.abs(_yosida(bdry, eps * rho, r))
            worst = max(worst, float(gap.max()))
        c0 = max(worst, 0.0) + 1e-9
    return PotentialPair("%s/%s" % (bulk_kind, boundary_kind),
                         bulk, bulk_pi, bdry, bdry_pi,
                         rho=float(rho), c0=float(c0))


def _solve_resolvent(graph, eps_eff, r):
    """Solve J + eps_eff * beta(J) = r componentwise.

    Safeguarded Newton: every iterate stays inside a bracketing interval
    that shrinks monotonically; out-of-bracket or non-finite Newton steps
    fall back to bisection, which guarantees termination.
    """
    r = np.asarray(r, dtype=float)
    if graph.kind == LOG:
        tiny = 1e-14
        lo = np.maximum(np.minimum(r, 0.0), -1.0 + tiny)
        hi = np.minimum(np.maximum(r, 0.0), 1.0 - tiny)
    else:
        # 0 is in beta(0), hence |J| <= |r|.
        lo = np.minimum(r, 0.0)
        hi = np.maximum(r, 0.0)
    j = 0.5 * (lo + hi)
    f = j + eps_eff * graph.beta(j) - r
    for _ in range(RESOLVENT_MAX_ITER):
        done = np.abs(f) <= RESOLVENT_TOL
        if done.all():
            break
        hi = np.where(~done & (f > 0.0), j, hi)
        lo = np.where(~done & (f < 0.0), j, lo)
        fp = 1.0 + eps_eff * graph.beta_prime(j)
        step = np.where(done, 0.0, f / fp)
        cand = j - step
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        cand = np.where(bad & ~done, 0.5 * (lo + hi), cand)
        j = np.where(done, j, cand)
        f = np.where(done, f, j + eps_eff * graph.beta(j) - r)
    worst = float(np.abs(f).max()) if f.size else 0.0
    if worst > RESOLVENT_TOL:
        raise IterationFailure(
            "resolvent solve stalled at residual %.3e (kind=%s, eps_eff=%g)"
            % (worst, graph.kind, eps_eff))
    return j


def resolvent(graph, eps_eff, r):
    """Resolvent J with J + eps_eff * beta(J) containing r.

    Exact projection for the obstacle graph; safeguarded Newton with a
    bisection fallback otherwise.  Accepts scalars or arrays.
    """
    if not eps_eff > 0.0:
        raise ValueError("eps_eff must be positive")
    scalar = np.isscalar(r) or np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if graph.kind == OBSTACLE:
        j = np.clip(r, -1.0, 1.0)
    else:
        j = _solve_resolvent(graph, eps_eff, r)
    return float(j[0]) if scalar else j


def _yosida(graph, eps_eff, r):
    scalar = np.isscalar(r) or np.ndim(r) == 0
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    j = resolvent(graph, eps_eff, rr)
    out = (rr - np.atleast_1d(j)) / eps_eff
    return float(out[0]) if scalar else out


def _yosida_prime(graph, eps_eff, r):
    scalar = np.isscalar(r) or np.ndim(r) == 0
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    if graph.kind == OBSTACLE:
        # generalized derivative: 0 on [-1, 1] (including the kinks)
        out = np.where(np.abs(rr) > 1.0, 1.0 / eps_eff, 0.0)
    else:
        j = np.atleast_1d(resolvent(graph, eps_eff, rr))
        jp = 1.0 / (1.0 + eps_eff * graph.beta_prime(j))
        out = (1.0 - jp) / eps_eff
    return float(out[0]) if scalar else out


def yosida_bulk(graph, eps, r):
    """Yosida approximation with parameter eps, Lipschitz constant 1/eps."""
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    return _yosida(graph, eps, r)


def yosida_boundary(graph, eps, rho, r):
    """Boundary Yosida map: resolvent parameter eps*rho, prefactor 1/(eps*rho).

    Equals :func:`yosida_bulk` with effective parameter ``eps * rho``; the
    asymmetric scaling is what keeps the bulk/boundary compatibility bound
    valid with unchanged constants.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if not rho > 0.0:
        raise ValueError("rho must be positive")
    return _yosida(graph, eps * rho, r)


def yosida_bulk_prime(graph, eps, r):
    """Nodal derivative of the bulk Yosida map (semismooth for obstacle)."""
    return _yosida_prime(graph, eps, r)


def yosida_boundary_prime(graph, eps, rho, r):
    """Nodal derivative of the boundary Yosida map."""
    return _yosida_prime(graph, eps * rho, r)


def moreau_envelope(graph, eps_eff, r):
    """Inf-convolution smoothing of the convex primitive.

    Evaluated through the resolvent:
    (1 / (2 eps_eff)) (r - J)^2 + primitive(J).  Always finite, between 0
    and the unsmoothed primitive.
    """
    scalar = np.isscalar(r) or np.ndim(r) == 0
    rr = np.atleast_1d(np.asarray(r, dtype=float))
    j = np.atleast_1d(resolvent(graph, eps_eff, rr))
    if graph.kind == LOG:
        # guard against a one-ulp overshoot of the root solve
        j = np.clip(j, -1.0, 1.0)
    out = 0.5 / eps_eff * (rr - j) ** 2 + graph.primitive(j)
    return float(out[0]) if scalar else out


def minimal_section(graph, r):
    """Least-modulus element of the graph at r; OutOfDomain outside D."""
    r = float(r)
    if graph.kind == OBSTACLE:
        if abs(r) > 1.0:
            raise OutOfDomain("%.17g outside [-1, 1]" % r)
        # at the endpoints the graph is a vertical half line containing 0
        return 0.0
    if graph.kind == LOG:
        if abs(r) >= 1.0:
            raise OutOfDomain("%.17g outside (-1, 1)" % r)
        return float(graph.beta(r))
    return float(graph.beta(r))


def _sample_span(bulk, boundary, eps, rho):
    """Half-width of a whole-line sampling window that stays computable.

    Near the asymptotes of the log graph the root-finding residual cannot
    reach 1e-12 in double precision, so the window shrinks with the
    effective regularization parameter for that family.
    """
    span = 5.0
    for graph, eps_eff in ((bulk, eps), (boundary, eps * rho)):
        if graph.kind == LOG:
            span = min(span, 1.0 + min(0.25, 8.0 * eps_eff))
    return span


@dataclass
class CompatReport:
    """Result of sampling the Yosida compatibility inequality."""

    ok: bool
    worst_margin: float
    worst_r: float
    samples: int
    eps: float
    rho: float
    c0: float

    def __str__(self):
        status = "pass" if self.ok else "FAIL"
        return ("compatibility %s: worst margin %.3e at r=%.6g "
                "(eps=%g, rho=%g, c0=%g, %d samples)"
                % (status, self.worst_margin, self.worst_r,
                   self.eps, self.rho, self.c0, self.samples))


def check_compatibility(pair, eps, samples):
    """Sample |beta_eps| <= rho |beta_{Gamma,eps}| + c0 and report the margin.

    Points span the boundary-graph domain plus a whole-line window (the
    Yosida maps are globally defined).  The margin of a sample is the
    amount by which the inequality fails; the report passes when no margin
    exceeds 1e-12.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if samples < 1:
        raise ValueError("need at least one sample")
    b_lo = pair.boundary.lo if math.isfinite(pair.boundary.lo) else -3.0
    b_hi = pair.boundary.hi if math.isfinite(pair.boundary.hi) else 3.0
    span = _sample_span(pair.bulk, pair.boundary, eps, pair.rho)
    pts = np.concatenate([
        np.linspace(b_lo, b_hi, samples),
        np.linspace(-span, span, samples),
    ])
    margin = np.abs(_yosida(pair.bulk, eps, pts)) \
        - pair.rho * np.abs(_yosida(pair.boundary, eps * pair.rho, pts)) \
        - pair.c0
    k = int(np.argmax(margin))
    worst = float(margin[k])
    return CompatReport(ok=worst <= 1e-12, worst_margin=worst,
                        worst_r=float(pts[k]), samples=pts.size,
                        eps=eps, rho=pair.rho, c0=pair.c0)


def check_minimal_sections(pair, samples=2001, inset=1e-9):
    """Sample the minimal-section bound over the boundary-graph domain.

    Open domain endpoints are inset by ``inset``.  Returns the worst
    margin (positive means violated).
    """
    lo = pair.boundary.lo if math.isfinite(pair.boundary.lo) else -3.0
    hi = pair.boundary.hi if math.isfinite(pair.boundary.hi) else 3.0
    if not pair.boundary.closed:
        lo, hi = lo + inset, hi - inset
    worst = -math.inf
    for r in np.linspace(lo, hi, samples):
        m = abs(minimal_section(pair.bulk, r)) \
            - pair.rho * abs(minimal_section(pair.boundary, r)) - pair.c0
        worst = max(worst, m)
    return worst
