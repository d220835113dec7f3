"""P1 finite elements on a triangulated unit disk and its boundary curve.

The mesh generator places a center vertex plus concentric rings; the
outermost ring is the closed boundary polyline.  Assembly produces the
consistent bulk mass/stiffness pair and the periodic 1-D mass/stiffness
pair along the boundary (arc-length Laplacian on the curve).  On top of
those sit mean values, the shifted Neumann inverse, the constrained Green
solves for zero-mean data, and the dual norms they induce.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse as sp
from scipy.sparse.linalg import splu

from .errors import (DegenerateElement, LinSolveFailure, NotZeroMean,
                     ParseError)

LIN_TOL = 1e-12


@dataclass
class DiskMesh:
    """Triangulation of the disk with its boundary loop.

    ``boundary_loop`` lists the bulk indices of the boundary vertices in
    cyclic order tracing the curve once; it doubles as the map from
    boundary-local to bulk numbering.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loop: np.ndarray

    @property
    def n_bulk(self):
        return self.vertices.shape[0]

    @property
    def n_bdry(self):
        return self.boundary_loop.shape[0]

    @property
    def bdry_of_bulk(self):
        return self.boundary_loop

    def triangle_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self):
        return float(self.triangle_areas().sum())

    def boundary_lengths(self):
        a = self.vertices[self.boundary_loop]
        b = self.vertices[np.roll(self.boundary_loop, -1)]
        return np.hypot(*(b - a).T)

    def boundary_length(self):
        return float(self.boundary_lengths().sum())


def gen_disk_mesh(n_rings, n_sectors):
    """Structured triangulation of the unit disk.

    One center vertex, ``n_rings`` rings of ``n_sectors`` vertices at
    radii k/n_rings, fan triangles around the center, two triangles per
    quadrilateral between rings.  All triangles positively oriented.
    """
    if n_rings < 1 or n_sectors < 3:
        raise ValueError("need n_rings >= 1 and n_sectors >= 3")
    R, S = int(n_rings), int(n_sectors)
    theta = 2.0 * math.pi * np.arange(S) / S
    verts = [np.zeros((1, 2))]
    for k in range(1, R + 1):
        r = k / R
        verts.append(np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    vertices = np.vstack(verts)

    def idx(k, j):
        return 1 + (k - 1) * S + (j % S)

    tris = []
    for j in range(S):
        tris.append((0, idx(1, j), idx(1, j + 1)))
    for k in range(1, R):
        for j in range(S):
            a, b = idx(k, j), idx(k, j + 1)
            c, d = idx(k + 1, j), idx(k + 1, j + 1)
            tris.append((a, d, b))
            tris.append((a, c, d))
    triangles = np.array(tris, dtype=np.int64)
    boundary_loop = np.array([idx(R, j) for j in range(S)], dtype=np.int64)
    return DiskMesh(vertices, triangles, boundary_loop)


def validate_mesh(mesh):
    """Check orientation, positivity and boundary topology.

    The boundary edges of the triangulation must coincide, as a set, with
    the consecutive pairs of the (single, closed) boundary loop.
    Raises ParseError on violations so corrupted mesh files surface as
    parse-stage failures.
    """
    areas = mesh.triangle_areas()
    if (areas <= 0.0).any():
        raise ParseError("non-positively-oriented or degenerate triangle")
    edges = {}
    for t in mesh.triangles:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0) + 1
    bdry_edges = {k for k, cnt in edges.items() if cnt == 1}
    loop = mesh.boundary_loop
    if len(set(loop.tolist())) != len(loop):
        raise ParseError("boundary loop revisits a vertex")
    loop_edges = set()
    for i in range(len(loop)):
        a, b = int(loop[i]), int(loop[(i + 1) % len(loop)])
        loop_edges.add((min(a, b), max(a, b)))
    if loop_edges != bdry_edges:
        raise ParseError("boundary loop does not trace the mesh boundary")
    return True


def save_mesh(mesh, path):
    """Write the plain-text mesh format (0-based indices)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("vertices %d\n" % mesh.n_bulk)
        for x, y in mesh.vertices:
            fh.write("%.17g %.17g\n" % (x, y))
        fh.write("triangles %d\n" % mesh.triangles.shape[0])
        for i, j, k in mesh.triangles:
            fh.write("%d %d %d\n" % (i, j, k))
        fh.write("boundary %d\n" % mesh.n_bdry)
        for b in mesh.boundary_loop:
            fh.write("%d\n" % b)


def load_mesh(path):
    """Read the plain-text mesh format; raises ParseError on malformed input."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split()
    pos = 0

    def take(n=1):
        nonlocal pos
        if pos + n > len(tokens):
            raise ParseError("unexpected end of mesh file")
        out = tokens[pos:pos + n]
        pos += n
        return out

    def section(name):
        word, count = take(2)
        if word != name:
            raise ParseError("expected section %r, found %r" % (name, word))
        try:
            return int(count)
        except ValueError:
            raise ParseError("bad count for section %r" % name) from None

    try:
        nv = section("vertices")
        vertices = np.array([float(t) for t in take(2 * nv)],
                            dtype=float).reshape(nv, 2)
        nt = section("triangles")
        triangles = np.array([int(t) for t in take(3 * nt)],
                             dtype=np.int64).reshape(nt, 3)
        nbd = section("boundary")
        loop = np.array([int(t) for t in take(nbd)], dtype=np.int64)
    except ValueError as exc:
        raise ParseError("malformed mesh entry: %s" % exc) from None
    if pos != len(tokens):
        raise ParseError("trailing garbage in mesh file")
    if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
        raise ParseError("triangle index out of range")
    if loop.size and (loop.min() < 0 or loop.max() >= nv):
        raise ParseError("boundary index out of range")
    return DiskMesh(vertices, triangles, loop)


class DiscreteOperators:
    """Assembled sparse operators plus cached factorizations.

    Immutable after construction; the lazily built factorizations are
    read-only once created, so sharing across threads is safe.
    """

    def __init__(self, mesh, M_bulk, K_bulk, M_bdry, K_bdry):
        self.mesh = mesh
        self.M_bulk = M_bulk
        self.K_bulk = K_bulk
        self.M_bdry = M_bdry
        self.K_bdry = K_bdry
        self.lumped_bulk = np.asarray(M_bulk.sum(axis=1)).ravel()
        self.lumped_bdry = np.asarray(M_bdry.sum(axis=1)).ravel()
        self.area = float(self.lumped_bulk.sum())
        self.boundary_length = float(self.lumped_bdry.sum())
        self._cache = {}

    # -- factorizations -------------------------------------------------
    def _factor(self, key, build):
        if key not in self._cache:
            A = build().tocsc()
            self._cache[key] = _FactoredMatrix(A)
        return self._cache[key]

    def mass_bulk_solver(self):
        return self._factor("m_bulk", lambda: self.M_bulk)

    def shifted_bulk_solver(self):
        return self._factor("mk_bulk", lambda: self.M_bulk + self.K_bulk)

    def shifted_bdry_solver(self):
        return self._factor("mk_bdry", lambda: self.M_bdry + self.K_bdry)

    def green_bulk_solver(self):
        def build():
            m = sp.csc_matrix(self.lumped_bulk[:, None])
            return sp.bmat([[self.K_bulk, m], [m.T, None]], format="csc")
        return self._factor("green_bulk", build)

    def green_bdry_solver(self):
        def build():
            m = sp.csc_matrix(self.lumped_bdry[:, None])
            return sp.bmat([[self.K_bdry, m], [m.T, None]], format="csc")
        return self._factor("green_bdry", build)


class _FactoredMatrix:
    """Sparse LU with iterative refinement to a backward-error target.

    The contractual relative tolerance is measured as the componentwise
    backward error |r_i| / (|A||x| + |b|)_i, which refinement can push to
    rounding level even for ill-scaled meshes.
    """

    def __init__(self, A):
        self.A = A
        self.absA = abs(A)
        self.lu = splu(A)

    def backward_error(self, x, b):
        r = b - self.A @ x
        scale = self.absA @ np.abs(x) + np.abs(b)
        np.maximum(scale, 1e-300, out=scale)
        return float(np.max(np.abs(r) / scale))

    def solve(self, b, what="linear solve"):
        x = self.lu.solve(b)
        for _ in range(4):
            if self.backward_error(x, b) <= LIN_TOL:
                return x
            x = x + self.lu.solve(b - self.A @ x)
        err = self.backward_error(x, b)
        if err > LIN_TOL:
            raise LinSolveFailure("%s: backward error %.3e" % (what, err))
        return x


def assemble(mesh):
    """Element-wise P1 assembly of all four operators.

    Bulk: consistent triangle mass and stiffness.  Boundary: periodic 1-D
    P1 mass and stiffness over the segment lengths of the loop, which
    realizes the arc-length Laplacian of the closed curve.
    """
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if (areas <= 1e-14).any():
        raise DegenerateElement(
            "triangle area %.3e below threshold" % float(areas.min()))

    # gradients of the barycentric basis: grad(lambda_i) = rot(edge_i)/2A
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    grads = np.stack([e0, e1, e2], axis=1)
    grads = np.stack([-grads[:, :, 1], grads[:, :, 0]],
                     axis=2) / (2.0 * areas)[:, None, None]

    nt = mesh.triangles.shape[0]
    rows = np.repeat(mesh.triangles, 3, axis=1).reshape(nt, 3, 3)
    cols = np.tile(mesh.triangles, 3).reshape(nt, 3, 3)

    m_loc = (np.ones((3, 3)) + np.eye(3)) / 12.0
    Me = m_loc[None, :, :] * areas[:, None, None]
    Ke = np.einsum("tid,tjd->tij", grads, grads) * areas[:, None, None]

    n = mesh.n_bulk
    M_bulk = sp.coo_matrix((Me.ravel(), (rows.ravel(), cols.ravel())),
                           shape=(n, n)).tocsr()
    K_bulk = sp.coo_matrix((Ke.ravel(), (rows.ravel(), cols.ravel())),
                           shape=(n, n)).tocsr()

    nb = mesh.n_bdry
    lengths = mesh.boundary_lengths()
    if (lengths <= 1e-14).any():
        raise DegenerateElement("boundary segment of vanishing length")
    left = np.arange(nb)
    right = (left + 1) % nb
    seg_rows = np.stack([left, left, right, right], axis=1)
    seg_cols = np.stack([left, right, left, right], axis=1)
    m_seg = np.stack([lengths / 3.0, lengths / 6.0,
                      lengths / 6.0, lengths / 3.0], axis=1)
    k_seg = np.stack([1.0 / lengths, -1.0 / lengths,
                      -1.0 / lengths, 1.0 / lengths], axis=1)
    M_bdry = sp.coo_matrix((m_seg.ravel(), (seg_rows.ravel(),
                                            seg_cols.ravel())),
                           shape=(nb, nb)).tocsr()
    K_bdry = sp.coo_matrix((k_seg.ravel(), (seg_rows.ravel(),
                                            seg_cols.ravel())),
                           shape=(nb, nb)).tocsr()
    return DiscreteOperators(mesh, M_bulk, K_bulk, M_bdry, K_bdry)


def trace(ops, v):
    """Restrict a bulk vector to the boundary loop."""
    return np.asarray(v)[ops.mesh.boundary_loop]


def scatter_bdry(ops, v_bdry):
    """Adjoint of the trace: place boundary values into a zero bulk vector."""
    out = np.zeros(ops.mesh.n_bulk)
    out[ops.mesh.boundary_loop] = v_bdry
    return out


def mean_bulk(ops, v):
    """Integral mean over the disk."""
    return float(ops.lumped_bulk @ v) / ops.area


def mean_bdry(ops, v_bdry):
    """Integral mean over the boundary curve."""
    return float(ops.lumped_bdry @ v_bdry) / ops.boundary_length


def inv_neumann_shifted(ops, v):
    """Apply the inverse of the mass-shifted Neumann stiffness.

    Solves (M + K) u = M v; constants are fixed points and the mean is
    preserved because the stiffness annihilates constants.
    """
    return ops.shifted_bulk_solver().solve(ops.M_bulk @ v,
                                           "shifted bulk solve")


def inv_shifted_bdry(ops, v_bdry):
    """Boundary analog of :func:`inv_neumann_shifted`."""
    return ops.shifted_bdry_solver().solve(ops.M_bdry @ v_bdry,
                                           "shifted boundary solve")


def _green(ops, v, M, lumped, total, factor, what):
    v = np.asarray(v, dtype=float)
    mean = float(lumped @ v) / total
    if abs(mean) > 1e-10:
        raise NotZeroMean("%s: input mean %.3e exceeds 1e-10" % (what, mean))
    v0 = v - mean
    rhs = np.concatenate([M @ v0, [0.0]])
    x = factor.solve(rhs, what)
    u = x[:-1]
    return u - float(lumped @ u) / total


def green_bulk(ops, v):
    """Discrete zero-mean inverse Neumann Laplacian on the disk.

    Input must have zero mean (within 1e-10).  The constrained solve uses
    a bordered system with the lumped-mass row, then re-projects.
    """
    return _green(ops, v, ops.M_bulk, ops.lumped_bulk,
                  ops.area, ops.green_bulk_solver(), "bulk green solve")


def green_bdry(ops, v_bdry):
    """Discrete zero-mean inverse arc-length Laplacian on the curve."""
    return _green(ops, v_bdry, ops.M_bdry, ops.lumped_bdry,
                  ops.boundary_length, ops.green_bdry_solver(),
                  "boundary green solve")


def dual_norm_bulk(ops, v):
    """Gradient-flow dual norm of the zero-mean part of ``v``.

    The mean is subtracted internally; the norm vanishes exactly on
    constants.
    """
    v = np.asarray(v, dtype=float)
    v0 = v - mean_bulk(ops, v)
    if float(np.abs(v0).max(initial=0.0)) \
            <= 1e-14 * max(1.0, float(np.abs(v).max(initial=0.0))):
        return 0.0
    u = green_bulk(ops, v0)
    return math.sqrt(max(float(u @ (ops.K_bulk @ u)), 0.0))


def dual_norm_bdry(ops, v_bdry):
    """Boundary analog of :func:`dual_norm_bulk`."""
    v = np.asarray(v_bdry, dtype=float)
    v0 = v - mean_bdry(ops, v)
    if float(np.abs(v0).max(initial=0.0)) \
            <= 1e-14 * max(1.0, float(np.abs(v).max(initial=0.0))):
        return 0.0
    u = green_bdry(ops, v0)
    return math.sqrt(max(float(u @ (ops.K_bdry @ u)), 0.0))


def norms_bulk(ops, v):
    """L2 norm, H1 seminorm and full H1 norm of a bulk field."""
    l2sq = float(v @ (ops.M_bulk @ v))
    h1sq = float(v @ (ops.K_bulk @ v))
    return {"l2": math.sqrt(max(l2sq, 0.0)),
            "h1_semi": math.sqrt(max(h1sq, 0.0)),
            "h1": math.sqrt(max(l2sq + h1sq, 0.0))}


def norms_bdry(ops, v_bdry):
    """Boundary analog of :func:`norms_bulk`."""
    l2sq = float(v_bdry @ (ops.M_bdry @ v_bdry))
    h1sq = float(v_bdry @ (ops.K_bdry @ v_bdry))
    return {"l2": math.sqrt(max(l2sq, 0.0)),
            "h1_semi": math.sqrt(max(h1sq, 0.0)),
            "h1": math.sqrt(max(l2sq + h1sq, 0.0))}
