"""Quadratic (P2) Lagrange elements on triangle meshes: assembly, evaluation, recovery."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularSystem
from .mesh import Mesh, unique_edges

# reference-triangle rules: (points (q, 2), weights (q,)) on {xi, eta >= 0, xi + eta <= 1}
TRI_DEG2 = (np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]]), np.full(3, 1 / 6))


def _dunavant5():
    a1, b1, w1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
    a2, b2, w2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
    pts = [(1 / 3, 1 / 3)]
    wts = [0.225]
    for a, b, w in ((a1, b1, w1), (a2, b2, w2)):
        pts += [(b, b), (a, b), (b, a)]
        wts += [w] * 3
    return np.array(pts), 0.5 * np.array(wts)


TRI_DEG5 = _dunavant5()
_gl_x, _gl_w = np.polynomial.legendre.leggauss(3)
EDGE_GAUSS3 = (0.5 * (_gl_x + 1.0), 0.5 * _gl_w)  # on [0, 1]


def p2_basis(ref):
    xi, eta = ref[:, 0], ref[:, 1]
    l1, l2, l3 = 1.0 - xi - eta, xi, eta
    return np.stack([l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), l3 * (2 * l3 - 1),
                     4 * l1 * l2, 4 * l2 * l3, 4 * l3 * l1], axis=1)


def p2_ref_grad(ref):
    """(q, 6, 2) reference gradients."""
    xi, eta = ref[:, 0], ref[:, 1]
    l1, l2, l3 = 1.0 - xi - eta, xi, eta
    z = np.zeros_like(xi)
    dxi = np.stack([-(4 * l1 - 1), 4 * l2 - 1, z, 4 * (l1 - l2), 4 * l3, -4 * l3], axis=1)
    deta = np.stack([-(4 * l1 - 1), z, 4 * l3 - 1, -4 * l2, 4 * l2, 4 * (l1 - l3)], axis=1)
    return np.stack([dxi, deta], axis=2)


def edge_basis(t):
    """1D quadratic basis on [0, 1] for nodes (start, end, midpoint)."""
    return np.stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)], axis=1)


def edge_basis_deriv(t):
    return np.stack([4 * t - 3, 4 * t - 1, 4 - 8 * t], axis=1)


class P2Space:
    """Degrees of freedom: mesh vertices first, then one midpoint per edge.

    Boundary-edge midpoints supplied by the mesh (points on the true curved
    boundary) make the adjacent cells isoparametric; all geometric quantities are
    evaluated per quadrature point.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        tris = mesh.triangles
        edges = unique_edges(tris)
        nv = len(mesh.nodes)
        self.n_vertices = nv
        keys = edges[:, 0].astype(np.int64) * nv + edges[:, 1]

        def mid(a, b):
            k = np.minimum(a, b).astype(np.int64) * nv + np.maximum(a, b)
            return nv + np.searchsorted(keys, k)

        self.cells = np.c_[tris, mid(tris[:, 0], tris[:, 1]), mid(tris[:, 1], tris[:, 2]),
                           mid(tris[:, 2], tris[:, 0])]
        self.nodes = np.r_[mesh.nodes, 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])]
        self.n_dofs = len(self.nodes)
        be = mesh.boundary_edges
        self.boundary_edges = np.c_[be, mid(be[:, 0], be[:, 1])] if len(be) else np.zeros((0, 3), int)
        if getattr(mesh, "boundary_midpoints", None) is not None and len(be):
            self.nodes[self.boundary_edges[:, 2]] = mesh.boundary_midpoints
        self.edge_tags = np.array(mesh.edge_tags, dtype=object)
        p = mesh.nodes[tris]
        self.jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # affine part
        det = np.linalg.det(self.jac)
        if np.any(det <= 0):
            raise SingularSystem("degenerate or inverted triangle")
        self.inv_jac = np.linalg.inv(self.jac)
        chord = 0.5 * (p[:, [0, 1, 2]] + p[:, [1, 2, 0]])
        self.curved = np.any(np.abs(self.nodes[self.cells[:, 3:]] - chord) > 0, axis=(1, 2))
        self._geo = {}
        check = np.r_[TRI_DEG5[0], [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]]
        if np.any(self.geometry(check)[1] <= 0):
            raise SingularSystem("curved cell with non-positive Jacobian")

    # geometry at reference points -----------------------------------------
    def geometry(self, ref):
        """Jacobians (t, q, 2, 2), determinants (t, q) and inverses at reference points."""
        key = np.asarray(ref, float).tobytes()
        if key not in self._geo:
            X = self.nodes[self.cells]
            J = np.einsum("tai,qaj->tqij", X, p2_ref_grad(ref))
            det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
            inv = np.empty_like(J)
            inv[..., 0, 0] = J[..., 1, 1] / det
            inv[..., 1, 1] = J[..., 0, 0] / det
            inv[..., 0, 1] = -J[..., 0, 1] / det
            inv[..., 1, 0] = -J[..., 1, 0] / det
            self._geo[key] = (J, det, inv)
        return self._geo[key]

    def physical_points(self, ref):
        return np.einsum("qa,tai->tqi", p2_basis(ref), self.nodes[self.cells])

    def grads(self, ref):
        """(t, q, 6, 2) physical basis gradients."""
        return np.einsum("qaj,tqji->tqai", p2_ref_grad(ref), self.geometry(ref)[2])

    @property
    def area(self):
        ref, w = TRI_DEG5
        return float(np.einsum("q,tq->", w, self.geometry(ref)[1]))

    # assembly ---------------------------------------------------------------
    @staticmethod
    def _coo(local, dofs):
        rows = np.repeat(dofs[:, :, None], dofs.shape[1], axis=2)
        cols = np.repeat(dofs[:, None, :], dofs.shape[1], axis=1)
        return rows.ravel(), cols.ravel(), local.ravel()

    def _rule(self):
        # curved cells carry rational integrands; the degree-5 rule keeps them accurate
        return TRI_DEG5 if self.curved.any() else TRI_DEG2

    def stiffness(self):
        ref, w = self._rule()
        G = self.grads(ref)
        det = self.geometry(ref)[1]
        local = np.einsum("q,tq,tqai,tqbi->tab", w, det, G, G)
        r, c, v = self._coo(local, self.cells)
        return sp.csr_matrix((v, (r, c)), shape=(self.n_dofs, self.n_dofs))

    def basis_integrals(self):
        ref, w = TRI_DEG5
        local = np.einsum("q,tq,qa->ta", w, self.geometry(ref)[1], p2_basis(ref))
        out = np.zeros(self.n_dofs)
        np.add.at(out, self.cells, local)
        return out

    def elasticity_stiffness(self, lam, mu):
        ref, w = self._rule()
        G = self.grads(ref)  # t q a i
        det = self.geometry(ref)[1]
        t, q = G.shape[:2]
        B = np.zeros((t, q, 3, 12))
        B[:, :, 0, 0::2] = G[..., 0]
        B[:, :, 1, 1::2] = G[..., 1]
        B[:, :, 2, 0::2] = G[..., 1]
        B[:, :, 2, 1::2] = G[..., 0]
        D = np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, mu]])
        local = np.einsum("q,tq,tqki,kl,tqlj->tij", w, det, B, D, B)
        dofs = np.empty((len(self.cells), 12), int)
        dofs[:, 0::2] = 2 * self.cells
        dofs[:, 1::2] = 2 * self.cells + 1
        r, c, v = self._coo(local, dofs)
        n = 2 * self.n_dofs
        return sp.csr_matrix((v, (r, c)), shape=(n, n))

    def source_vector(self, f, ncomp=1):
        """Load vector of int f N_i dx; ``f(points) -> (n,) or (n, ncomp)``."""
        ref, w = TRI_DEG5
        N = p2_basis(ref)
        pts = self.physical_points(ref)
        vals = np.asarray(f(pts.reshape(-1, 2)), float).reshape(len(self.cells), len(w), ncomp)
        local = np.einsum("q,tq,qa,tqc->tac", w, self.geometry(ref)[1], N, vals)
        out = np.zeros((self.n_dofs, ncomp))
        np.add.at(out, self.cells, local)
        return out[:, 0] if ncomp == 1 else out

    def edge_quadrature(self, mask=None):
        """Gauss data on (possibly curved) boundary edges.

        Returns edge dofs (e, 3), points (e, q, 2), outward normals (e, q, 2) and
        line elements |dx/dt| (e, q) for the parameter t in [0, 1]."""
        be = self.boundary_edges if mask is None else self.boundary_edges[mask]
        X = self.nodes[be]  # start, end, midpoint
        t, _ = EDGE_GAUSS3
        pts = np.einsum("qa,eai->eqi", edge_basis(t), X)
        tan = np.einsum("qa,eai->eqi", edge_basis_deriv(t), X)
        ds = np.linalg.norm(tan, axis=2)
        normal = np.stack([tan[..., 1], -tan[..., 0]], axis=2) / ds[..., None]
        # orient outward: the owning triangle's third vertex lies on the inner side
        owner = self._edge_owner_opposite(be)
        chord_n = np.c_[X[:, 1, 1] - X[:, 0, 1], X[:, 0, 0] - X[:, 1, 0]]
        flip = np.einsum("ij,ij->i", self.nodes[owner] - X[:, 0], chord_n) > 0
        normal[flip] *= -1
        return be, pts, normal, ds

    def _edge_owner_opposite(self, be):
        tris = self.mesh.triangles
        nv = self.n_vertices
        loc = np.r_[tris[:, [0, 1, 2]], tris[:, [1, 2, 0]], tris[:, [2, 0, 1]]]
        keys = np.minimum(loc[:, 0], loc[:, 1]).astype(np.int64) * nv + np.maximum(loc[:, 0], loc[:, 1])
        order = np.argsort(keys)
        want = np.minimum(be[:, 0], be[:, 1]).astype(np.int64) * nv + np.maximum(be[:, 0], be[:, 1])
        pos = np.searchsorted(keys[order], want)
        return loc[order[pos], 2]

    def neumann_vector(self, values, be, ds, ncomp=1):
        """int g N_i ds for edge Gauss-point values ``values`` (e, q[, ncomp])."""
        t, w = EDGE_GAUSS3
        vals = np.asarray(values, float).reshape(len(be), len(w), ncomp)
        local = np.einsum("q,eq,qa,eqc->eac", w, ds, edge_basis(t), vals)
        out = np.zeros((self.n_dofs, ncomp))
        np.add.at(out, be, local)
        return out[:, 0] if ncomp == 1 else out

    def boundary_integral(self, values, ds):
        _, w = EDGE_GAUSS3
        return float(np.einsum("q,eq,eq->", w, ds, values))

    # evaluation ---------------------------------------------------------------
    def _newton(self, cell, p, ref, steps=8):
        X = self.nodes[self.cells[cell]]
        for _ in range(steps):
            r = ref[None, :]
            x = p2_basis(r)[0] @ X
            J = X.T @ p2_ref_grad(r)[0]
            d = np.linalg.solve(J, p - x)
            ref = ref + d
            if np.abs(d).max() < 1e-15:
                break
        return ref

    def locate(self, pts, tol=1e-10):
        """Containing cell and reference coordinates for each point."""
        pts = np.atleast_2d(np.asarray(pts, float))
        v0 = self.mesh.nodes[self.mesh.triangles[:, 0]]
        cells = np.empty(len(pts), int)
        refs = np.empty((len(pts), 2))

        def score(r):
            return min(r[0], r[1], 1.0 - r[0] - r[1])

        for i, p in enumerate(pts):
            ref = np.einsum("tij,tj->ti", self.inv_jac, p - v0)
            sc = np.minimum(np.minimum(ref[:, 0], ref[:, 1]), 1.0 - ref.sum(axis=1))
            order = np.argsort(-sc)[:4]
            best, best_ref, best_sc = order[0], ref[order[0]], -np.inf
            for k in order:
                r = self._newton(k, p, ref[k]) if self.curved[k] else ref[k]
                s_ = score(r)
                if s_ > best_sc:
                    best, best_ref, best_sc = k, r, s_
                if s_ >= -tol:
                    break
            if best_sc < -max(tol, 1e-8):
                raise ValueError(f"point {p} lies outside the mesh")
            cells[i] = best
            refs[i] = best_ref
        return cells, refs

    def evaluate(self, values, pts):
        cells, refs = self.locate(pts)
        N = p2_basis(refs)
        v = np.asarray(values)[self.cells[cells]]
        return np.einsum("pa,pa...->p...", N, v)

    def sample_gradients(self, values, ref):
        """Gradient of a nodal P2 field at reference points of every cell: (t, q, ..., 2)."""
        G = self.grads(ref)
        v = np.asarray(values)[self.cells]
        return np.einsum("tqai,ta...->tq...i", G, v)


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal P2 function (scalar: values (n,), vector: (n, 2), tensor: (n, 2, 2), ...)."""

    space: P2Space
    values: np.ndarray

    dim = 2

    def __call__(self, pts):
        return self.space.evaluate(self.values, pts)


def solve_sparse(A, b, rel_tol=1e-10, refine_steps=3):
    """Direct sparse solve with iterative refinement; raises SingularSystem on failure."""
    A = sp.csc_matrix(A)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            lu = spla.splu(A)
    except (RuntimeError, spla.MatrixRankWarning) as exc:
        raise SingularSystem(str(exc)) from exc
    x = lu.solve(b)
    bn = np.linalg.norm(b)
    if bn == 0:
        return x, 0.0
    res = np.linalg.norm(A @ x - b) / bn
    for _ in range(refine_steps):
        if res <= rel_tol:
            break
        x = x + lu.solve(b - A @ x)
        res = np.linalg.norm(A @ x - b) / bn
    if not np.all(np.isfinite(x)) or res > rel_tol:
        raise SingularSystem(f"relative residual {res:.3e} above tolerance {rel_tol:.1e}")
    return x, res


class PatchRecovery:
    """Superconvergent patch recovery as a sparse operator.

    Gradients sampled at the three interior Gauss points of each cell are fitted
    by a complete quadratic over a vertex patch (one ring of cells; two rings for
    boundary vertices, vertices of curved cells or undersized patches).  Curved
    cells only enter a fit when the patch has too few straight ones.  Vertex values
    come from their own patch; midpoint values average the fits of the two end
    vertices.  Fields whose gradient is at most quadratic are recovered exactly.
    """

    sample_rule = TRI_DEG2
    max_cond = 1e14  # on the normal matrix of the scaled fit

    def __init__(self, space: P2Space):
        self.space = space
        mesh = space.mesh
        tris = mesh.triangles
        nv, nt = space.n_vertices, len(tris)
        ref, _ = self.sample_rule
        nq = len(ref)
        self.samples = samples = space.physical_points(ref).reshape(-1, 2)
        inc = sp.csr_matrix((np.ones(3 * nt), (tris.ravel(), np.repeat(np.arange(nt), 3))),
                            shape=(nv, nt))
        ring2 = ((inc @ inc.T) @ inc).astype(bool).astype(np.int8).tocsr()
        on_bnd = np.zeros(nv, bool)
        on_bnd[mesh.boundary_edges.ravel()] = True
        wide = on_bnd | (np.diff(inc.indptr) < 4)
        if space.curved.any():  # vertices of curved cells need straight cells beyond them
            wide |= (inc @ space.curved.astype(float)) > 0
        patch = sp.diags(wide.astype(float)) @ ring2 + sp.diags((~wide).astype(float)) @ inc
        patch = sp.csr_matrix(patch)
        patch.eliminate_zeros()
        v_of, t_of = self._pairs(patch)
        v_of, t_of = self._prefer_straight(v_of, t_of, space.curved, nv)
        W, scale, v_of, s_of, P = self._fit(v_of, t_of, nq, nv)
        # coefficient operators C_k: sample values -> k-th polynomial coefficient at vertex
        Q = np.einsum("pkl,pl->pk", W[v_of], P)
        C = [sp.csr_matrix((Q[:, k], (v_of, s_of)), shape=(nv, len(samples))) for k in range(6)]
        edges = unique_edges(tris)
        mids = space.nodes[nv:]
        ne = len(edges)
        rows = C[0]
        blocks = sp.csr_matrix((ne, len(samples)))
        for end in (0, 1):
            v = edges[:, end]
            Pm, _ = self._poly(mids, mesh.nodes[v], scale[v])
            sel = sp.csr_matrix((np.ones(ne), (np.arange(ne), v)), shape=(ne, nv))
            for k in range(6):
                blocks = blocks + sp.diags(0.5 * Pm[:, k]) @ sel @ C[k]
        self.operator = sp.vstack([rows, blocks]).tocsr()

    @staticmethod
    def _prefer_straight(v_of, t_of, curved, nv, min_cells=4):
        """Drop curved cells from patches that keep enough straight ones: the
        isoparametric interpolant is not exact for physical quadratics there."""
        if not curved.any():
            return v_of, t_of
        straight = ~curved[t_of]
        n_straight = np.bincount(v_of[straight], minlength=nv)
        keep = straight | (n_straight[v_of] < min_cells)
        return v_of[keep], t_of[keep]

    @staticmethod
    def _pairs(patch):
        coo = patch.tocoo()
        return coo.row.astype(int), coo.col.astype(int)

    def _fit(self, v_of, t_of, nq, nv):
        """Batched least-squares normal matrices; ill-conditioned patches grow a ring."""
        nodes = self.space.mesh.nodes
        tris = self.space.mesh.triangles
        for _ in range(4):
            v_s = np.repeat(v_of, nq)
            s_of = (t_of[:, None] * nq + np.arange(nq)).ravel()
            d = np.abs(self.samples[s_of] - nodes[v_s]).max(axis=1)
            scale = np.zeros(nv)
            np.maximum.at(scale, v_s, d)
            P, _ = self._poly(self.samples[s_of], nodes[v_s], scale[v_s])
            M = np.zeros((nv, 6, 6))
            np.add.at(M, v_s, P[:, :, None] * P[:, None, :])
            bad = np.linalg.cond(M) > self.max_cond
            if not bad.any():
                return np.linalg.inv(M), scale, v_s, s_of, P
            # grow the patch of the offending vertices by one ring
            grow_v, grow_t = [], []
            cell_sets = {}
            for v in np.flatnonzero(bad):
                cells = set(t_of[v_of == v])
                verts = set(tris[list(cells)].ravel())
                cell_sets[v] = {t for t in range(len(tris)) if verts & set(tris[t])}
            keep = ~np.isin(v_of, np.flatnonzero(bad))
            for v, cells in cell_sets.items():
                grow_v += [v] * len(cells)
                grow_t += sorted(cells)
            v_of = np.r_[v_of[keep], np.array(grow_v, int)]
            t_of = np.r_[t_of[keep], np.array(grow_t, int)]
        raise SingularSystem("patch recovery: degenerate vertex patch")

    @staticmethod
    def _poly(pts, origin, scale):
        d = pts - origin
        s = np.asarray(scale, float)
        x, y = d[:, 0] / s, d[:, 1] / s
        return np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], axis=1), s

    def recover_gradient(self, values):
        """Nodal gradient of a P2 field; output shape values.shape[1:] + (2,) per node."""
        ref, _ = self.sample_rule
        g = self.space.sample_gradients(values, ref)  # t q ... 2
        flat = g.reshape(g.shape[0] * g.shape[1], -1)
        out = self.operator @ flat
        return out.reshape((self.space.n_dofs,) + g.shape[2:])
