"""Assembly and solution of the least-squares system.

The bilinear form is

    a(u, v) = (div u, div v)_{L2(Q)} + (u2 + grad_x u1, v2 + grad_x v1)_{L2(Q)}
              + (u1(0,.), v1(0,.))_{L2(Omega)},

with div the space-time divergence dt u1 + div_x u2, and the load

    b(v) = (f1, div v) - (f2, v2 + grad_x v1) + (u0, v1(0,.))_{L2(Omega)}.

Local matrices depend on a prism only through its time-interval length and
spatial Jacobian, so they are computed once per congruence class and scattered
for whole groups of prisms at a time.  The constrained system is
C^T A_hat C with the constraint map C of the space.
"""

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .quadrature import prism_rule, simplex_rule

#: tensor quadrature degree (per direction) for the bilinear form; the
#: integrands are polynomial of degree at most 4 per direction
MATRIX_DEGREE = 6
#: elevated degree for integrals involving problem data
DATA_DEGREE = 10


class _Group:
    """Prisms sharing time-interval length and spatial Jacobian."""

    __slots__ = ("element", "cells", "t0s", "v0s", "initial")

    def __init__(self, element):
        self.element = element
        self.cells = []
        self.t0s = []
        self.v0s = []

    def finalize(self):
        self.t0s = np.array(self.t0s)
        self.v0s = np.array(self.v0s)


def _group_cells(space):
    mesh = space.mesh
    groups = {}
    for cell in space.cells:
        el = cell.element
        key = (el.ht, el.B.tobytes())
        g = groups.get(key)
        if g is None:
            g = groups[key] = _Group(el)
        g.cells.append(cell)
        g.t0s.append(el.t0)
        g.v0s.append(el.v0)
    for g in groups.values():
        g.finalize()
    return groups


def _basis_arrays(element, degree):
    """Reference-rule points plus divergence/vector rows of the full local
    basis (scalar block first, flux block second)."""
    d = element.shape.d
    ref, w = prism_rule(d, degree, degree)
    D = np.hstack([element.u1_dt_ref(ref), element.u2_div_ref(ref)])
    n1 = element.shape.n1
    nloc = n1 + element.shape.n2
    W = np.empty((len(ref), nloc, d))
    W[:, :n1, :] = element.u1_grad_ref(ref)
    W[:, n1:, :] = element.u2_values_ref(ref)
    return ref, w, D, W


def _phys_points(group, ref):
    """Physical quadrature points for every cell of a group,
    shape (ncell, nq, 1+d)."""
    el = group.element
    nq = len(ref)
    nc = len(group.cells)
    pts = np.empty((nc, nq, 1 + el.shape.d))
    pts[:, :, 0] = group.t0s[:, None] + el.ht * ref[None, :, 0]
    xref = ref[:, 1:] @ el.B.T
    pts[:, :, 1:] = group.v0s[:, None, :] + xref[None, :, :]
    return pts


def _local_matrix(element, at_initial_time):
    ref, w, D, W = _basis_arrays(element, MATRIX_DEGREE)
    scale = element.ht * abs(element.detB)
    A = (D.T * (w * scale)) @ D
    A += np.einsum('q,qid,qjd->ij', w * scale, W, W)
    if at_initial_time:
        A += _initial_matrix(element)
    return A

def _initial_matrix(element):
    d = element.shape.d
    xq, xw = simplex_rule(d, MATRIX_DEGREE)
    ref = np.column_stack([np.zeros(len(xq)), xq])
    V = element.u1_values_ref(ref)
    n1 = element.shape.n1
    nloc = n1 + element.shape.n2
    A = np.zeros((nloc, nloc))
    A[:n1, :n1] = (V.T * (xw * abs(element.detB))) @ V
    return A


def _to_dual(cell, A):
    """Transform a local matrix from the Piola basis to the facet-moment dual
    basis of the flux block."""
    n1 = cell.element.shape.n1
    T = np.eye(A.shape[0])
    T[n1:, n1:] = cell.ginv
    return T.T @ A @ T


def assemble(space, problem):
    """Stiffness matrix and load vector on the free DoFs.

    `problem` provides vectorized callables f1(pts), f2(pts), u0(xpts).
    """
    mesh = space.mesh
    d = mesh.dim
    groups = _group_cells(space)
    n_all = space.n_all
    b_all = np.zeros(n_all)
    rows, cols, vals = [], [], []

    xq0, xw0 = simplex_rule(d, DATA_DEGREE)
    ref0 = np.column_stack([np.zeros(len(xq0)), xq0])

    for key in sorted(groups):
        g = groups[key]
        el = g.element
        A_vol = _local_matrix(el, at_initial_time=False)
        A_ini = _initial_matrix(el)
        n1 = el.shape.n1

        # data-degree basis arrays for the load
        ref, w, D, W = _basis_arrays(el, DATA_DEGREE)
        scale = el.ht * abs(el.detB)
        pts = _phys_points(g, ref)
        flat = pts.reshape(-1, 1 + d)
        f1 = np.asarray(problem.f1(flat), dtype=float).reshape(len(g.cells),
                                                               len(ref))
        f2 = np.asarray(problem.f2(flat), dtype=float).reshape(
            len(g.cells), len(ref), d)
        b_loc = np.einsum('cq,q,qi->ci', f1, w * scale, D)
        b_loc -= np.einsum('cqd,q,qid->ci', f2, w * scale, W)

        V0 = el.u1_values_ref(ref0)
        x0 = g.v0s[:, None, :] + (xq0 @ el.B.T)[None, :, :]
        initial = g.t0s == 0.0
        if np.any(initial):
            u0 = np.asarray(problem.u0(x0[initial].reshape(-1, d)),
                            dtype=float).reshape(-1, len(xq0))
            binit = np.einsum('cq,q,qi->ci', u0, xw0 * abs(el.detB), V0)

        Ad = {}
        ii = 0
        for c_idx, cell in enumerate(g.cells):
            isinit = bool(initial[c_idx])
            A = Ad.get(isinit)
            if A is None:
                A = _to_dual(cell, A_vol + (A_ini if isinit else 0.0))
                Ad[isinit] = A
            idx = np.concatenate([cell.u1_all, cell.u2_all])
            rows.append(np.repeat(idx, len(idx)))
            cols.append(np.tile(idx, len(idx)))
            vals.append(A.ravel())
            bl = b_loc[c_idx].copy()
            if isinit:
                bl[:n1] += binit[ii]
                ii += 1
            T = np.eye(len(idx))
            T[n1:, n1:] = cell.ginv
            np.add.at(b_all, idx, T.T @ bl)

    A_all = sparse.coo_matrix(
        (np.concatenate(vals),
         (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_all, n_all)).tocsr()
    C = space.C
    A = (C.T @ A_all @ C).tocsr()
    b = C.T @ b_all
    return A, b


def solve(A, b, method="auto", tol=1e-10, dim=None):
    """Solve the SPD least-squares system.

    'direct' uses a sparse LU factorization; 'amg' uses conjugate gradients
    preconditioned by smoothed aggregation.  'auto' switches to AMG for
    systems too large to factor cheaply; with three-dimensional connectivity
    (dim = 2) the fill-in of a factorization grows much faster, so the
    switch happens much earlier.
    """
    n = A.shape[0]
    if method == "auto":
        limit = 30000 if dim == 2 else 120000
        method = "amg" if n > limit else "direct"
    if method == "direct":
        return spsolve(A.tocsc(), b)
    if method == "amg":
        import pyamg
        ml = pyamg.smoothed_aggregation_solver(A.tocsr(), max_coarse=500)
        x = ml.solve(b, tol=tol, accel="cg", maxiter=1000)
        return x
    raise ValueError(f"unknown method {method!r}")


def apply_G_local(cell, c1, c2, pts):
    """The first-order operator applied to a local field at physical points.

    Returns (dt u1 + div_x u2, -u2 - grad_x u1) with c2 in the Piola basis.
    """
    el = cell.element
    ref = el.to_ref(pts)
    g1 = el.u1_dt_ref(ref) @ c1 + el.u2_div_ref(ref) @ c2
    g2 = -np.einsum('pjd,j->pd', el.u2_values_ref(ref), c2)
    g2 -= np.einsum('pid,i->pd', el.u1_grad_ref(ref), c1)
    return g1, g2


class FieldData:
    """Problem-style data (f1, f2, u0) given by the first-order operator
    applied to a discrete field, evaluated through point location.

    Useful for consistency checks: with this right-hand side the exact
    minimizer of the least-squares functional is the field itself and the
    estimator vanishes.
    """

    def __init__(self, field):
        self.field = field
        self.space = field.space
        self.T = self.space.mesh.T
        self._coeffs = [field.cell_coeffs(c) for c in self.space.cells]

    def _locate_eval(self, pts, what):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = self.space.mesh.dim
        n = len(pts)
        out = np.zeros(n if what == "f1" else (n, d))
        todo = np.ones(n, dtype=bool)
        eps = 1e-10
        for cell, (c1, c2) in zip(self.space.cells, self._coeffs):
            if not todo.any():
                break
            idx = np.flatnonzero(todo)
            ref = cell.element.to_ref(pts[idx])
            inside = (ref[:, 0] >= -eps) & (ref[:, 0] <= 1 + eps)
            for ax in range(1, 1 + d):
                inside &= ref[:, ax] >= -eps
            if d == 1:
                inside &= ref[:, 1] <= 1 + eps
            else:
                inside &= ref[:, 1] + ref[:, 2] <= 1 + eps
            if not inside.any():
                continue
            sub = idx[inside]
            g1, g2 = apply_G_local(cell, c1, c2, pts[sub])
            if what == "f1":
                out[sub] = g1
            else:
                out[sub] = g2
            todo[sub] = False
        if todo.any():
            raise RuntimeError("point location failed for some points")
        return out

    def f1(self, pts):
        return self._locate_eval(pts, "f1")

    def f2(self, pts):
        return self._locate_eval(pts, "f2")

    def u0(self, xpts):
        xpts = np.atleast_2d(np.asarray(xpts, dtype=float))
        pts = np.column_stack([np.zeros(len(xpts)), xpts])
        d = self.space.mesh.dim
        out = np.zeros(len(pts))
        todo = np.ones(len(pts), dtype=bool)
        eps = 1e-10
        for cell, (c1, c2) in zip(self.space.cells, self._coeffs):
            if cell.element.t0 != 0.0:
                continue
            if not todo.any():
                break
            idx = np.flatnonzero(todo)
            ref = cell.element.to_ref(pts[idx])
            inside = np.ones(len(idx), dtype=bool)
            for ax in range(1, 1 + d):
                inside &= ref[:, ax] >= -eps
            if d == 1:
                inside &= ref[:, 1] <= 1 + eps
            else:
                inside &= ref[:, 1] + ref[:, 2] <= 1 + eps
            if not inside.any():
                continue
            sub = idx[inside]
            ref_sub = cell.element.to_ref(pts[sub])
            ref_sub[:, 0] = 0.0
            out[sub] = cell.element.u1_values_ref(ref_sub) @ c1
            todo[sub] = False
        if todo.any():
            raise RuntimeError("point location failed at the initial time")
        return out


def dump_matrix(A, path):
    """Write a sparse matrix as 'row col value' lines (0-based indices)."""
    A = A.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"% {A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for r, c, v in zip(A.row, A.col, A.data):
            fh.write(f"{r} {c} {v:.17g}\n")
