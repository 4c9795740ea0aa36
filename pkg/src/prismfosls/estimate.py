"""Least-squares error estimation, Doerfler marking and the adaptive loop.

The indicator of a prism is the local least-squares functional of the
computed solution,

    eta(P)^2 = ||f1 - dt v1 - div_x v2||^2_{L2(P)}
             + ||f2 + v2 + grad_x v1||^2_{L2(P)}
             + ||u0 - v1(0,.)||^2_{L2(K)}          (only if P starts at t=0),

so the squared indicators sum exactly to the squared global estimator.
"""

import time

import numpy as np

from . import assemble as _asm
from .assemble import DATA_DEGREE, assemble, solve
from .mesh import refine
from .quadrature import prism_rule, simplex_rule
from .space import DiscreteField, build_space


def estimate(space, field, problem):
    """Squared local least-squares indicators, one per cell (in cell order)."""
    mesh = space.mesh
    d = mesh.dim
    groups = _asm._group_cells(space)
    eta2 = np.zeros(len(space.cells))
    pos = {c.pid: i for i, c in enumerate(space.cells)}

    xq0, xw0 = simplex_rule(d, DATA_DEGREE)
    ref0 = np.column_stack([np.zeros(len(xq0)), xq0])

    for key in sorted(groups):
        g = groups[key]
        el = g.element
        ref, w, D, W = _asm._basis_arrays(el, DATA_DEGREE)
        scale = el.ht * abs(el.detB)
        pts = _asm._phys_points(g, ref)
        flat = pts.reshape(-1, 1 + d)
        nc, nq = len(g.cells), len(ref)
        f1 = np.asarray(problem.f1(flat), dtype=float).reshape(nc, nq)
        f2 = np.asarray(problem.f2(flat), dtype=float).reshape(nc, nq, d)

        n1 = el.shape.n1
        nloc = n1 + el.shape.n2
        cphi = np.empty((nc, nloc))
        for i, cell in enumerate(g.cells):
            c1, c2 = field.cell_coeffs(cell)
            cphi[i, :n1] = c1
            cphi[i, n1:] = c2

        r1 = f1 - cphi @ D.T
        r2 = f2 + np.einsum('ci,qid->cqd', cphi, W)
        loc = np.einsum('cq,q->c', r1 * r1, w * scale)
        loc += np.einsum('cqd,q->c', r2 * r2, w * scale)

        initial = g.t0s == 0.0
        if np.any(initial):
            V0 = el.u1_values_ref(ref0)
            x0 = g.v0s[initial][:, None, :] + (xq0 @ el.B.T)[None, :, :]
            u0 = np.asarray(problem.u0(x0.reshape(-1, d)),
                            dtype=float).reshape(-1, len(xq0))
            tr = cphi[initial, :n1] @ V0.T
            loc[initial] += np.einsum('cq,q->c', (u0 - tr) ** 2,
                                      xw0 * abs(el.detB))
        for i, cell in enumerate(g.cells):
            eta2[pos[cell.pid]] = loc[i]
    return eta2


def scalar_l2_error(space, field, exact, degree=DATA_DEGREE):
    """L2(Q) error of the scalar component against a callable."""
    mesh = space.mesh
    d = mesh.dim
    groups = _asm._group_cells(space)
    err2 = 0.0
    for key in sorted(groups):
        g = groups[key]
        el = g.element
        ref, w = prism_rule(d, degree, degree)
        V = el.u1_values_ref(ref)
        scale = el.ht * abs(el.detB)
        pts = _asm._phys_points(g, ref)
        flat = pts.reshape(-1, 1 + d)
        ex = np.asarray(exact(flat), dtype=float).reshape(len(g.cells),
                                                          len(ref))
        n1 = el.shape.n1
        c1 = np.array([field.cell_coeffs(c)[0] for c in g.cells])
        vh = c1 @ V.T
        err2 += float(np.einsum('cq,q->', (ex - vh) ** 2, w * scale))
    return np.sqrt(err2)


def doerfler_mark(eta2, theta, ids=None):
    """Smallest set of cells whose squared indicators sum to at least
    theta times the total.

    Ties in the indicator are broken by position (ascending), which makes
    the selection deterministic; the returned ids are those of a minimal
    cardinality set.
    """
    eta2 = np.asarray(eta2, dtype=float)
    if not 0.0 < theta <= 1.0:
        raise ValueError("marking parameter must be in (0, 1]")
    order = np.lexsort((np.arange(len(eta2)), -eta2))
    target = theta * eta2.sum()
    acc = 0.0
    chosen = []
    for i in order:
        if acc >= target and chosen:
            break
        chosen.append(i)
        acc += eta2[i]
    if ids is None:
        return sorted(chosen)
    ids = list(ids)
    return sorted(ids[i] for i in chosen)


def fit_rate(dofs, eta):
    """Least-squares slope of log(eta) against log(dofs), negated."""
    dofs = np.asarray(dofs, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if len(dofs) < 2:
        raise ValueError("need at least two samples")
    s = np.polyfit(np.log(dofs), np.log(eta), 1)[0]
    return -s


def adaptive_loop(mesh, problem, theta=0.5, max_dofs=10000, mode="adaptive",
                  exact=None, solver="auto", callback=None):
    """Run solve-estimate-mark-refine until the DoF budget is reached.

    Returns (records, mesh, last_field) with one record per step:
    dict(step, dofs, estimator, error_u (or None), wall_time, n_prisms).
    The loop stops after the first step whose DoF count meets the budget.
    """
    records = []
    field = None
    step = 0
    while True:
        tic = time.perf_counter()
        space = build_space(mesh)
        A, b = assemble(space, problem)
        x = solve(A, b, method=solver, dim=mesh.dim)
        field = DiscreteField(space, x)
        eta2 = estimate(space, field, problem)
        wall = time.perf_counter() - tic
        rec = {
            "step": step,
            "dofs": space.n_free,
            "estimator": float(np.sqrt(eta2.sum())),
            "error_u": (scalar_l2_error(space, field, exact)
                        if exact is not None else None),
            "wall_time": wall,
            "n_prisms": len(mesh),
        }
        records.append(rec)
        if callback is not None:
            callback(rec, space, field, eta2)
        if space.n_free >= max_dofs:
            break
        if mode == "uniform":
            marked = mesh.ids()
        else:
            ids = [c.pid for c in space.cells]
            marked = doerfler_mark(eta2, theta, ids=ids)
        mesh = refine(mesh, marked)
        step += 1
    return records, mesh, field
