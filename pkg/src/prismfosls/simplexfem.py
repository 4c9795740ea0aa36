"""Least-squares baseline on conforming space-time triangulations.

Both solution components are continuous piecewise P1 on the triangulation
(the scalar one vanishing at lateral-boundary nodes), and the functional is
the same least-squares functional as on prismatic meshes.  Everything is
vectorized over elements in the style of short numpy FEM codes.
"""

import time

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .estimate import doerfler_mark
from .quadrature import gauss_legendre_01, simplex_rule
from .trimesh import refine_nvb

DATA_DEGREE = 10


def _geometry(mesh):
    c = mesh.coordinates[mesh.elements]            # (ne, 3, 2)
    ones = np.ones(c.shape[:2])
    V = np.concatenate([ones[:, :, None], c], axis=2)   # (ne, 3, 3)
    Vinv = np.linalg.inv(V)
    grads = Vinv[:, 1:, :].transpose(0, 2, 1)      # (ne, 3, 2): d/dt, d/dx
    area = 0.5 * np.abs(np.linalg.det(V))
    return c, grads, area


def _bottom_edges(mesh):
    """(element, local i, local j) for edges lying on t = 0."""
    t = mesh.coordinates[mesh.elements][:, :, 0]
    out = []
    for (i, j) in ((0, 1), (1, 2), (2, 0)):
        hit = np.flatnonzero((t[:, i] == 0.0) & (t[:, j] == 0.0))
        for e in hit:
            out.append((e, i, j))
    return out


def free_scalar_nodes(mesh):
    x = mesh.coordinates[:, 1]
    return (x != 0.0) & (x != 1.0)


def assemble_tri(mesh, problem):
    """Free-DoF stiffness matrix and load; returns (A, b, free_mask) where
    free_mask selects the free entries of the stacked [u1; u2] node vector."""
    c, grads, area = _geometry(mesh)
    ne = mesh.n_elements
    nn = mesh.n_nodes
    el = mesh.elements

    gt = grads[:, :, 0]
    gx = grads[:, :, 1]
    D = np.concatenate([gt, gx], axis=1)           # (ne, 6) div row
    A_loc = np.einsum('e,ei,ej->eij', area, D, D)

    # (u2 + dx u1, v2 + dx v1): mass and mixed parts
    M = (np.full((3, 3), 1.0) + np.eye(3)) / 12.0
    A_loc[:, :3, :3] += np.einsum('e,ei,ej->eij', area, gx, gx)
    mixed = np.einsum('e,ei->ei', area / 3.0, gx)
    A_loc[:, :3, 3:] += mixed[:, :, None]
    A_loc[:, 3:, :3] += mixed[:, None, :]
    A_loc[:, 3:, 3:] += area[:, None, None] * M[None]

    idx = np.concatenate([el, nn + el], axis=1)    # (ne, 6)

    # load with elevated data quadrature
    xq, xw = simplex_rule(2, DATA_DEGREE)
    phys = (c[:, 0, None, :]
            + np.einsum('qa,eab->eqb', xq,
                        np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]],
                                 axis=1)))
    flat = phys.reshape(-1, 2)
    f1 = np.asarray(problem.f1(flat), dtype=float).reshape(ne, -1)
    f2 = np.asarray(problem.f2(flat), dtype=float).reshape(ne, -1)
    lam = np.column_stack([1.0 - xq[:, 0] - xq[:, 1], xq[:, 0], xq[:, 1]])
    w2A = 2.0 * area[:, None] * xw[None, :]
    b_loc = np.empty((ne, 6))
    int_f1 = (w2A * f1).sum(axis=1)
    int_f2 = (w2A * f2).sum(axis=1)
    b_loc[:, :3] = int_f1[:, None] * gt - int_f2[:, None] * gx
    b_loc[:, 3:] = (int_f1[:, None] * gx
                    - np.einsum('eq,qi->ei', w2A * f2, lam))

    # initial-time terms
    sq, sw = gauss_legendre_01(6)
    for (e, i, j) in _bottom_edges(mesh):
        xi, xj = c[e, i, 1], c[e, j, 1]
        h = abs(xj - xi)
        Me = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        A_loc[e][np.ix_([i, j], [i, j])] += Me
        xs = xi + sq * (xj - xi)
        u0 = np.asarray(problem.u0(xs[:, None]), dtype=float)
        b_loc[e, i] += h * np.sum(sw * u0 * (1.0 - sq))
        b_loc[e, j] += h * np.sum(sw * u0 * sq)

    rows = np.repeat(idx, 6, axis=1).ravel()
    cols = np.tile(idx, (1, 6)).ravel()
    A = sparse.coo_matrix((A_loc.ravel(), (rows, cols)),
                          shape=(2 * nn, 2 * nn)).tocsr()
    b = np.zeros(2 * nn)
    np.add.at(b, idx.ravel(), b_loc.ravel())

    free = np.concatenate([free_scalar_nodes(mesh), np.ones(nn, dtype=bool)])
    return A[free][:, free].tocsr(), b[free], free


def estimate_tri(mesh, problem, u_all):
    """Squared least-squares indicators per triangle."""
    c, grads, area = _geometry(mesh)
    ne = mesh.n_elements
    nn = mesh.n_nodes
    el = mesh.elements
    u1 = u_all[:nn][el]                            # (ne, 3)
    u2 = u_all[nn:][el]

    gt = grads[:, :, 0]
    gx = grads[:, :, 1]
    div = (u1 * gt).sum(axis=1) + (u2 * gx).sum(axis=1)
    dxu1 = (u1 * gx).sum(axis=1)

    xq, xw = simplex_rule(2, DATA_DEGREE)
    lam = np.column_stack([1.0 - xq[:, 0] - xq[:, 1], xq[:, 0], xq[:, 1]])
    phys = (c[:, 0, None, :]
            + np.einsum('qa,eab->eqb', xq,
                        np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]],
                                 axis=1)))
    flat = phys.reshape(-1, 2)
    f1 = np.asarray(problem.f1(flat), dtype=float).reshape(ne, -1)
    f2 = np.asarray(problem.f2(flat), dtype=float).reshape(ne, -1)
    w2A = 2.0 * area[:, None] * xw[None, :]
    r1 = f1 - div[:, None]
    r2 = f2 + u2 @ lam.T + dxu1[:, None]
    eta2 = (w2A * (r1 * r1 + r2 * r2)).sum(axis=1)

    sq, sw = gauss_legendre_01(6)
    for (e, i, j) in _bottom_edges(mesh):
        xi, xj = c[e, i, 1], c[e, j, 1]
        h = abs(xj - xi)
        xs = xi + sq * (xj - xi)
        u0 = np.asarray(problem.u0(xs[:, None]), dtype=float)
        tr = u1[e, i] * (1.0 - sq) + u1[e, j] * sq
        eta2[e] += h * np.sum(sw * (u0 - tr) ** 2)
    return eta2


def adaptive_loop_tri(mesh, problem, theta=0.5, max_dofs=10000,
                      mode="adaptive", callback=None):
    """Solve-estimate-mark-refine on triangulations; mirrors the prismatic
    driver and returns records with the same keys."""
    records = []
    step = 0
    while True:
        tic = time.perf_counter()
        A, b, free = assemble_tri(mesh, problem)
        x = spsolve(A.tocsc(), b)
        u_all = np.zeros(2 * mesh.n_nodes)
        u_all[free] = x
        eta2 = estimate_tri(mesh, problem, u_all)
        wall = time.perf_counter() - tic
        rec = {
            "step": step,
            "dofs": int(free.sum()),
            "estimator": float(np.sqrt(eta2.sum())),
            "error_u": None,
            "wall_time": wall,
            "n_prisms": mesh.n_elements,
        }
        records.append(rec)
        if callback is not None:
            callback(rec, mesh, u_all, eta2)
        if rec["dofs"] >= max_dofs:
            break
        if mode == "uniform":
            marked = np.arange(mesh.n_elements)
        else:
            marked = doerfler_mark(eta2, theta)
        mesh = refine_nvb(mesh, marked)
        step += 1
    return records, mesh, u_all
