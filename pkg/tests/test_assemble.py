"""Assembly, solve and matrix dump checks."""

import numpy as np
import pytest

from prismfosls.assemble import (FieldData, assemble, dump_matrix, solve)
from prismfosls.estimate import estimate
from prismfosls.mesh import initial_prism_mesh, refine, uniform_refine
from prismfosls.problems import get_problem
from prismfosls.space import DiscreteField, build_space


@pytest.mark.parametrize("dim", [1, 2])
def test_matrix_symmetric_positive_definite(dim):
    mesh = uniform_refine(uniform_refine(initial_prism_mesh(dim, 1.0)))
    space = build_space(mesh)
    prob = get_problem("1d-smooth" if dim == 1 else "2d-nonmatching")
    A, b = assemble(space, prob)
    asym = abs(A - A.T).max()
    assert asym <= 1e-12 * abs(A).max()
    lam = np.linalg.eigvalsh(A.toarray())
    assert lam.min() > 0


@pytest.mark.parametrize("dim", [1, 2])
def test_solution_reproduces_discrete_field(dim):
    """With data generated from a discrete field, the Galerkin solution
    is that field (the least-squares functional has an exact minimizer
    in the space)."""
    rng = np.random.default_rng(31)
    mesh = uniform_refine(initial_prism_mesh(dim, 1.0))
    mesh = refine(mesh, mesh.ids()[:2])
    space = build_space(mesh)
    w = DiscreteField(space, rng.standard_normal(space.n_free))
    data = FieldData(w)
    A, b = assemble(space, data)
    x = solve(A, b, method="direct")
    assert np.linalg.norm(x - w.free) <= 1e-9 * np.linalg.norm(w.free)
    eta2 = estimate(space, DiscreteField(space, x), data)
    assert np.sqrt(eta2.sum()) <= 1e-9 * np.linalg.norm(w.free)


def test_direct_and_amg_agree_on_small_system():
    mesh = uniform_refine(uniform_refine(initial_prism_mesh(1, 1.0)))
    space = build_space(mesh)
    prob = get_problem("1d-smooth")
    A, b = assemble(space, prob)
    xd = solve(A, b, method="direct")
    xa = solve(A, b, method="amg", tol=1e-12)
    assert np.linalg.norm(xa - xd) <= 1e-6 * np.linalg.norm(xd)


def test_dump_matrix_roundtrip(tmp_path):
    mesh = uniform_refine(initial_prism_mesh(1, 1.0))
    space = build_space(mesh)
    A, _ = assemble(space, get_problem("1d-smooth"))
    path = tmp_path / "A.txt"
    dump_matrix(A, path)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split()
    assert header[0] == "%"
    n, m, nnz = int(header[1]), int(header[2]), int(header[3])
    assert (n, m) == A.shape
    B = np.zeros(A.shape)
    for line in lines[1:]:
        r, c, v = line.split()
        B[int(r), int(c)] += float(v)
    assert np.allclose(B, A.toarray(), atol=1e-14)
    assert nnz == len(lines) - 1
