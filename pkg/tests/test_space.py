"""Global space construction: DoF counts, constraints, conformity."""

import numpy as np
import pytest

from prismfosls.mesh import initial_prism_mesh, refine, uniform_refine
from prismfosls.space import (DiscreteField, build_space, facet_jump_norms,
                              interp_onto_space)


def test_dof_count_uniform_1d():
    """Independent combinatorial count on the 2x2 prism mesh: a 3x3 node
    grid with the x in {0,1} columns fixed gives 3 free scalar nodes; the
    flux has one moment per lateral facet (3 x-positions times 2 time
    slabs) plus one interior moment per prism."""
    mesh = uniform_refine(initial_prism_mesh(1, 1.0))
    space = build_space(mesh)
    free_u1 = 3
    flux = 3 * 2 + 4
    assert space.n_free == free_u1 + flux == 13


def test_dof_count_uniform_2d():
    """On the once-refined 2-prism mesh: nodes live on a 3x3 spatial grid
    at 3 time levels, the 8 boundary columns are fixed, so 3 free scalar
    nodes; flux DoFs are 2 moments per lateral facet plus 4 interior
    moments per prism."""
    mesh = uniform_refine(initial_prism_mesh(2, 1.0))
    space = build_space(mesh)
    free_u1 = 1 * 3
    n_lateral = 16 * 2   # 16 distinct spatial edges, 2 time slabs
    flux = 2 * n_lateral + 2 * len(mesh)
    assert space.n_free == free_u1 + flux


def test_constraint_map_shape_and_identity_rows():
    base = uniform_refine(initial_prism_mesh(1, 1.0))
    mesh = refine(base, [base.ids()[0]])
    space = build_space(mesh)
    C = space.C.toarray()
    assert C.shape == (space.n_all, space.n_free)
    # free rows are unit vectors
    for a in np.flatnonzero(space.free_of_all >= 0):
        row = C[a]
        assert row[space.free_of_all[a]] == 1.0
        assert np.count_nonzero(row) == 1


@pytest.mark.parametrize("dim", [1, 2])
def test_interpolant_is_conforming_on_hanging_mesh(dim):
    rng = np.random.default_rng(23)
    mesh = uniform_refine(initial_prism_mesh(dim, 1.0))
    mesh = refine(mesh, mesh.ids()[:2])
    space = build_space(mesh)

    def v1(pts):
        return np.sin(pts[:, 0] + pts[:, 1:].sum(axis=1))

    def v2(pts):
        out = np.empty((len(pts), dim))
        for i in range(dim):
            out[:, i] = np.cos((i + 1) * pts[:, 0]) * pts[:, 1 + i]
        return out

    field = interp_onto_space(space, v1, v2)
    jumps = facet_jump_norms(space, field)
    norm = np.linalg.norm(field.free)
    assert jumps["u1"] <= 1e-10 * norm
    assert jumps["u2_normal"] <= 1e-10 * norm


@pytest.mark.parametrize("dim", [1, 2])
def test_random_fields_are_conforming(dim):
    """Arbitrary free coefficient vectors define conforming functions."""
    rng = np.random.default_rng(7)
    mesh = uniform_refine(initial_prism_mesh(dim, 1.0))
    mesh = refine(mesh, mesh.ids()[::3])
    space = build_space(mesh)
    for _ in range(5):
        free = rng.standard_normal(space.n_free)
        field = DiscreteField(space, free)
        jumps = facet_jump_norms(space, field)
        norm = np.linalg.norm(free)
        assert jumps["u1"] <= 1e-10 * norm
        assert jumps["u2_normal"] <= 1e-10 * norm


def test_build_space_only_supports_lowest_order():
    mesh = initial_prism_mesh(1, 1.0)
    with pytest.raises(NotImplementedError):
        build_space(mesh, ell=1, k=2)
