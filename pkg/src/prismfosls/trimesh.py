"""Conforming triangulations of the space-time rectangle with newest vertex
bisection.

Coordinates are (t, x).  The refinement edge of a triangle is the edge
between its first two vertices; bisecting (z1, z2, z3) at the midpoint m of
that edge yields the children (z3, z1, m) and (z2, z3, m).  Marked triangles
are split into four children by bisecting twice, and conformity is restored
by the usual marked-edge fixpoint closure.
"""

import numpy as np


class TriMesh:
    def __init__(self, coordinates, elements):
        self.coordinates = np.asarray(coordinates, dtype=float)
        self.elements = np.asarray(elements, dtype=np.int64)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_nodes(self):
        return len(self.coordinates)

    def areas(self):
        c = self.coordinates[self.elements]
        d1 = c[:, 1] - c[:, 0]
        d2 = c[:, 2] - c[:, 0]
        return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def element_edges(self):
        """(edge2nodes, element2edges) with edge 0 the refinement edge."""
        el = self.elements
        pairs = np.vstack([el[:, [0, 1]], el[:, [1, 2]], el[:, [2, 0]]])
        pairs = np.sort(pairs, axis=1)
        edge2nodes, inverse = np.unique(pairs, axis=0, return_inverse=True)
        element2edges = inverse.reshape(3, -1).T
        return edge2nodes, element2edges


def initial_trimesh(T=1.0):
    """Criss-cross split of [0,T] x [0,1] into four triangles whose
    refinement edges are the (longest) outer edges."""
    coords = np.array([[0.0, 0.0], [T, 0.0], [T, 1.0], [0.0, 1.0],
                       [T / 2.0, 0.5]])
    elements = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    return TriMesh(coords, elements)


def refine_nvb(mesh, marked):
    """Bisect every marked triangle twice (four children) plus closure."""
    edge2nodes, element2edges = mesh.element_edges()
    n_edges = len(edge2nodes)
    marked_edges = np.zeros(n_edges, dtype=bool)
    marked = np.asarray(sorted(set(marked)), dtype=np.int64)
    if len(marked):
        marked_edges[element2edges[marked].ravel()] = True
    # closure: a triangle with any marked edge gets its refinement edge marked
    while True:
        has_marked = marked_edges[element2edges].any(axis=1)
        need = has_marked & ~marked_edges[element2edges[:, 0]]
        if not need.any():
            break
        marked_edges[element2edges[need, 0]] = True

    new_of_edge = np.full(n_edges, -1, dtype=np.int64)
    idx = np.flatnonzero(marked_edges)
    new_of_edge[idx] = mesh.n_nodes + np.arange(len(idx))
    mids = 0.5 * (mesh.coordinates[edge2nodes[idx, 0]]
                  + mesh.coordinates[edge2nodes[idx, 1]])
    coords = np.vstack([mesh.coordinates, mids])

    out = []
    for e in range(mesh.n_elements):
        z1, z2, z3 = mesh.elements[e]
        e0, e1, e2 = element2edges[e]
        m0 = new_of_edge[e0]
        if m0 < 0:
            out.append((z1, z2, z3))
            continue
        # first bisection; then recurse into children whose refinement edge
        # (an edge of the parent) is marked
        for (a, b, c), edge in (((z3, z1, m0), e2), ((z2, z3, m0), e1)):
            m = new_of_edge[edge]
            if m < 0:
                out.append((a, b, c))
            else:
                out.append((c, a, m))
                out.append((b, c, m))
    return TriMesh(coords, np.array(out, dtype=np.int64))


def uniform_refine_nvb(mesh):
    return refine_nvb(mesh, np.arange(mesh.n_elements))
