"""Quadrature rules on intervals, simplices, and space-time prisms.

Time direction uses Gauss-Legendre, the spatial simplex uses a collapsed
(Duffy) tensor rule built from Gauss-Legendre x Gauss-Jacobi, so that any
requested polynomial exactness degree is available.  Prism rules are tensor
products of the two.
"""

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


class QuadratureRule:
    """Points/weights pair, optionally mapped to a physical domain."""

    def __init__(self, points, weights):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.weights = np.asarray(weights, dtype=float)
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("points/weights length mismatch")

    def __len__(self):
        return len(self.weights)

    def integrate(self, f):
        return self.weights @ np.asarray(f(self.points))


def gauss_legendre_01(n):
    """n-point Gauss rule on [0, 1], exact for degree 2n-1."""
    if n < 1:
        raise ValueError("need at least one point")
    x, w = roots_legendre(n)
    return (x + 1.0) / 2.0, w / 2.0


def interval_rule(degree):
    """Gauss rule on [0,1] exact for polynomials of the given degree."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    return gauss_legendre_01(degree // 2 + 1)


def simplex_rule(d, degree):
    """Rule on the reference d-simplex, exact for total degree `degree`.

    Reference simplices: [0,1] for d=1 and conv{(0,0),(1,0),(0,1)} for d=2.
    Returns (points, weights) with points of shape (n, d).
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if d == 1:
        x, w = interval_rule(degree)
        return x[:, None], w
    if d == 2:
        n = degree // 2 + 1
        a, wa = gauss_legendre_01(n)
        # Jacobi weight (1-b) absorbs the Duffy Jacobian exactly.
        xj, wj = roots_jacobi(n, 1.0, 0.0)
        b = (xj + 1.0) / 2.0
        wb = wj / 4.0
        A, B = np.meshgrid(a, b, indexing="ij")
        pts = np.column_stack([(A * (1.0 - B)).ravel(), B.ravel()])
        wts = np.outer(wa, wb).ravel()
        return pts, wts
    raise ValueError(f"unsupported spatial dimension {d}")


def prism_rule(d, degree_t, degree_x):
    """Tensor rule on the reference prism [0,1] x (reference d-simplex).

    Returns (points, weights); points have shape (n, 1+d) with the time
    coordinate first.
    """
    tq, tw = interval_rule(degree_t)
    xq, xw = simplex_rule(d, degree_x)
    nt, nx = len(tq), len(xw)
    pts = np.empty((nt * nx, 1 + d))
    pts[:, 0] = np.repeat(tq, nx)
    pts[:, 1:] = np.tile(xq, (nt, 1))
    wts = np.outer(tw, xw).ravel()
    return pts, wts


def map_to_prism(prism, ref_points, ref_weights):
    """Map a reference-prism rule onto a physical prism.

    `prism` must expose t0, t1 and a simplex with `vertices` (numpy array of
    shape (d+1, d)).
    """
    verts = np.asarray(prism.base.vertices, dtype=float)
    d = verts.shape[1]
    B = (verts[1:] - verts[0]).T
    detB = float(np.linalg.det(B)) if d > 1 else float(B[0, 0])
    ht = prism.t1 - prism.t0
    pts = np.empty_like(ref_points)
    pts[:, 0] = prism.t0 + ht * ref_points[:, 0]
    pts[:, 1:] = ref_points[:, 1:] @ B.T + verts[0]
    return QuadratureRule(pts, ref_weights * ht * abs(detB))


def make_quadrature(prism, degree_t, degree_x):
    """Physical quadrature on a prism, exact for the given tensor degrees."""
    d = np.asarray(prism.base.vertices).shape[1]
    ref_pts, ref_wts = prism_rule(d, degree_t, degree_x)
    return map_to_prism(prism, ref_pts, ref_wts)
