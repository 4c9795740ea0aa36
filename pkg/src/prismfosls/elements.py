"""Reference shape functions, DoF functionals, local interpolation and local
L2 projection on a single space-time prism.

The local discrete space on a prism P = J x K is

    (P_{l+1}(J) (x) P_k(K))  x  (P_l(J) (x) RT_k(K)),

where the Raviart-Thomas factor degenerates to P_{k+1}(K) for d = 1.  The
scalar factor carries a nodal tensor basis (time lattice of order l+1, space
lattice of order k); the vector factor carries orthonormal Legendre in time
tensorized with the RT dual basis, mapped by the contravariant (Piola)
transform.
"""

import numpy as np

from .polynomials import (mono_diff_matrix, mono_vander, monomial_exponents,
                          polyder_1d, polyval_1d, shifted_legendre)
from .quadrature import gauss_legendre_01, interval_rule, simplex_rule


class TimeDofBasis:
    """Basis of P_{n+1}[0,1] dual to endpoint values plus moments against
    orthonormal Legendre polynomials of degree < n (the 1D analogue of the
    Raviart-Thomas DoF split)."""

    def __init__(self, n):
        self.n = n
        dim = n + 2
        D = np.zeros((dim, dim))
        D[0, 0] = 1.0                      # p(0)
        D[1, :] = 1.0                      # p(1)
        for m in range(n):
            L = shifted_legendre(m)
            for j in range(dim):
                # integral of t^j * L_m over [0,1]
                D[2 + m, j] = sum(L[i] / (i + j + 1) for i in range(len(L)))
        self.dof_matrix = D
        self.coeffs = np.linalg.inv(D)     # column j = coefficients of b_j
        self.cond = np.linalg.cond(D)

    @property
    def dim(self):
        return self.n + 2

    def values(self, t):
        t = np.asarray(t, dtype=float)
        return np.column_stack([polyval_1d(self.coeffs[:, j], t)
                                for j in range(self.dim)])

    def derivatives(self, t):
        t = np.asarray(t, dtype=float)
        return np.column_stack([polyval_1d(polyder_1d(self.coeffs[:, j]), t)
                                for j in range(self.dim)])

    def dofs_of(self, f, n_quad=None):
        """DoFs of a scalar callable on [0,1]."""
        nq = n_quad or (self.n + 4)
        tq, tw = gauss_legendre_01(nq)
        vals = np.asarray(f(tq), dtype=float)
        out = np.empty(self.dim)
        out[0] = float(f(np.array([0.0]))[0])
        out[1] = float(f(np.array([1.0]))[0])
        for m in range(self.n):
            out[2 + m] = tw @ (vals * polyval_1d(shifted_legendre(m), tq))
        return out


class NodalInterval:
    """Lagrange basis of P_n[0,1] at the equispaced lattice {i/n}."""

    def __init__(self, n):
        self.n = n
        self.nodes = np.array([0.5]) if n == 0 else np.arange(n + 1) / n
        V = np.vander(self.nodes, n + 1, increasing=True)
        self.coeffs = np.linalg.inv(V)

    @property
    def dim(self):
        return self.n + 1

    def values(self, t):
        t = np.asarray(t, dtype=float)
        return np.column_stack([polyval_1d(self.coeffs[:, j], t)
                                for j in range(self.dim)])

    def derivatives(self, t):
        t = np.asarray(t, dtype=float)
        return np.column_stack([polyval_1d(polyder_1d(self.coeffs[:, j]), t)
                                for j in range(self.dim)])


class LagrangeSimplex:
    """Nodal basis of P_k on the reference d-simplex (principal lattice)."""

    def __init__(self, d, k):
        self.d = d
        self.k = k
        self.exps = monomial_exponents(k, d)
        self.lattice = _principal_lattice(d, k)
        V = mono_vander(self.lattice, self.exps)
        self.coeffs = np.linalg.inv(V)
        self._diff = [mono_diff_matrix(self.exps, ax) for ax in range(d)]

    @property
    def dim(self):
        return len(self.exps)

    def values(self, pts):
        return mono_vander(pts, self.exps) @ self.coeffs

    def grads(self, pts):
        V = mono_vander(pts, self.exps)
        out = np.empty((V.shape[0], self.dim, self.d))
        for ax in range(self.d):
            out[:, :, ax] = V @ (self._diff[ax] @ self.coeffs)
        return out

    def mass_matrix(self):
        pts, wts = simplex_rule(self.d, 2 * self.k)
        Phi = self.values(pts)
        return Phi.T @ (wts[:, None] * Phi)


def _principal_lattice(d, k):
    if k == 0:
        return np.full((1, d), 1.0 / (d + 1))
    if d == 1:
        return (np.arange(k + 1) / k)[:, None]
    pts = [(i / k, j / k) for s in range(k + 1)
           for i in range(s, -1, -1) for j in (s - i,)]
    return np.array(pts)


_REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
_REF_EDGES = [(1, 2), (2, 0), (0, 1)]  # edge i opposite vertex i


class RTSimplex:
    """RT_k on the reference triangle, basis dual to facet normal moments
    against Legendre polynomials and interior moments against P_{k-1}^2."""

    def __init__(self, k):
        if k < 1:
            raise ValueError("RT order must be >= 1 here")
        self.d = 2
        self.k = k
        self.exps = monomial_exponents(k + 1, 2)
        nm = len(self.exps)
        idx = {e: i for i, e in enumerate(self.exps)}
        span = []
        for e in monomial_exponents(k, 2):
            cx = np.zeros(nm)
            cx[idx[e]] = 1.0
            span.append(np.vstack([cx, np.zeros(nm)]))
            span.append(np.vstack([np.zeros(nm), cx]))
        for e in monomial_exponents(k, 2):
            if sum(e) != k:
                continue
            cx = np.zeros(nm)
            cy = np.zeros(nm)
            cx[idx[(e[0] + 1, e[1])]] = 1.0
            cy[idx[(e[0], e[1] + 1)]] = 1.0
            span.append(np.vstack([cx, cy]))
        self.span = np.array(span)          # (nspan, 2, nm)
        self._dx = mono_diff_matrix(self.exps, 0)
        self._dy = mono_diff_matrix(self.exps, 1)

        self.edge_count = 3 * (k + 1)
        D = np.array([self._apply_dofs_span(r) for r in range(len(span))]).T
        self.dof_matrix = D
        self.coeffs = np.linalg.inv(D)      # column j = span weights of phi_j
        self.cond = np.linalg.cond(D)

    @property
    def dim(self):
        return (self.k + 1) * (self.k + 3)

    def values(self, pts):
        V = mono_vander(pts, self.exps)
        span_vals = np.einsum('pm,rcm->prc', V, self.span)
        return np.einsum('prc,rj->pjc', span_vals, self.coeffs)

    def div(self, pts):
        V = mono_vander(pts, self.exps)
        div_span = np.einsum('mn,rn->rm', self._dx, self.span[:, 0, :]) + \
            np.einsum('mn,rn->rm', self._dy, self.span[:, 1, :])
        return np.einsum('pm,rm->pr', V, div_span) @ self.coeffs

    def _apply_dofs_span(self, r):
        f = lambda pts: np.einsum('pm,cm->pc', mono_vander(pts, self.exps),
                                  self.span[r])
        return self.dofs_of(f, degree=2 * self.k + 2)

    def dofs_of(self, f, degree=None):
        """DoFs of a vector callable on the reference triangle.

        f maps (n,2) points to (n,2) values.
        """
        deg = degree or (2 * self.k + 6)
        k = self.k
        out = []
        sq, sw = gauss_legendre_01(deg // 2 + 1)
        leg = [polyval_1d(shifted_legendre(m), sq) for m in range(k + 1)]
        for (a, b) in _REF_EDGES:
            va, vb = _REF_VERTS[a], _REF_VERTS[b]
            tau = vb - va
            n = np.array([tau[1], -tau[0]])
            mid = (va + vb) / 2.0
            if np.dot(n, mid - np.array([1 / 3, 1 / 3])) < 0:
                n = -n
            # unnormalized n has length |tau|, absorbing the arclength factor
            pts = va + sq[:, None] * tau
            vn = np.asarray(f(pts)) @ n
            for m in range(k + 1):
                out.append(sw @ (vn * leg[m]))
        xq, xw = simplex_rule(2, deg)
        vals = np.asarray(f(xq))
        Vk = mono_vander(xq, monomial_exponents(k - 1, 2))
        for j in range(Vk.shape[1]):
            out.append(xw @ (vals[:, 0] * Vk[:, j]))
            out.append(xw @ (vals[:, 1] * Vk[:, j]))
        return np.array(out)


class RTInterval:
    """The d=1 stand-in for RT_k: P_{k+1}[0,1] with endpoint-value DoFs plus
    interior moments, keeping the facet/interior DoF split."""

    def __init__(self, k):
        self.d = 1
        self.k = k
        self._basis = TimeDofBasis(k)
        self.edge_count = 2
        self.dof_matrix = self._basis.dof_matrix
        self.cond = self._basis.cond

    @property
    def dim(self):
        return self.k + 2

    def values(self, pts):
        return self._basis.values(np.asarray(pts)[:, 0])[:, :, None]

    def div(self, pts):
        return self._basis.derivatives(np.asarray(pts)[:, 0])

    def dofs_of(self, f, degree=None):
        g = lambda t: np.asarray(f(np.asarray(t)[:, None]))[:, 0]
        nq = (degree or (2 * self.k + 6)) // 2 + 1
        return self._basis.dofs_of(g, n_quad=nq)


class ShapeSystem:
    """Complete local shape system S_{l,k}(P) on the reference prism."""

    def __init__(self, ell, k, d):
        if d not in (1, 2):
            raise ValueError(f"unsupported dimension {d}")
        if k < 1 or ell < 0:
            raise ValueError("need k >= 1 and l >= 0")
        self.ell = ell
        self.k = k
        self.d = d
        self.time_u1 = NodalInterval(ell + 1)
        self.time_u1_dof = TimeDofBasis(ell)
        self.time_u2 = [shifted_legendre(m) for m in range(ell + 1)]
        self.space_u1 = LagrangeSimplex(d, k)
        self.space_u2 = RTSimplex(k) if d == 2 else RTInterval(k)
        self.n1 = self.time_u1.dim * self.space_u1.dim
        self.n2 = (ell + 1) * self.space_u2.dim

    def u2_time_values(self, t):
        t = np.asarray(t, dtype=float)
        return np.column_stack([polyval_1d(c, t) for c in self.time_u2])


class PrismElement:
    """A shape system mapped to a physical prism [t0,t1] x K."""

    def __init__(self, shape, t0, t1, vertices):
        self.shape = shape
        self.t0 = float(t0)
        self.ht = float(t1) - float(t0)
        verts = np.asarray(vertices, dtype=float)
        self.v0 = verts[0]
        self.B = (verts[1:] - verts[0]).T
        self.detB = float(np.linalg.det(self.B))
        self.Binv = np.linalg.inv(self.B)
        self.vertices = verts

    @classmethod
    def from_prism(cls, shape, prism):
        return cls(shape, prism.t0, prism.t1, prism.base.vertices)

    # -- coordinate maps ---------------------------------------------------
    def to_ref(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty_like(pts)
        out[:, 0] = (pts[:, 0] - self.t0) / self.ht
        out[:, 1:] = (pts[:, 1:] - self.v0) @ self.Binv.T
        return out

    def to_phys(self, ref_pts):
        ref_pts = np.atleast_2d(np.asarray(ref_pts, dtype=float))
        out = np.empty_like(ref_pts)
        out[:, 0] = self.t0 + self.ht * ref_pts[:, 0]
        out[:, 1:] = ref_pts[:, 1:] @ self.B.T + self.v0
        return out

    @property
    def volume(self):
        d = self.shape.d
        simplex_vol = abs(self.detB) / (1.0 if d == 1 else 2.0)
        return self.ht * simplex_vol

    # -- u1 ----------------------------------------------------------------
    def u1_values_ref(self, ref):
        T = self.shape.time_u1.values(ref[:, 0])
        X = self.shape.space_u1.values(ref[:, 1:])
        return np.einsum('pa,pi->pai', T, X).reshape(len(ref), -1)

    def u1_dt_ref(self, ref):
        T = self.shape.time_u1.derivatives(ref[:, 0]) / self.ht
        X = self.shape.space_u1.values(ref[:, 1:])
        return np.einsum('pa,pi->pai', T, X).reshape(len(ref), -1)

    def u1_grad_ref(self, ref):
        T = self.shape.time_u1.values(ref[:, 0])
        GX = np.einsum('pid,de->pie', self.shape.space_u1.grads(ref[:, 1:]),
                       self.Binv)
        n = len(ref)
        out = np.einsum('pa,pie->paie', T, GX)
        return out.reshape(n, -1, self.shape.d)

    # -- u2 (Piola-mapped) ---------------------------------------------------
    def u2_values_ref(self, ref):
        T = self.shape.u2_time_values(ref[:, 0])
        W = np.einsum('de,pje->pjd', self.B / self.detB,
                      self.shape.space_u2.values(ref[:, 1:]))
        n = len(ref)
        return np.einsum('pm,pjd->pmjd', T, W).reshape(n, -1, self.shape.d)

    def u2_div_ref(self, ref):
        T = self.shape.u2_time_values(ref[:, 0])
        DW = self.shape.space_u2.div(ref[:, 1:]) / self.detB
        return np.einsum('pm,pj->pmj', T, DW).reshape(len(ref), -1)

    # single-index evaluation at physical points (library surface)
    def eval_u1(self, index, pts):
        return self.u1_values_ref(self.to_ref(pts))[:, index]

    def eval_grad_x_u1(self, index, pts):
        return self.u1_grad_ref(self.to_ref(pts))[:, index, :]

    def eval_dt_u1(self, index, pts):
        return self.u1_dt_ref(self.to_ref(pts))[:, index]

    def eval_u2(self, index, pts):
        return self.u2_values_ref(self.to_ref(pts))[:, index, :]

    def eval_div_x_u2(self, index, pts):
        return self.u2_div_ref(self.to_ref(pts))[:, index]

    # -- local quasi-interpolant -------------------------------------------
    def interpolate(self, v1, v2, degree_t=None, degree_x=None):
        """Coefficients of the local quasi-interpolant of (v1, v2).

        v1 maps (n, 1+d) physical points to values, v2 to (n, d) vectors.
        Returns (c1, c2) with c1 of shape (time lattice, space nodal) and c2
        of shape (l+1, RT dim).
        """
        sh = self.shape
        deg_t = degree_t or (2 * sh.ell + 8)
        deg_x = degree_x or (2 * sh.k + 8)

        # u1: spatial L2 projection at selected times, then time DoFs
        xq, xw = simplex_rule(sh.d, deg_x + sh.k)
        Phi = sh.space_u1.values(xq)
        Minv = np.linalg.inv(sh.space_u1.mass_matrix())
        tq, tw = interval_rule(deg_t + sh.ell)
        t_eval = np.concatenate([[0.0, 1.0], tq])

        def proj_at(ts):
            # returns (len(ts), space dim) spatial projection coefficients
            pts = np.empty((len(ts) * len(xq), 1 + sh.d))
            pts[:, 0] = self.t0 + self.ht * np.repeat(ts, len(xq))
            pts[:, 1:] = np.tile(xq @ self.B.T + self.v0, (len(ts), 1))
            vals = np.asarray(v1(pts)).reshape(len(ts), len(xq))
            return np.einsum('tq,qi->ti', vals * xw, Phi) @ Minv.T

        G = proj_at(t_eval)
        dofs = np.empty((sh.time_u1_dof.dim, sh.space_u1.dim))
        dofs[0] = G[0]
        dofs[1] = G[1]
        for m in range(sh.ell):
            leg = polyval_1d(shifted_legendre(m), tq)
            dofs[2 + m] = np.einsum('t,ti->i', tw * leg, G[2:])
        # convert time-DoF coefficients to the nodal time basis
        theta = sh.time_u1_dof.values(sh.time_u1.nodes)   # (nodes, dof dim)
        c1 = theta @ dofs

        # u2: reference RT DoFs of the pullback at time quadrature nodes,
        # then Legendre moments in time
        tq2, tw2 = interval_rule(deg_t + sh.ell)

        def pullback(t):
            def g(xpts):
                pts = np.empty((len(xpts), 1 + sh.d))
                pts[:, 0] = self.t0 + self.ht * t
                pts[:, 1:] = xpts @ self.B.T + self.v0
                vals = np.asarray(v2(pts))
                if vals.ndim == 1:
                    vals = vals[:, None]
                return self.detB * (vals @ self.Binv.T)
            return g

        R = np.array([sh.space_u2.dofs_of(pullback(t), degree=deg_x + sh.k + 1)
                      for t in tq2])                      # (nq, RT dim)
        c2 = np.empty((sh.ell + 1, sh.space_u2.dim))
        for m in range(sh.ell + 1):
            leg = polyval_1d(shifted_legendre(m), tq2)
            c2[m] = np.einsum('t,tj->j', tw2 * leg, R)
        return c1, c2

    def l2_project(self, w, degree_t=None, degree_x=None):
        """L2(P)-orthogonal projection of a scalar onto P_l(J) (x) P_k(K).

        Returns coefficients of shape (l+1, space nodal dim) with respect to
        the (orthonormal Legendre in time) x (nodal in space) basis.
        """
        sh = self.shape
        deg_t = degree_t or (2 * sh.ell + 8)
        deg_x = degree_x or (2 * sh.k + 8)
        tq, tw = interval_rule(deg_t + sh.ell)
        xq, xw = simplex_rule(sh.d, deg_x + sh.k)
        pts = np.empty((len(tq) * len(xq), 1 + sh.d))
        pts[:, 0] = self.t0 + self.ht * np.repeat(tq, len(xq))
        pts[:, 1:] = np.tile(xq @ self.B.T + self.v0, (len(tq), 1))
        vals = np.asarray(w(pts)).reshape(len(tq), len(xq))
        Phi = sh.space_u1.values(xq)
        Minv = np.linalg.inv(sh.space_u1.mass_matrix())
        leg = np.column_stack([polyval_1d(shifted_legendre(m), tq)
                               for m in range(sh.ell + 1)])
        moments = np.einsum('tm,t,tq,qi->mi', leg, tw, vals * xw, Phi)
        return moments @ Minv.T

    def eval_projection(self, coeffs, pts):
        """Evaluate an l2_project result at physical points."""
        ref = self.to_ref(pts)
        sh = self.shape
        leg = np.column_stack([polyval_1d(c, ref[:, 0]) for c in
                               [shifted_legendre(m) for m in range(sh.ell + 1)]])
        Phi = sh.space_u1.values(ref[:, 1:])
        return np.einsum('pm,mi,pi->p', leg, coeffs, Phi)

    def eval_interpolant(self, c1, c2, pts):
        """Values (u1, u2) of an interpolate() result at physical points."""
        ref = self.to_ref(pts)
        u1 = self.u1_values_ref(ref) @ c1.ravel()
        u2 = np.einsum('pjd,j->pd', self.u2_values_ref(ref), c2.ravel())
        return u1, u2

    def eval_interpolant_div(self, c1, c2, pts):
        ref = self.to_ref(pts)
        return (self.u1_dt_ref(ref) @ c1.ravel()
                + self.u2_div_ref(ref) @ c2.ravel())

    def eval_interpolant_grad(self, c1, pts):
        ref = self.to_ref(pts)
        return np.einsum('pid,i->pd', self.u1_grad_ref(ref), c1.ravel())
