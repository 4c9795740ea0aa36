"""Global lowest-order finite element space on a prismatic mesh.

The scalar component is continuous piecewise (P1 in time) x (P1 in space),
zero at spatial-boundary nodes; the flux component is piecewise constant in
time tensorized with Raviart-Thomas of order one in space (P2 on intervals
for d=1), with normal-trace continuity across lateral facets.  Hanging nodes
and hanging facet moments on 1-irregular meshes are eliminated through a
constraint map C that expresses every coefficient of the fully discontinuous
("all") coefficient vector in terms of the free ones.

Flux degrees of freedom are facet moments against shifted Legendre
polynomials in a globally fixed orientation (edge endpoints ordered
lexicographically, normal obtained by rotating the edge direction clockwise),
so that the same functional is seen from both sides of a facet.  The local
dual basis to these physical functionals is computed numerically and cached
per element geometry.
"""

import numpy as np
from scipy import sparse

from .elements import PrismElement, ShapeSystem
from .mesh import _reduce_dyadic, facet_relations
from .polynomials import polyval_1d, shifted_legendre
from .quadrature import gauss_legendre_01, simplex_rule


def element_of(mesh, prism, shape):
    return PrismElement(shape, mesh.t0(prism), mesh.t1(prism),
                        prism.base.vertices)


class CellDofs:
    """Per-prism bookkeeping: element geometry plus local-to-all index maps."""

    __slots__ = ("pid", "element", "u1_all", "u2_all", "ginv")

    def __init__(self, pid, element, u1_all, u2_all, ginv):
        self.pid = pid
        self.element = element
        self.u1_all = u1_all
        self.u2_all = u2_all
        self.ginv = ginv


class FESpace:
    """Lowest-order conforming space with eliminated hanging constraints."""

    def __init__(self, mesh, shape, cells, node_index, facet_index,
                 interior_index, C, free_of_all, n_all):
        self.mesh = mesh
        self.shape = shape
        self.cells = cells
        self.node_index = node_index
        self.facet_index = facet_index
        self.interior_index = interior_index
        self.C = C
        self.free_of_all = free_of_all
        self.n_all = n_all
        self.n_free = C.shape[1]
        self.relations = None   # filled by build_space

    @property
    def dim(self):
        return self.n_free


class DiscreteField:
    """A member of the space, stored through its free coefficient vector."""

    def __init__(self, space, free):
        self.space = space
        self.free = np.asarray(free, dtype=float)
        self.all = space.C @ self.free

    def cell_coeffs(self, cell):
        """(c1, c2) in the local element bases of one cell.

        c1 follows the element's nodal layout, c2 refers to the Piola-mapped
        reference basis (already converted from the facet-moment dual basis).
        """
        c1 = self.all[cell.u1_all]
        c2 = cell.ginv @ self.all[cell.u2_all]
        return c1, c2


def _node_key(tfrac, vertex):
    return (tfrac, vertex)


def _on_boundary_x(x, d):
    if d == 1:
        return x[0] == 0.0 or x[0] == 1.0
    return (x[0] == 0.0 or x[0] == 1.0 or x[1] == 0.0 or x[1] == 1.0)


def _facet_endpoints(fk, d):
    """Physical endpoints (sorted) of a lateral facet key; a single point
    for d = 1."""
    if d == 1:
        return fk[0]
    return fk


def _edge_param(a, b, x):
    ax = 0 if abs(b[0] - a[0]) >= abs(b[1] - a[1]) else 1
    return (x[ax] - a[ax]) / (b[ax] - a[ax])


def _barycentric(tri, x):
    v = np.asarray(tri, dtype=float)
    A = np.column_stack([v[1] - v[0], v[2] - v[0]])
    lam = np.linalg.solve(A, np.asarray(x, dtype=float) - v[0])
    return np.array([1.0 - lam[0] - lam[1], lam[0], lam[1]])


class _DualBasisCache:
    """Local flux basis dual to the physical facet/interior moments.

    For a prism with spatial Jacobian B the matrix G of the physical
    functionals applied to the Piola basis depends only on B (edge ordering
    is decided by coordinate differences, which B determines), so inverses
    are shared between congruent prisms.
    """

    def __init__(self, shape):
        self.shape = shape
        self.cache = {}
        k = shape.k
        d = shape.d
        self.nfm = (k + 1) if d == 2 else 1   # moments per lateral facet
        self.nint = k * (k + 1) if d == 2 else k
        nq = k + 3
        self.sq, self.sw = gauss_legendre_01(nq)
        self.leg = np.column_stack([polyval_1d(shifted_legendre(m), self.sq)
                                    for m in range(k + 1)])
        deg = 2 * k + 4
        self.xq, self.xw = simplex_rule(d, deg)
        from .polynomials import mono_vander, monomial_exponents
        self.pint = mono_vander(self.xq, monomial_exponents(k - 1, d))

    def functionals_on(self, element, facets, target=None):
        """Apply the facet moment functionals of the given physical facets
        (and, if target is None, this element's interior moments) to the
        element's flux basis.  Returns the matrix M[m, r]."""
        sh = self.shape
        d = sh.d
        rows = []
        for fk in facets:
            if d == 1:
                x = np.array([[0.5] + list(fk[0])])
                ref = element.to_ref(x)
                ref[:, 0] = 0.5
                vals = element.u2_values_ref(ref)[0]      # (n2, 1)
                rows.append(vals[:, 0])
            else:
                a = np.asarray(fk[0])
                b = np.asarray(fk[1])
                nvec = np.array([b[1] - a[1], a[0] - b[0]])
                pts = np.empty((len(self.sq), 3))
                pts[:, 0] = 0.5
                pts[:, 1:] = a + self.sq[:, None] * (b - a)
                ref = element.to_ref(pts)
                ref[:, 0] = 0.5
                vn = element.u2_values_ref(ref) @ nvec    # (nq, n2)
                for m in range(sh.k + 1):
                    rows.append((self.sw * self.leg[:, m]) @ vn)
        if target is None:
            # interior moments of the contravariant pullback; for the
            # element's own basis the pullback is the reference RT basis
            W = sh.space_u2.values(self.xq)               # (nq, nrt, d)
            for j in range(self.pint.shape[1]):
                for c in range(d):
                    rows.append((self.xw * self.pint[:, j]) @ W[:, :, c])
        return np.array(rows)

    def ginv_for(self, element):
        key = element.B.tobytes()
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        facets = _local_facet_endpoints(element, self.shape.d)
        G = self.functionals_on(element, facets)
        ginv = np.linalg.inv(G)
        self.cache[key] = ginv
        return ginv


def _local_facet_endpoints(element, d):
    """Sorted physical endpoints of the element's lateral facets, in the
    local facet order (facet i opposite vertex i for d = 2)."""
    v = [tuple(p) for p in element.vertices]
    if d == 1:
        return [(v[0],), (v[1],)]
    out = []
    for (a, b) in ((v[1], v[2]), (v[2], v[0]), (v[0], v[1])):
        out.append((a, b) if a <= b else (b, a))
    return out


def build_space(mesh, ell=0, k=1):
    """Assemble the DoF maps and the constraint matrix for S_{0,1}(P)."""
    if ell != 0 or k != 1:
        raise NotImplementedError("only the lowest-order space is built "
                                  "globally")
    d = mesh.dim
    shape = ShapeSystem(ell, k, d)
    dual = _DualBasisCache(shape)
    rep = facet_relations(mesh)

    # ---- enumerate "all" DoFs ---------------------------------------------
    node_index = {}
    facet_index = {}
    interior_index = {}
    n_all = 0
    prism_corner_keys = {}
    for pid in mesh.ids():
        p = mesh.prisms[pid]
        flo, fhi = p.time_fraction()
        keys = []
        for tf in (flo, fhi):
            for v in p.base.vertices:
                keys.append(_node_key(tf, v))
        prism_corner_keys[pid] = keys
        for key in keys:
            if key not in node_index:
                node_index[key] = n_all
                n_all += 1
    for pid in mesh.ids():
        p = mesh.prisms[pid]
        tkey = (p.ti, p.level)
        for fk in p.base.facet_keys():
            key = (fk, tkey)
            if key not in facet_index:
                facet_index[key] = n_all
                n_all += dual.nfm
        interior_index[pid] = n_all
        n_all += dual.nint

    # ---- per-cell data ------------------------------------------------------
    cells = []
    cell_of = {}
    for pid in mesh.ids():
        p = mesh.prisms[pid]
        elem = element_of(mesh, p, shape)
        u1 = []
        for tf in (p.time_fraction()):
            for v in p.base.vertices:
                u1.append(node_index[_node_key(tf, v)])
        u2 = []
        tkey = (p.ti, p.level)
        for fk in p.base.facet_keys():
            base = facet_index[(fk, tkey)]
            u2.extend(range(base, base + dual.nfm))
        u2.extend(range(interior_index[pid], interior_index[pid] + dual.nint))
        cell = CellDofs(pid, elem, np.array(u1), np.array(u2),
                        dual.ginv_for(elem))
        cells.append(cell)
        cell_of[pid] = cell

    # ---- constraints ---------------------------------------------------------
    FIXED = object()
    expr = {}           # all index -> list[(all index, weight)] for slaves
    status = {}         # all index -> FIXED for boundary scalar nodes
    for key, idx in node_index.items():
        if _on_boundary_x(key[1], d):
            status[idx] = FIXED

    def add_node_constraint(key, weights):
        idx = node_index[key]
        if idx in status or idx in expr:
            return
        expr[idx] = [(node_index[k], w) for k, w in weights if abs(w) > 1e-13]

    for rel in rep.hanging:
        sp = mesh.prisms[rel.slave.prism]
        mp = mesh.prisms[rel.master.prism]
        if rel.orientation == "horizontal":
            tfrac, _ = rel.slave.key
            mverts = set(mp.base.vertices)
            for v in sp.base.vertices:
                if v in mverts:
                    continue
                if d == 1:
                    a, b = mp.base.vertices
                    s = (v[0] - a[0]) / (b[0] - a[0])
                    lam = np.array([1.0 - s, s])
                else:
                    lam = _barycentric(mp.base.vertices, v)
                add_node_constraint(
                    _node_key(tfrac, v),
                    [(_node_key(tfrac, mv), lam[i])
                     for i, mv in enumerate(mp.base.vertices)])
        else:
            fk, (ti, lev) = rel.slave.key
            FK, (TI, LEV) = rel.master.key
            T0, T1 = mesh.T * TI / (1 << LEV), mesh.T * (TI + 1) / (1 << LEV)
            Tf0, Tf1 = _reduce_dyadic(TI, LEV), _reduce_dyadic(TI + 1, LEV)
            sf0, sf1 = _reduce_dyadic(ti, lev), _reduce_dyadic(ti + 1, lev)
            st = (mesh.T * ti / (1 << lev), mesh.T * (ti + 1) / (1 << lev))
            if d == 1:
                x = fk[0]
                master_keys = {_node_key(Tf0, x), _node_key(Tf1, x)}
                for tf, t in ((sf0, st[0]), (sf1, st[1])):
                    key = _node_key(tf, x)
                    if key in master_keys:
                        continue
                    tau = (t - T0) / (T1 - T0)
                    add_node_constraint(key, [(_node_key(Tf0, x), 1.0 - tau),
                                              (_node_key(Tf1, x), tau)])
            else:
                A, B = FK
                master_keys = {_node_key(tf, v)
                               for tf in (Tf0, Tf1) for v in (A, B)}
                for tf, t in ((sf0, st[0]), (sf1, st[1])):
                    tau = (t - T0) / (T1 - T0)
                    for v in fk:
                        key = _node_key(tf, v)
                        if key in master_keys:
                            continue
                        s = _edge_param(A, B, v)
                        add_node_constraint(key, [
                            (_node_key(Tf0, A), (1 - tau) * (1 - s)),
                            (_node_key(Tf0, B), (1 - tau) * s),
                            (_node_key(Tf1, A), tau * (1 - s)),
                            (_node_key(Tf1, B), tau * s)])

        # flux moments of lateral slave facets
        if rel.orientation == "lateral":
            mcell = cell_of[mp.id]
            sfk = rel.slave.key[0]
            endpoints = (sfk if d == 2 else sfk)
            M = dual.functionals_on(mcell.element, [endpoints],
                                    target="facet")
            W = M @ mcell.ginv          # (nfm, n2 local of master)
            base = facet_index[rel.slave.key]
            for m in range(dual.nfm):
                idx = base + m
                if idx in expr:
                    continue
                expr[idx] = [(mcell.u2_all[r], w)
                             for r, w in enumerate(W[m]) if abs(w) > 1e-13]

    # ---- resolve chains and assemble C ---------------------------------------
    def resolve(terms, depth=0):
        if depth > 64:
            raise RuntimeError("constraint chain too deep")
        out = {}
        changed = False
        for ref, w in terms:
            if ref in expr:
                changed = True
                for ref2, w2 in expr[ref]:
                    out[ref2] = out.get(ref2, 0.0) + w * w2
            elif ref in status:
                changed = True
            else:
                out[ref] = out.get(ref, 0.0) + w
        terms = [(r, w) for r, w in out.items() if abs(w) > 1e-14]
        return resolve(terms, depth + 1) if changed else terms

    free_of_all = np.full(n_all, -1, dtype=np.int64)
    nf = 0
    for i in range(n_all):
        if i not in status and i not in expr:
            free_of_all[i] = nf
            nf += 1
    rows, cols, vals = [], [], []
    for i in range(n_all):
        if free_of_all[i] >= 0:
            rows.append(i)
            cols.append(free_of_all[i])
            vals.append(1.0)
        elif i in expr:
            for ref, w in resolve(expr[i]):
                rows.append(i)
                cols.append(free_of_all[ref])
                vals.append(w)
    C = sparse.coo_matrix((vals, (rows, cols)), shape=(n_all, nf)).tocsr()

    space = FESpace(mesh, shape, cells, node_index, facet_index,
                    interior_index, C, free_of_all, n_all)
    space.relations = rep
    space._dual = dual
    return space


def interp_onto_space(space, v1, v2):
    """Interpolate callables (v1, v2) by applying the global DoF functionals
    (nodal values for the scalar part, facet and interior moments for the
    flux part)."""
    mesh = space.mesh
    d = mesh.dim
    dual = space._dual
    allv = np.zeros(space.n_all)
    for key, idx in space.node_index.items():
        (i, L), x = key
        t = mesh.T * i / (1 << L)
        allv[idx] = float(np.asarray(v1(np.array([[t, *x]])))[0])

    tq, tw = gauss_legendre_01(4)
    done = set()
    for cell in space.cells:
        p = mesh.prisms[cell.pid]
        t0, t1 = mesh.time_interval(p)
        tkey = (p.ti, p.level)
        times = t0 + (t1 - t0) * tq
        for fk in p.base.facet_keys():
            key = (fk, tkey)
            if key in done:
                continue
            done.add(key)
            base = space.facet_index[key]
            if d == 1:
                x = fk[0][0]
                pts = np.column_stack([times, np.full(len(times), x)])
                allv[base] = tw @ np.asarray(v2(pts)).ravel()
            else:
                a = np.asarray(fk[0])
                b = np.asarray(fk[1])
                nvec = np.array([b[1] - a[1], a[0] - b[0]])
                xs = a + dual.sq[:, None] * (b - a)
                for m in range(dual.nfm):
                    acc = 0.0
                    for ti_, wt in zip(times, tw):
                        pts = np.column_stack(
                            [np.full(len(xs), ti_), xs])
                        vn = np.asarray(v2(pts)) @ nvec
                        acc += wt * (dual.sw * dual.leg[:, m]) @ vn
                    allv[base + m] = acc
        # interior moments of the pullback, time-averaged
        elem = cell.element
        base = space.interior_index[cell.pid]
        xphys = dual.xq @ elem.B.T + elem.v0
        acc = np.zeros(dual.nint)
        for ti_, wt in zip(times, tw):
            pts = np.column_stack([np.full(len(xphys), ti_), xphys])
            vals = np.asarray(v2(pts))
            if vals.ndim == 1:
                vals = vals[:, None]
            pb = elem.detB * (vals @ elem.Binv.T)
            r = 0
            for j in range(dual.pint.shape[1]):
                for c in range(d):
                    acc[r] += wt * (dual.xw * dual.pint[:, j]) @ pb[:, c]
                    r += 1
        allv[base:base + dual.nint] = acc

    free = np.empty(space.n_free)
    mask = space.free_of_all >= 0
    free[space.free_of_all[mask]] = allv[mask]
    return DiscreteField(space, free)


def facet_jump_norms(space, field):
    """L2 norms of inter-element jumps: the scalar part across every interior
    facet and the normal flux across lateral facets.  Returns a dict with the
    maximal single-facet jump norms."""
    mesh = space.mesh
    d = mesh.dim
    cell_of = {c.pid: c for c in space.cells}
    tq, tw = gauss_legendre_01(4)
    # horizontal facets are copies of the spatial simplex
    xq, xw = simplex_rule(d, 6) if d == 2 else (None, None)
    max_u1 = 0.0
    max_u2 = 0.0
    for rel in space.relations.interior:
        cs = cell_of[rel.slave.prism]
        cm = cell_of[rel.master.prism]
        c1s, c2s = field.cell_coeffs(cs)
        c1m, c2m = field.cell_coeffs(cm)
        if rel.orientation == "horizontal":
            (i, L), _ = rel.slave.key
            t = mesh.T * i / (1 << L)
            verts = np.asarray(mesh.prisms[rel.slave.prism].base.vertices)
            if d == 1:
                sx, sw_ = gauss_legendre_01(4)
                xs = verts[0, 0] + sx * (verts[1, 0] - verts[0, 0])
                wts = sw_ * abs(verts[1, 0] - verts[0, 0])
                pts = np.column_stack([np.full(len(xs), t), xs])
            else:
                B = (verts[1:] - verts[0]).T
                phys = xq @ B.T + verts[0]
                wts = xw * abs(np.linalg.det(B))
                pts = np.column_stack([np.full(len(phys), t), phys])
            a = _eval_u1(cs, c1s, pts)
            b = _eval_u1(cm, c1m, pts)
            max_u1 = max(max_u1, np.sqrt(np.sum(wts * (a - b) ** 2)))
        else:
            fk, (ti, lev) = rel.slave.key
            t0 = mesh.T * ti / (1 << lev)
            t1 = mesh.T * (ti + 1) / (1 << lev)
            times = t0 + (t1 - t0) * tq
            twts = tw * (t1 - t0)
            if d == 1:
                x = fk[0][0]
                pts = np.column_stack([times, np.full(len(times), x)])
                a = _eval_u1(cs, c1s, pts)
                b = _eval_u1(cm, c1m, pts)
                max_u1 = max(max_u1, np.sqrt(np.sum(twts * (a - b) ** 2)))
                fa = _eval_u2(cs, c2s, pts)[:, 0]
                fb = _eval_u2(cm, c2m, pts)[:, 0]
                max_u2 = max(max_u2, np.sqrt(np.sum(twts * (fa - fb) ** 2)))
            else:
                a_, b_ = np.asarray(fk[0]), np.asarray(fk[1])
                sx, sw_ = gauss_legendre_01(4)
                xs = a_ + sx[:, None] * (b_ - a_)
                elen = float(np.hypot(*(b_ - a_)))
                nrm = np.array([b_[1] - a_[1], a_[0] - b_[0]]) / elen
                j1 = 0.0
                j2 = 0.0
                for t, wt in zip(times, twts):
                    pts = np.column_stack([np.full(len(xs), t), xs])
                    va = _eval_u1(cs, c1s, pts)
                    vb = _eval_u1(cm, c1m, pts)
                    j1 += wt * np.sum(sw_ * elen * (va - vb) ** 2)
                    fa = _eval_u2(cs, c2s, pts) @ nrm
                    fb = _eval_u2(cm, c2m, pts) @ nrm
                    j2 += wt * np.sum(sw_ * elen * (fa - fb) ** 2)
                max_u1 = max(max_u1, np.sqrt(j1))
                max_u2 = max(max_u2, np.sqrt(j2))
    return {"u1": max_u1, "u2_normal": max_u2}


def _eval_u1(cell, c1, pts):
    ref = cell.element.to_ref(pts)
    return cell.element.u1_values_ref(ref) @ c1


def _eval_u2(cell, c2, pts):
    ref = cell.element.to_ref(pts)
    return np.einsum('pjd,j->pd', cell.element.u2_values_ref(ref), c2)
