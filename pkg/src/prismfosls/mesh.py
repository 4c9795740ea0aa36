"""Prismatic space-time meshes with product refinement and 1-irregular
closure.

A prism is a time interval times a spatial simplex; refinement bisects the
time interval and splits the simplex into 2^d children (bisection for d=1,
red refinement for d=2).  After refining marked prisms, a minimal fixpoint
closure keeps the level difference of any two intersecting prisms at most 1.

All vertex coordinates are dyadic, hence exactly representable as floats;
adjacency and facet matching use exact comparisons.  Time intervals are
tracked as integer pairs (index, level) so that arbitrary end times T remain
exact.
"""

from dataclasses import dataclass, field

import numpy as np


class InvalidMeshError(Exception):
    pass


def _reduce_dyadic(i, l):
    while l > 0 and i % 2 == 0:
        i //= 2
        l -= 1
    return (i, l)


class Simplex:
    """A d-simplex with refinement ancestry.

    vertices are tuples of floats; `edge_parent` maps each facet key of this
    simplex to the facet key of the parent it is contained in (if any).
    """

    __slots__ = ("vertices", "parent", "edge_parent", "d")

    def __init__(self, vertices, parent=None, edge_parent=None):
        self.vertices = tuple(tuple(float(c) for c in v) for v in vertices)
        self.d = len(self.vertices[0])
        if len(self.vertices) != self.d + 1:
            raise ValueError("vertex count does not match dimension")
        self.parent = parent
        self.edge_parent = edge_parent or {}

    def key(self):
        return tuple(sorted(self.vertices))

    def facet_keys(self):
        """Keys of the d-1 facets (points for d=1, edges for d=2)."""
        if self.d == 1:
            return [(v,) for v in self.vertices]
        v = self.vertices
        return [_edge_key(v[1], v[2]), _edge_key(v[2], v[0]),
                _edge_key(v[0], v[1])]

    @property
    def volume(self):
        v = np.asarray(self.vertices)
        if self.d == 1:
            return abs(v[1, 0] - v[0, 0])
        return abs(np.linalg.det((v[1:] - v[0]).T)) / 2.0

    def children(self):
        if self.d == 1:
            (a,), (b,) = self.vertices
            m = (a + b) / 2.0
            return [
                Simplex([(a,), (m,)], self, {((a,),): ((a,),)}),
                Simplex([(m,), (b,)], self, {((b,),): ((b,),)}),
            ]
        v0, v1, v2 = self.vertices
        m01 = _mid(v0, v1)
        m12 = _mid(v1, v2)
        m02 = _mid(v0, v2)
        e12, e20, e01 = _edge_key(v1, v2), _edge_key(v2, v0), _edge_key(v0, v1)
        return [
            Simplex([v0, m01, m02], self,
                    {_edge_key(v0, m01): e01, _edge_key(v0, m02): e20}),
            Simplex([m01, v1, m12], self,
                    {_edge_key(m01, v1): e01, _edge_key(v1, m12): e12}),
            Simplex([m02, m12, v2], self,
                    {_edge_key(m12, v2): e12, _edge_key(m02, v2): e20}),
            Simplex([m01, m12, m02], self, {}),
        ]


def _mid(a, b):
    return tuple((x + y) / 2.0 for x, y in zip(a, b))


def _edge_key(a, b):
    return (a, b) if a <= b else (b, a)


class Prism:
    """Time interval x spatial simplex at a refinement level."""

    __slots__ = ("id", "level", "ti", "base")

    def __init__(self, pid, level, ti, base):
        self.id = pid
        self.level = level
        self.ti = ti
        self.base = base

    def time_fraction(self):
        """(t0, t1) as reduced dyadic fractions of T."""
        return (_reduce_dyadic(self.ti, self.level),
                _reduce_dyadic(self.ti + 1, self.level))


@dataclass(frozen=True)
class FacetRef:
    prism: int
    orientation: str          # 'horizontal' or 'lateral'
    key: tuple                # exact matching key of this facet


@dataclass(frozen=True)
class FacetRelation:
    kind: str                 # 'shared' or 'master-slave'
    orientation: str
    slave: FacetRef
    master: FacetRef


@dataclass
class FacetReport:
    interior: list = field(default_factory=list)
    boundary: list = field(default_factory=list)   # (FacetRef, tag)

    @property
    def shared(self):
        return [r for r in self.interior if r.kind == "shared"]

    @property
    def hanging(self):
        return [r for r in self.interior if r.kind == "master-slave"]


class PrismaticMesh:
    """A set of prisms covering [0,T] x Omega with adjacency bookkeeping."""

    def __init__(self, dim, T):
        self.dim = dim
        self.T = float(T)
        self.prisms = {}
        self.adj = {}
        self._next_id = 0

    # -- basic queries -----------------------------------------------------
    def __len__(self):
        return len(self.prisms)

    def ids(self):
        return sorted(self.prisms)

    def time_interval(self, p):
        scale = self.T / (1 << p.level)
        return (p.ti * scale, (p.ti + 1) * scale)

    def t0(self, p):
        return p.ti * self.T / (1 << p.level)

    def t1(self, p):
        return (p.ti + 1) * self.T / (1 << p.level)

    def volume(self, p):
        return (self.T / (1 << p.level)) * p.base.volume

    def total_volume(self):
        return sum(self.volume(p) for p in self.prisms.values())

    def max_level_jump(self):
        jump = 0
        for pid, nbrs in self.adj.items():
            lp = self.prisms[pid].level
            for q in nbrs:
                jump = max(jump, abs(lp - self.prisms[q].level))
        return jump

    def copy(self):
        m = PrismaticMesh(self.dim, self.T)
        m.prisms = dict(self.prisms)
        m.adj = {pid: set(nbrs) for pid, nbrs in self.adj.items()}
        m._next_id = self._next_id
        return m

    # -- construction ------------------------------------------------------
    def _add(self, level, ti, base):
        pid = self._next_id
        self._next_id += 1
        p = Prism(pid, level, ti, base)
        self.prisms[pid] = p
        self.adj[pid] = set()
        return p

    def _intersects(self, p, q):
        # exact closed-set intersection test
        if p.ti << q.level > (q.ti + 1) << p.level:
            return False
        if q.ti << p.level > (p.ti + 1) << q.level:
            return False
        return _simplices_intersect(p.base, q.base)

    def _split(self, pid):
        p = self.prisms.pop(pid)
        old_nbrs = sorted(self.adj.pop(pid))
        for q in old_nbrs:
            self.adj[q].discard(pid)
        kids = []
        space_children = p.base.children()
        for ci in (0, 1):
            for s in space_children:
                kids.append(self._add(p.level + 1, 2 * p.ti + ci, s))
        for i, c in enumerate(kids):
            for c2 in kids[i + 1:]:
                self.adj[c.id].add(c2.id)
                self.adj[c2.id].add(c.id)
            for qid in old_nbrs:
                if self._intersects(c, self.prisms[qid]):
                    self.adj[c.id].add(qid)
                    self.adj[qid].add(c.id)
        return kids

    # -- I/O -----------------------------------------------------------------
    def dump(self, path):
        """One prism per line: id level t0 t1 v0 ... vd."""
        with open(path, "w", encoding="utf-8") as fh:
            for pid in self.ids():
                p = self.prisms[pid]
                t0, t1 = self.time_interval(p)
                coords = " ".join("%.17g" % c for v in p.base.vertices
                                  for c in v)
                fh.write(f"{pid} {p.level} {t0:.17g} {t1:.17g} {coords}\n")


def _simplices_intersect(a, b):
    if a.d == 1:
        a0, a1 = sorted(v[0] for v in a.vertices)
        b0, b1 = sorted(v[0] for v in b.vertices)
        return a0 <= b1 and b0 <= a1
    return _triangles_intersect(a.vertices, b.vertices)


def _triangles_intersect(A, B):
    # separating axis test over the edge normals of both triangles
    for tri, other in ((A, B), (B, A)):
        for i in range(3):
            p, q = tri[i], tri[(i + 1) % 3]
            nx, ny = q[1] - p[1], p[0] - q[0]
            amin = min(nx * v[0] + ny * v[1] for v in A)
            amax = max(nx * v[0] + ny * v[1] for v in A)
            bmin = min(nx * v[0] + ny * v[1] for v in B)
            bmax = max(nx * v[0] + ny * v[1] for v in B)
            if amax < bmin or bmax < amin:
                return False
    return True


def initial_prism_mesh(dim, T, diagonal="main"):
    """Initial prismatic mesh of [0,T] x (0,1)^dim.

    For dim=1 the single prism covering the whole cylinder; for dim=2 two
    prisms over the unit square split along the chosen diagonal
    ('main' = (0,0)-(1,1), 'anti' = (1,0)-(0,1)).
    """
    if dim not in (1, 2):
        raise ValueError(f"unsupported spatial dimension {dim}")
    if T <= 0:
        raise ValueError("end time must be positive")
    mesh = PrismaticMesh(dim, T)
    if dim == 1:
        mesh._add(0, 0, Simplex([(0.0,), (1.0,)]))
        return mesh
    if diagonal == "main":
        tris = [Simplex([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]),
                Simplex([(0.0, 0.0), (1.0, 1.0), (0.0, 1.0)])]
    elif diagonal == "anti":
        tris = [Simplex([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]),
                Simplex([(1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])]
    else:
        raise ValueError("diagonal must be 'main' or 'anti'")
    a = mesh._add(0, 0, tris[0])
    b = mesh._add(0, 0, tris[1])
    mesh.adj[a.id].add(b.id)
    mesh.adj[b.id].add(a.id)
    return mesh


def refine(mesh, marked):
    """Refine the marked prisms plus the minimal closure that keeps level
    differences of intersecting prisms at most one."""
    marked = sorted(set(marked))
    for pid in marked:
        if pid not in mesh.prisms:
            raise KeyError(f"unknown prism id {pid}")
    out = mesh.copy()
    for pid in marked:
        if pid not in out.prisms:
            continue
        todo = [pid]
        while todo:
            q = todo[-1]
            if q not in out.prisms:
                todo.pop()
                continue
            lev = out.prisms[q].level
            coarser = sorted(r for r in out.adj[q]
                             if out.prisms[r].level < lev)
            if coarser:
                todo.extend(coarser)
            else:
                out._split(q)
                todo.pop()
    return out


def uniform_refine(mesh):
    """Refine every prism once (no closure is triggered)."""
    return refine(mesh, mesh.ids())


def facet_relations(mesh):
    """Classify every facet of every prism.

    Interior facets become `shared` or `master-slave` relations; boundary
    facets are tagged 'initial' (t=0), 'terminal' (t=T) or 'lateral'
    (on I x dOmega).  Any facet that cannot be classified raises
    InvalidMeshError.
    """
    lateral = {}
    horiz = {}
    for pid in mesh.ids():
        p = mesh.prisms[pid]
        tkey = (p.ti, p.level)
        for fk in p.base.facet_keys():
            lateral.setdefault((fk, tkey), []).append(pid)
        flo, fhi = p.time_fraction()
        for tp, which in ((flo, "bottom"), (fhi, "top")):
            horiz.setdefault((tp, p.base.key()), []).append((pid, which))

    report = FacetReport()

    # lateral facets
    unmatched = []
    for key, pids in sorted(lateral.items(), key=lambda kv: kv[1]):
        if len(pids) == 2:
            a, b = sorted(pids)
            report.interior.append(FacetRelation(
                "shared", "lateral",
                FacetRef(a, "lateral", key), FacetRef(b, "lateral", key)))
        elif len(pids) == 1:
            unmatched.append((key, pids[0]))
        else:
            raise InvalidMeshError(f"facet {key} bounds {len(pids)} prisms")
    for (fk, (ti, lev)), pid in unmatched:
        p = mesh.prisms[pid]
        parent_fk = p.base.edge_parent.get(fk) if mesh.dim == 2 else fk
        master_key = None
        if lev > 0 and parent_fk is not None:
            cand = (parent_fk, (ti // 2, lev - 1))
            if cand in lateral:
                master_key = cand
        if master_key is not None:
            mpid = lateral[master_key][0]
            report.interior.append(FacetRelation(
                "master-slave", "lateral",
                FacetRef(pid, "lateral", (fk, (ti, lev))),
                FacetRef(mpid, "lateral", master_key)))
        elif _on_domain_boundary(fk, mesh.dim):
            report.boundary.append(
                (FacetRef(pid, "lateral", (fk, (ti, lev))), "lateral"))
        # otherwise the facet must be the master of finer ones; the check
        # below confirms it shows up on the master side of some relation

    # verify every single-entry facet ended up classified
    classified = {(r.slave.key, r.slave.prism) for r in report.interior}
    classified |= {(r.master.key, r.master.prism) for r in report.interior}
    classified |= {(ref.key, ref.prism) for ref, _ in report.boundary}
    for (key, pid) in unmatched:
        if (key, pid) not in classified:
            raise InvalidMeshError(
                f"lateral facet {key} of prism {pid} has no partner")

    # horizontal facets
    hor_unmatched = []
    for key, entries in sorted(horiz.items(), key=lambda kv: kv[1]):
        if len(entries) == 2:
            (a, wa), (b, wb) = sorted(entries)
            if wa == wb:
                raise InvalidMeshError("horizontal facet orientation clash")
            report.interior.append(FacetRelation(
                "shared", "horizontal",
                FacetRef(a, "horizontal", key), FacetRef(b, "horizontal", key)))
        elif len(entries) == 1:
            hor_unmatched.append((key, entries[0]))
        else:
            raise InvalidMeshError("horizontal facet bounds >2 prisms")
    hor_index = horiz
    # (time point, parent base key, side) of every facet whose base has a
    # parent, for recognizing facets that act as masters of finer ones
    parent_sides = set()
    for (tp2, _), entries2 in hor_index.items():
        for (qid, qwhich) in entries2:
            q = mesh.prisms[qid]
            if q.base.parent is not None:
                parent_sides.add((tp2, q.base.parent.key(), qwhich))
    classified_h = set()
    for (tp, skey), (pid, which) in hor_unmatched:
        p = mesh.prisms[pid]
        if tp == (0, 0) and which == "bottom":
            report.boundary.append(
                (FacetRef(pid, "horizontal", (tp, skey)), "initial"))
            classified_h.add(((tp, skey), pid))
            continue
        if tp == (1, 0) and which == "top":
            report.boundary.append(
                (FacetRef(pid, "horizontal", (tp, skey)), "terminal"))
            classified_h.add(((tp, skey), pid))
            continue
        parent = p.base.parent
        master = None
        if parent is not None:
            cand = (tp, parent.key())
            for mp, mwhich in hor_index.get(cand, []):
                if mwhich != which:
                    master = (mp, cand)
        if master is not None:
            report.interior.append(FacetRelation(
                "master-slave", "horizontal",
                FacetRef(pid, "horizontal", (tp, skey)),
                FacetRef(master[0], "horizontal", master[1])))
            classified_h.add(((tp, skey), pid))
        else:
            # might itself be a master of finer facets on the other side
            other = "top" if which == "bottom" else "bottom"
            if (tp, skey, other) in parent_sides:
                classified_h.add(((tp, skey), pid))
            else:
                raise InvalidMeshError(
                    f"unclassified horizontal facet of prism {pid} at {tp}")
    return report


def _on_domain_boundary(fk, dim):
    if dim == 1:
        x = fk[0][0]
        return x == 0.0 or x == 1.0
    (a, b) = fk
    for axis in (0, 1):
        for val in (0.0, 1.0):
            if a[axis] == val and b[axis] == val:
                return True
    return False
