"""Tetrahedral mesh storage, adjacency, crack tagging and maintenance kernels.

A TetMesh keeps vertex reference coordinates, tets, patch tags for boundary
triangles, and the crack face pairing. The crack is stored as duplicated
triangles: each wake vertex exists twice (one copy per face), front vertices
are shared, so the displacement discontinuity closes exactly at the front.

The three maintenance operations (edge split, node merge, bistellar flips)
are functional: they return a new mesh plus a MaintenanceReport whose replay
on the old mesh reproduces the new topology. Split/merge/flip criteria are
evaluated in caller-supplied current material coordinates, not the stored
reference coordinates.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .predicates import insphere, orient3d


class MeshError(Exception):
    pass


def _tri_key(tri):
    return tuple(sorted(tri))


def _edge_key(edge):
    a, b = edge
    return (a, b) if a < b else (b, a)


def _tet_faces(tet):
    a, b, c, d = tet
    return (_tri_key((b, c, d)), _tri_key((a, c, d)),
            _tri_key((a, b, d)), _tri_key((a, b, c)))


def _tet_edges(tet):
    a, b, c, d = tet
    return (_edge_key((a, b)), _edge_key((a, c)), _edge_key((a, d)),
            _edge_key((b, c)), _edge_key((b, d)), _edge_key((c, d)))


def tet_volume_of(coords, tet):
    e = np.array([coords[tet[1]] - coords[tet[0]],
                  coords[tet[2]] - coords[tet[0]],
                  coords[tet[3]] - coords[tet[0]]])
    return float(np.linalg.det(e)) / 6.0


@dataclass
class MaintenanceReport:
    """Replayable log of topological maintenance.

    splits: (edge, new vertex id); merges: (removed vertex, target vertex);
    flips: (kind, old tet tuples, new tet tuples).
    """

    splits: list = field(default_factory=list)
    merges: list = field(default_factory=list)
    flips: list = field(default_factory=list)

    def __bool__(self):
        return bool(self.splits or self.merges or self.flips)

    def merge(self, other: "MaintenanceReport"):
        self.splits.extend(other.splits)
        self.merges.extend(other.merges)
        self.flips.extend(other.flips)


class TetMesh:
    """Tet mesh with patch tags and crack-face pairing.

    coords: vertex id -> reference position (length units).
    tets: tet id -> positively oriented 4-tuple of vertex ids.
    tri_tags: sorted vertex triple -> integer patch id (boundary and crack
        faces; crack faces carry ordinary patch ids as well).
    crack_pairs: list of aligned triples ((a+,b+,c+), (a-,b-,c-)); entries at
        equal positions are twins, shared entries are crack-front vertices.
    """

    def __init__(self, coords=None, tets=None, tri_tags=None, crack_pairs=None):
        self.coords: dict[int, np.ndarray] = {
            int(k): np.asarray(v, dtype=float) for k, v in (coords or {}).items()
        }
        self.tets: dict[int, tuple] = {}
        self.tri_tags: dict[tuple, int] = {
            _tri_key(k): int(v) for k, v in (tri_tags or {}).items()
        }
        self.crack_pairs: list[tuple] = [
            (tuple(p), tuple(m)) for p, m in (crack_pairs or [])
        ]
        self._adj = None
        for tid, tet in (tets or {}).items():
            self.add_tet(int(tid), tet)
        self._next_vid = max(self.coords, default=-1) + 1
        self._next_tid = max(self.tets, default=-1) + 1

    # ---------------------------------------------------------------- basic
    def copy(self) -> "TetMesh":
        m = TetMesh.__new__(TetMesh)
        m.coords = {k: v.copy() for k, v in self.coords.items()}
        m.tets = dict(self.tets)
        m.tri_tags = dict(self.tri_tags)
        m.crack_pairs = list(self.crack_pairs)
        m._adj = None
        m._next_vid = self._next_vid
        m._next_tid = self._next_tid
        return m

    def add_vertex(self, pos, vid=None) -> int:
        if vid is None:
            vid = self._next_vid
        if vid in self.coords:
            raise MeshError(f"duplicate vertex id {vid}")
        self.coords[vid] = np.asarray(pos, dtype=float)
        self._next_vid = max(self._next_vid, vid + 1)
        self._adj = None
        return vid

    def add_tet(self, tid, tet) -> int:
        tet = tuple(int(v) for v in tet)
        if len(set(tet)) != 4:
            raise MeshError(f"tet {tid} has repeated vertices: {tet}")
        for v in tet:
            if v not in self.coords:
                raise MeshError(f"tet {tid} references unknown vertex {v}")
        vol = tet_volume_of(self.coords, tet)
        if vol < 0.0:
            tet = (tet[0], tet[2], tet[1], tet[3])
            vol = -vol
        if vol == 0.0:
            raise MeshError(f"tet {tid} has zero reference volume")
        self.tets[tid] = tet
        self._next_tid = max(getattr(self, "_next_tid", 0), tid + 1)
        self._adj = None
        return tid

    def new_tet(self, tet) -> int:
        return self.add_tet(self._next_tid, tet)

    def remove_tet(self, tid):
        del self.tets[tid]
        self._adj = None

    @property
    def n_vertices(self):
        return len(self.coords)

    @property
    def n_tets(self):
        return len(self.tets)

    # ------------------------------------------------------------ adjacency
    def _build_adjacency(self):
        tri_to_tets: dict[tuple, list] = {}
        edge_to_tets: dict[tuple, list] = {}
        vert_to_tets: dict[int, set] = {v: set() for v in self.coords}
        for tid, tet in self.tets.items():
            for f in _tet_faces(tet):
                tri_to_tets.setdefault(f, []).append(tid)
            for e in _tet_edges(tet):
                edge_to_tets.setdefault(e, []).append(tid)
            for v in tet:
                vert_to_tets[v].add(tid)
        vert_to_edges: dict[int, set] = {v: set() for v in self.coords}
        for e in edge_to_tets:
            vert_to_edges[e[0]].add(e)
            vert_to_edges[e[1]].add(e)
        self._adj = {
            "tri_to_tets": tri_to_tets,
            "edge_to_tets": edge_to_tets,
            "vert_to_tets": vert_to_tets,
            "vert_to_edges": vert_to_edges,
        }

    def _a(self, key):
        if self._adj is None:
            self._build_adjacency()
        return self._adj[key]

    @property
    def edges(self):
        return self._a("edge_to_tets").keys()

    @property
    def triangles(self):
        return self._a("tri_to_tets").keys()

    def tets_of_triangle(self, tri):
        return self._a("tri_to_tets").get(_tri_key(tri), [])

    def tets_of_edge(self, edge):
        return self._a("edge_to_tets").get(_edge_key(edge), [])

    def tets_of_vertex(self, v):
        return self._a("vert_to_tets").get(v, set())

    def edges_of_vertex(self, v):
        if v not in self.coords:
            raise MeshError(f"unknown vertex {v}")
        return self._a("vert_to_edges").get(v, set())

    def boundary_triangles(self):
        return {t for t, tids in self._a("tri_to_tets").items() if len(tids) == 1}

    def crack_triangles(self):
        out = set()
        for p, m in self.crack_pairs:
            out.add(_tri_key(p))
            out.add(_tri_key(m))
        return out

    def crack_vertices(self):
        out = set()
        for p, m in self.crack_pairs:
            out.update(p)
            out.update(m)
        return out

    def twin_map(self):
        """Vertex twin map across the crack (front vertices map to nothing)."""
        twin = {}
        for p, m in self.crack_pairs:
            for a, b in zip(p, m):
                if a != b:
                    twin[a] = b
                    twin[b] = a
        return twin

    def vertex_patches(self):
        """vertex id -> set of patch ids of tagged triangles containing it."""
        vp: dict[int, set] = {v: set() for v in self.coords}
        for tri, pid in self.tri_tags.items():
            for v in tri:
                vp[v].add(pid)
        return vp

    # ------------------------------------------------------------ integrity
    def validate(self):
        """Raise MeshError on any violated structural invariant."""
        tri_to_tets = self._a("tri_to_tets")
        crack = self.crack_triangles()
        for tri, tids in tri_to_tets.items():
            if len(tids) > 2:
                raise MeshError(f"triangle {tri} bounds {len(tids)} tets")
            if tri in crack and len(tids) != 1:
                raise MeshError(f"crack face {tri} bounds {len(tids)} tets")
        for tri in self.tri_tags:
            if tri not in tri_to_tets:
                raise MeshError(f"tagged triangle {tri} is not a face of any tet")
            if len(tri_to_tets[tri]) != 1:
                raise MeshError(f"tagged triangle {tri} is interior")
        for tid, tet in self.tets.items():
            if tet_volume_of(self.coords, tet) <= 0.0:
                raise MeshError(f"tet {tid} has non-positive reference volume")
        for p, m in self.crack_pairs:
            for tri in (p, m):
                key = _tri_key(tri)
                if key not in tri_to_tets or len(tri_to_tets[key]) != 1:
                    raise MeshError(f"crack pair triangle {tri} missing or interior")
        # boundary must be a closed 2-manifold: each boundary edge on 2 faces
        bedges: dict[tuple, int] = {}
        for tri in self.boundary_triangles():
            for i in range(3):
                e = _edge_key((tri[i], tri[(i + 1) % 3]))
                bedges[e] = bedges.get(e, 0) + 1
        for e, cnt in bedges.items():
            if cnt != 2:
                raise MeshError(f"boundary edge {e} lies on {cnt} boundary faces")

    def euler_characteristic(self) -> int:
        v = len({v for tet in self.tets.values() for v in tet})
        e = len(self.edges)
        f = len(self._a("tri_to_tets"))
        t = len(self.tets)
        return v - e + f - t

    def topology_hash(self) -> str:
        h = hashlib.sha256()
        for tet in sorted(tuple(sorted(t)) for t in self.tets.values()):
            h.update(repr(tet).encode())
        for tri in sorted(self.tri_tags):
            h.update(repr((tri, self.tri_tags[tri])).encode())
        for p, m in sorted((_tri_key(p), _tri_key(m)) for p, m in self.crack_pairs):
            h.update(repr((p, m)).encode())
        return h.hexdigest()


# ------------------------------------------------------------------ queries

def extract_crack_front(mesh: TetMesh):
    """Vertices and edges shared by the two crack faces.

    Returns (frozenset of vertex ids, frozenset of edge keys); empty for an
    untagged mesh. Raises MeshError on inconsistent pairing.
    """
    if not mesh.crack_pairs:
        return frozenset(), frozenset()
    tri_to_tets = mesh._a("tri_to_tets")
    plus_verts, minus_verts = set(), set()
    plus_edges, minus_edges = set(), set()
    for p, m in mesh.crack_pairs:
        for tri, vs, es in ((p, plus_verts, plus_edges), (m, minus_verts, minus_edges)):
            key = _tri_key(tri)
            if key not in tri_to_tets or len(tri_to_tets[key]) != 1:
                raise MeshError(f"crack face {tri} without valid partner/support")
            vs.update(tri)
            for i in range(3):
                es.add(_edge_key((tri[i], tri[(i + 1) % 3])))
    front_verts = plus_verts & minus_verts
    front_edges = {
        e for e in plus_edges & minus_edges
        if e[0] in front_verts and e[1] in front_verts
    }
    return frozenset(front_verts), frozenset(front_edges)


def surface_patches(mesh: TetMesh):
    """Partition of boundary triangles by patch id; unlabeled boundary is an error."""
    patches: dict[int, set] = {}
    for tri in mesh.boundary_triangles():
        if tri not in mesh.tri_tags:
            raise MeshError(f"unlabeled boundary triangle {tri}")
        patches.setdefault(mesh.tri_tags[tri], set()).add(tri)
    return patches


def front_patch_tets(mesh: TetMesh, hops: int = 2):
    """Tets within `hops` edge-hops of crack-front vertices."""
    front_verts, _ = extract_crack_front(mesh)
    if not front_verts:
        return set()
    verts = set(front_verts)
    for _ in range(max(hops - 1, 0)):
        grow = set()
        for v in verts:
            for e in mesh.edges_of_vertex(v):
                grow.update(e)
        verts |= grow
    tets = set()
    for v in verts:
        tets.update(mesh.tets_of_vertex(v))
    return tets


# ------------------------------------------------------- split/merge checks

def _adjacent_lengths(mesh: TetMesh, vertex: int, pos):
    edges = sorted(mesh.edges_of_vertex(vertex))
    if not edges:
        raise MeshError(f"vertex {vertex} has no adjacent edges")
    lengths = np.array([np.linalg.norm(np.asarray(pos[a]) - np.asarray(pos[b]))
                        for a, b in edges])
    return edges, lengths


def needs_edge_split(mesh: TetMesh, vertex: int, pos):
    """Longest adjacent edge if it exceeds 1.5x the mean adjacent length.

    Lengths are measured in the supplied current material coordinates.
    """
    edges, lengths = _adjacent_lengths(mesh, vertex, pos)
    k = int(np.argmax(lengths))
    if lengths[k] > 1.5 * lengths.mean():
        return edges[k]
    return None


def needs_node_merge(mesh: TetMesh, vertex: int, pos):
    """Shortest adjacent edge if shorter than 1/3 of the longest adjacent edge."""
    edges, lengths = _adjacent_lengths(mesh, vertex, pos)
    k = int(np.argmin(lengths))
    if lengths[k] < lengths.max() / 3.0:
        return edges[k]
    return None


# ------------------------------------------------------------------- split

def _split_single_edge(mesh: TetMesh, edge, fields):
    """Insert a midpoint vertex on `edge`; updates tets and tri tags only."""
    u, v = _edge_key(edge)
    incident = list(mesh.tets_of_edge((u, v)))
    if not incident:
        raise MeshError(f"edge {(u, v)} does not exist")
    w = mesh.add_vertex(0.5 * (mesh.coords[u] + mesh.coords[v]))
    for name, data in fields.items():
        data[w] = 0.5 * (np.asarray(data[u]) + np.asarray(data[v]))
    xpos = fields.get("X")
    for tid in incident:
        tet = mesh.tets[tid]
        mesh.remove_tet(tid)
        for old in (u, v):
            child = tuple(w if vv == old else vv for vv in tet)
            cid = mesh.new_tet(child)
            if xpos is not None and tet_volume_of(xpos, mesh.tets[cid]) <= 0.0:
                raise MeshError(
                    f"split of edge {(u, v)} creates a degenerate tet in material coordinates"
                )
    retag = [tri for tri in list(mesh.tri_tags) if u in tri and v in tri]
    for tri in retag:
        pid = mesh.tri_tags.pop(tri)
        for old in (u, v):
            mesh.tri_tags[_tri_key(tuple(w if vv == old else vv for vv in tri))] = pid
    return w


def _split_pair_children(tri, u, v, w):
    """The two child triples of an aligned crack triangle split on (u, v)."""
    out = []
    for old in (u, v):
        out.append((old, tuple(w if vv == old else vv for vv in tri)))
    return out


def split_edge(mesh: TetMesh, edge, fields=None):
    """Split an edge at its midpoint; each incident tet becomes two.

    `fields` maps field names to vertex-keyed dicts; they are updated in
    place with linearly interpolated midpoint values (exact for linear
    fields). If the edge lies on a crack face, the twin edge across the
    discontinuity is split in the same operation and the pairing is retiled.
    Returns (new mesh, MaintenanceReport).
    """
    fields = fields or {}
    m = mesh.copy()
    report = MaintenanceReport()
    u, v = _edge_key(edge)
    if not m.tets_of_edge((u, v)):
        raise MeshError(f"edge {(u, v)} does not exist")
    twin = m.twin_map()
    edges_to_split = [(u, v)]
    tu, tv = twin.get(u, u), twin.get(v, v)
    if (tu, tv) != (u, v):
        on_crack = any(u in _tri_key(p) and v in _tri_key(p)
                       for pm in m.crack_pairs for p in pm)
        if on_crack:
            if not m.tets_of_edge((tu, tv)):
                raise MeshError(f"twin edge {(tu, tv)} missing for crack split")
            edges_to_split.append(_edge_key((tu, tv)))

    new_vids = {}
    for e in edges_to_split:
        w = _split_single_edge(m, e, fields)
        new_vids[e] = w
        report.splits.append((e, w))

    if m.crack_pairs:
        new_pairs = []
        for p, mn in m.crack_pairs:
            split_here = None
            for e in edges_to_split:
                a, b = e
                if a in p and b in p:
                    split_here = ("plus", e)
                    break
                if a in mn and b in mn:
                    split_here = ("minus", e)
                    break
            if split_here is None:
                new_pairs.append((p, mn))
                continue
            side, e = split_here
            a, b = e
            w = new_vids[e]
            if side == "plus":
                ta, tb = twin.get(a, a), twin.get(b, b)
                ew = new_vids.get(_edge_key((ta, tb)), w)
                kids_p = dict(_split_pair_children(p, a, b, w))
                kids_m = dict(_split_pair_children(mn, ta, tb, ew))
                for old_p, child_p in kids_p.items():
                    partner_old = twin.get(old_p, old_p)
                    new_pairs.append((child_p, kids_m[partner_old]))
            else:
                ta, tb = twin.get(a, a), twin.get(b, b)
                ew = new_vids.get(_edge_key((ta, tb)), w)
                kids_m = dict(_split_pair_children(mn, a, b, w))
                kids_p = dict(_split_pair_children(p, ta, tb, ew))
                for old_m, child_m in kids_m.items():
                    partner_old = twin.get(old_m, old_m)
                    new_pairs.append((kids_p[partner_old], child_m))
        m.crack_pairs = new_pairs
        # a shared (front) split vertex pairs with itself; twins pair crosswise
    return m, report


# ------------------------------------------------------------------- merge

def merge_nodes(mesh: TetMesh, edge, fields=None, absorb=None):
    """Collapse an edge, absorbing one endpoint into the other.

    The absorbed vertex must not carry surface constraints the target lacks
    (its patch set must be a subset of the target's). By default the less
    constrained endpoint is absorbed. Fields lose the absorbed entry and are
    otherwise untouched. Returns (new mesh, MaintenanceReport).
    """
    fields = fields or {}
    u, v = _edge_key(edge)
    if not mesh.tets_of_edge((u, v)):
        raise MeshError(f"edge {(u, v)} does not exist")
    front_verts, _ = extract_crack_front(mesh)
    crack_verts = mesh.crack_vertices()
    wake = (crack_verts - front_verts)
    if u in wake or v in wake:
        raise MeshError("refusing to merge across a crack face")
    if (u in front_verts) != (v in front_verts):
        raise MeshError("cannot merge a crack-front vertex with a non-front vertex")

    vp = mesh.vertex_patches()
    if absorb is None:
        # absorb the vertex with fewer boundary constraints
        if len(vp[u]) <= len(vp[v]):
            absorb, target = u, v
        else:
            absorb, target = v, u
        if not vp[absorb] <= vp[target]:
            raise MeshError(
                f"merge of {(u, v)} would collapse across a surface-patch boundary"
            )
    else:
        target = v if absorb == u else u
        if absorb not in (u, v):
            raise MeshError(f"vertex {absorb} is not an endpoint of {(u, v)}")
        if not vp[absorb] <= vp[target]:
            raise MeshError(
                f"cannot absorb vertex {absorb} (patches {sorted(vp[absorb])}) "
                f"into {target} (patches {sorted(vp[target])})"
            )

    m = mesh.copy()
    report = MaintenanceReport()
    dead = [tid for tid in m.tets_of_edge((u, v))]
    repoint = [tid for tid in m.tets_of_vertex(absorb) if tid not in dead]
    for tid in dead:
        m.remove_tet(tid)
    xpos = fields.get("X")
    for tid in repoint:
        tet = tuple(target if vv == absorb else vv for vv in m.tets[tid])
        if len(set(tet)) != 4:
            raise MeshError("merge produces a degenerate tet")
        if tet_volume_of(m.coords, tet) <= 0.0:
            raise MeshError(f"merge of {(u, v)} inverts tet {tid} in reference coordinates")
        if xpos is not None and tet_volume_of(xpos, tet) <= 0.0:
            raise MeshError(f"merge of {(u, v)} inverts tet {tid} in material coordinates")
        m.remove_tet(tid)
        m.add_tet(tid, tet)

    for tri in [t for t in list(m.tri_tags) if absorb in t]:
        pid = m.tri_tags.pop(tri)
        if target in tri:
            continue  # degenerate face disappears
        newtri = _tri_key(tuple(target if vv == absorb else vv for vv in tri))
        if newtri in m.tri_tags and m.tri_tags[newtri] != pid:
            raise MeshError(f"merge collides patch tags on {newtri}")
        m.tri_tags[newtri] = pid

    if m.crack_pairs:  # only front-front merges reach here
        new_pairs = []
        for p, mn in m.crack_pairs:
            if absorb in p or absorb in mn:
                p = tuple(target if vv == absorb else vv for vv in p)
                mn = tuple(target if vv == absorb else vv for vv in mn)
                if len(set(p)) != 3:
                    continue
            new_pairs.append((p, mn))
        m.crack_pairs = new_pairs

    del m.coords[absorb]
    for data in fields.values():
        data.pop(absorb, None)
    m._adj = None
    report.merges.append((absorb, target))
    return m, report


# ------------------------------------------------------------------- flips

def _positive(coords, tet):
    return tet_volume_of(coords, tet) > 0.0


def _volumes_match(coords, old_tets, new_tets, rel=1e-9):
    vo = sum(abs(tet_volume_of(coords, t)) for t in old_tets)
    vn = sum(abs(tet_volume_of(coords, t)) for t in new_tets)
    return abs(vo - vn) <= rel * max(vo, vn)


def _flip_valid(m: TetMesh, old_tets, cand, pos):
    for cs in (m.coords, pos):
        for t in cand:
            if not _positive(cs, t) and not _positive(cs, (t[0], t[1], t[3], t[2])):
                return False
        if not _volumes_match(cs, old_tets, cand):
            return False
    return True


def _try_flip23(m: TetMesh, tri, pos):
    tids = m.tets_of_triangle(tri)
    if len(tids) != 2:
        return None
    t1, t2 = (m.tets[t] for t in tids)
    d = next(v for v in t1 if v not in tri)
    e = next(v for v in t2 if v not in tri)
    p, q, r = tri
    cand = [(d, e, p, q), (d, e, q, r), (d, e, r, p)]
    if not _flip_valid(m, [m.tets[t] for t in tids], cand, pos):
        return None
    old = tuple(m.tets[t] for t in tids)
    for t in tids:
        m.remove_tet(t)
    new = tuple(m.new_tet(t) for t in cand)
    return ("2-3", old, tuple(m.tets[t] for t in new), {})


def _try_flip32(m: TetMesh, edge, pos):
    tids = m.tets_of_edge(edge)
    if len(tids) != 3:
        return None
    a, b = edge
    if any(a in tri and b in tri for tri in m.tri_tags):
        return None  # edge on a tagged surface: removing it would retile the boundary
    ring = []
    for t in tids:
        ring.extend(v for v in m.tets[t] if v not in edge)
    ring = list(dict.fromkeys(ring))
    if len(ring) != 3:
        return None
    c1, c2, c3 = ring
    cand = [(c1, c2, c3, a), (c3, c2, c1, b)]
    if not _flip_valid(m, [m.tets[t] for t in tids], cand, pos):
        return None
    old = tuple(m.tets[t] for t in tids)
    for t in tids:
        m.remove_tet(t)
    new = tuple(m.new_tet(t) for t in cand)
    return ("3-2", old, tuple(m.tets[t] for t in new), {})


def _try_flip22(m: TetMesh, edge, pos, crack):
    """2D-style diagonal flip of a coplanar boundary quad (2 tets -> 2 tets)."""
    tids = m.tets_of_edge(edge)
    if len(tids) != 2:
        return None
    i, k = edge
    t1, t2 = (m.tets[t] for t in tids)
    shared = set(t1) & set(t2)
    if len(shared) != 3 or not {i, k} <= shared:
        return None
    mv = next(iter(shared - {i, k}))
    j = next(v for v in t1 if v not in shared)
    l = next(v for v in t2 if v not in shared)
    f1, f2 = _tri_key((i, k, j)), _tri_key((i, k, l))
    if f1 not in m.tri_tags or f2 not in m.tri_tags:
        return None
    if m.tri_tags[f1] != m.tri_tags[f2]:
        return None
    if f1 in crack or f2 in crack:
        return None
    # coplanarity of the boundary quad in material coordinates
    pts = [pos[i], pos[j], pos[k], pos[l]]
    scale = max(np.linalg.norm(np.asarray(pts[r]) - np.asarray(pts[0])) for r in (1, 2, 3))
    vol = tet_volume_of({0: np.asarray(pts[0]), 1: np.asarray(pts[1]),
                         2: np.asarray(pts[2]), 3: np.asarray(pts[3])}, (0, 1, 2, 3))
    if abs(vol) > 1e-9 * scale**3:
        return None
    cand = [(i, j, l, mv), (j, k, l, mv)]
    if not _flip_valid(m, [m.tets[t] for t in tids], cand, pos):
        return None
    pid = m.tri_tags[f1]
    old = tuple(m.tets[t] for t in tids)
    for t in tids:
        m.remove_tet(t)
    new = tuple(m.new_tet(t) for t in cand)
    del m.tri_tags[f1]
    del m.tri_tags[f2]
    g1, g2 = _tri_key((i, j, l)), _tri_key((j, k, l))
    m.tri_tags[g1] = pid
    m.tri_tags[g2] = pid
    tags = {"removed": (f1, f2), "added": ((g1, pid), (g2, pid))}
    return ("2-2", old, tuple(m.tets[t] for t in new), tags)


def _face_delaunay_violated(m: TetMesh, tri, pos):
    tids = m.tets_of_triangle(tri)
    if len(tids) != 2:
        return False
    t1, t2 = (m.tets[t] for t in tids)
    e = next(v for v in t2 if v not in tri)
    pa, pb, pc, pd = (pos[v] for v in t1)
    return insphere(pa, pb, pc, pd, pos[e]) > 0


def delaunay_flip_pass(mesh: TetMesh, patch_tets, pos, max_sweeps: int = 10):
    """Local bistellar flips until checked faces pass the empty-circumsphere test.

    patch_tets restricts the checked region (tets touching its vertex set
    stay checked as flips retile them). The pass is bounded by max_sweeps
    with a no-progress exit; unflippable configurations are skipped.
    Returns (new mesh, MaintenanceReport).
    """
    m = mesh.copy()
    report = MaintenanceReport()
    patch_verts = set()
    for tid in patch_tets:
        if tid in mesh.tets:
            patch_verts.update(mesh.tets[tid])
    if not patch_verts:
        return m, report
    crack = m.crack_triangles()
    for _ in range(max_sweeps):
        changed = 0
        tri_to_tets = dict(m._a("tri_to_tets"))
        for tri, tids in tri_to_tets.items():
            if len(tids) != 2 or tri in crack:
                continue
            if not any(v in patch_verts for v in tri):
                continue
            if not all(t in m.tets for t in tids):
                continue  # retiled earlier in this sweep
            if m.tets_of_triangle(tri) != tids and len(m.tets_of_triangle(tri)) != 2:
                continue
            if not _face_delaunay_violated(m, tri, pos):
                continue
            flip = _try_flip23(m, tri, pos)
            if flip is None:
                for e in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[0], tri[2])]:
                    flip = _try_flip32(m, _edge_key(e), pos)
                    if flip is not None:
                        break
            if flip is None:
                for e in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[0], tri[2])]:
                    flip = _try_flip22(m, _edge_key(e), pos, crack)
                    if flip is not None:
                        break
            if flip is not None:
                report.flips.append(flip)
                changed += 1
        if changed == 0:
            break
    return m, report


# ------------------------------------------------------------------ replay

def replay(report: MaintenanceReport, mesh: TetMesh) -> TetMesh:
    """Re-apply a maintenance report to the mesh it was generated from.

    Reproduces the resulting topology (hash-identical) for the solver's
    maintenance order flips -> merges -> splits.
    """
    m = mesh.copy()
    for kind, old, new, tags in report.flips:
        old_keys = {tuple(sorted(t)) for t in old}
        dead = [tid for tid, tet in m.tets.items() if tuple(sorted(tet)) in old_keys]
        if len(dead) != len(old):
            raise MeshError("replay: flip source tets not found")
        for tid in dead:
            m.remove_tet(tid)
        for tet in new:
            m.new_tet(tet)
        for tri in tags.get("removed", ()):
            m.tri_tags.pop(tri, None)
        for tri, pid in tags.get("added", ()):
            m.tri_tags[tri] = pid
    for removed, target in report.merges:
        m, _ = merge_nodes(m, _edge_key((removed, target)), absorb=removed)
    recorded = dict(report.splits)
    done: set = set()
    for edge, _w in report.splits:
        if edge in done:
            continue  # twin edge split together with its partner
        m, rep = split_edge(m, edge)
        for e2, nw in rep.splits:
            done.add(e2)
            orig = recorded.get(e2)
            if orig is not None and orig != nw:
                m = _rename_vertex(m, nw, orig)
    return m


def _rename_vertex(mesh: TetMesh, old: int, new: int) -> TetMesh:
    if new in mesh.coords:
        return mesh
    m = mesh.copy()
    m.coords[new] = m.coords.pop(old)
    m.tets = {tid: tuple(new if v == old else v for v in tet)
              for tid, tet in m.tets.items()}
    m.tri_tags = {_tri_key(tuple(new if v == old else v for v in tri)): pid
                  for tri, pid in m.tri_tags.items()}
    m.crack_pairs = [
        (tuple(new if v == old else v for v in p), tuple(new if v == old else v for v in mm))
        for p, mm in m.crack_pairs
    ]
    m._adj = None
    m._next_vid = max(m.coords, default=-1) + 1
    return m
