"""Structured tet meshes, crack insertion, and benchmark geometry builders.

These are fixtures for the verification benchmarks and tests, not a general
mesher: Kuhn-subdivided boxes (optionally mirror-symmetric about the crack
plane), a cutter that turns a set of interior triangles into a duplicated
crack with a correctly shared front, and the double-cantilever / notched
three-point-bend geometries.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np

from .mesh import MeshError, TetMesh, _edge_key, _tri_key

# default box patch ids
XMIN, XMAX, YMIN, YMAX, ZMIN, ZMAX = 1, 2, 3, 4, 5, 6


def box_mesh(nx, ny, nz, lengths=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0),
             symmetric_y: bool = False, tagger=None) -> TetMesh:
    """Kuhn-subdivided box: nx*ny*nz cubes, 6 tets each.

    With symmetric_y, the lower half is the mirror image of the upper half
    about the midplane (requires even ny); the shared plane triangulation
    matches pointwise, so the mesh is conforming and reflection symmetric.
    """
    lx, ly, lz = lengths
    ox, oy, oz = origin
    if symmetric_y and ny % 2:
        raise ValueError("symmetric_y needs an even cube count in y")

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    coords = {}
    for i in range(nx + 1):
        for j in range(ny + 1):
            for k in range(nz + 1):
                coords[vid(i, j, k)] = np.array(
                    [ox + lx * i / nx, oy + ly * j / ny, oz + lz * k / nz]
                )

    tets = {}
    tid = 0
    jmid = ny // 2
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                mirror = symmetric_y and j < jmid
                for tet in _cube_tets_for(vid, i, j, k, mirror):
                    tets[tid] = tet
                    tid += 1

    mesh = TetMesh(coords=coords, tets=tets)
    _tag_box(mesh, origin, lengths, tagger)
    return mesh


def _cube_tets_for(vid, i, j, k, mirror):
    def corner(dx, dy, dz):
        if mirror:
            dy = 1 - dy
        return vid(i + dx, j + dy, k + dz)

    out = []
    for perm in permutations(range(3)):
        path = [np.zeros(3, dtype=int)]
        for ax in perm:
            step = path[-1].copy()
            step[ax] = 1
            path.append(step)
        out.append(tuple(corner(*p) for p in path))
    return out


def _tag_box(mesh: TetMesh, origin, lengths, tagger=None, tol=1e-9):
    ox, oy, oz = origin
    lx, ly, lz = lengths

    def default_tagger(centroid):
        x, y, z = centroid
        if abs(x - ox) < tol:
            return XMIN
        if abs(x - ox - lx) < tol:
            return XMAX
        if abs(y - oy) < tol:
            return YMIN
        if abs(y - oy - ly) < tol:
            return YMAX
        if abs(z - oz) < tol:
            return ZMIN
        if abs(z - oz - lz) < tol:
            return ZMAX
        return None

    tagger = tagger or default_tagger
    for tri in mesh.boundary_triangles():
        centroid = sum(mesh.coords[v] for v in tri) / 3.0
        pid = tagger(centroid)
        if pid is None:
            raise MeshError(f"untaggable boundary triangle at {centroid}")
        mesh.tri_tags[tri] = pid


def single_tet_mesh() -> TetMesh:
    coords = {0: (0.0, 0.0, 0.0), 1: (1.0, 0.0, 0.0),
              2: (0.0, 1.0, 0.0), 3: (0.0, 0.0, 1.0)}
    m = TetMesh(coords=coords, tets={0: (0, 1, 2, 3)})
    for tri in m.boundary_triangles():
        m.tri_tags[tri] = 1
    return m


# --------------------------------------------------------- crack insertion

def _orient_patch(mesh: TetMesh, tri_set):
    """Consistently oriented triples for a set of interior triangles."""
    keys = [_tri_key(t) for t in tri_set]
    keyset = set(keys)
    edge_to_tris = {}
    for t in keyset:
        for i in range(3):
            edge_to_tris.setdefault(_edge_key((t[i], t[(i + 1) % 3])), []).append(t)
    oriented = {}
    stack = [keys[0]]
    oriented[keys[0]] = keys[0]
    while stack:
        t = stack.pop()
        a, b, c = oriented[t]
        for e, flip in (((a, b), (b, a)), ((b, c), (c, b)), ((c, a), (a, c))):
            for nb in edge_to_tris[_edge_key(e)]:
                if nb in oriented or nb == t:
                    continue
                other = next(v for v in nb if v not in e)
                # neighbour must traverse the shared edge in the opposite sense
                oriented[nb] = (flip[0], flip[1], other)
                stack.append(nb)
    if len(oriented) != len(keyset):
        raise MeshError("crack triangle set is not edge-connected")
    return oriented


def insert_crack(mesh: TetMesh, tri_set, patch_plus: int, patch_minus: int) -> TetMesh:
    """Cut the mesh along interior triangles, producing duplicated crack faces.

    Vertices interior to the cut (and on the body boundary along its trace)
    are duplicated; endpoints of interior rim edges stay shared and become
    the crack front, where the displacement discontinuity closes.
    """
    keyset = {_tri_key(t) for t in tri_set}
    tri_to_tets = mesh._a("tri_to_tets")
    for t in keyset:
        if len(tri_to_tets.get(t, ())) != 2:
            raise MeshError(f"crack triangle {t} is not interior")

    # rim edges: on exactly one cut triangle
    edge_count = {}
    for t in keyset:
        for i in range(3):
            e = _edge_key((t[i], t[(i + 1) % 3]))
            edge_count[e] = edge_count.get(e, 0) + 1
    rim = {e for e, c in edge_count.items() if c == 1}
    boundary_edges = set()
    for tri in mesh.boundary_triangles():
        for i in range(3):
            boundary_edges.add(_edge_key((tri[i], tri[(i + 1) % 3])))
    front_edges = rim - boundary_edges
    front_verts = {v for e in front_edges for v in e}
    cut_verts = {v for t in keyset for v in t}
    dup_verts = cut_verts - front_verts

    oriented = _orient_patch(mesh, keyset)

    def plus_side(tet, tri_oriented):
        a, b, c = tri_oriented
        d = next(v for v in tet if v not in tri_oriented)
        ca, cb, cc, cd = (mesh.coords[v] for v in (a, b, c, d))
        return float(np.linalg.det(np.array([cb - ca, cc - ca, cd - ca]))) > 0.0

    # classify the tet star of each duplicated vertex (all on the original mesh)
    minus_tets_of = {}
    for v in dup_verts:
        star = list(mesh.tets_of_vertex(v))
        adj = {t: set() for t in star}
        star_set = set(star)
        for t in star:
            for f in _tet_faces_local(mesh.tets[t]):
                if v not in f or f in keyset:
                    continue
                for o in tri_to_tets.get(f, ()):
                    if o != t and o in star_set:
                        adj[t].add(o)
        comps = []
        seen = set()
        for t in star:
            if t in seen:
                continue
            comp = {t}
            stack = [t]
            seen.add(t)
            while stack:
                cur = stack.pop()
                for o in adj[cur]:
                    if o not in seen:
                        seen.add(o)
                        comp.add(o)
                        stack.append(o)
            comps.append(comp)
        if len(comps) != 2:
            raise MeshError(f"crack does not split the star of vertex {v} in two "
                            f"({len(comps)} components)")
        comp_sign = []
        for comp in comps:
            sign = None
            for t in comp:
                for f in _tet_faces_local(mesh.tets[t]):
                    if f in keyset and v in f:
                        sign = plus_side(mesh.tets[t], oriented[f])
                        break
                if sign is not None:
                    break
            comp_sign.append(sign)
        if comp_sign[0] == comp_sign[1]:
            raise MeshError(f"inconsistent crack side classification at vertex {v}")
        minus_tets_of[v] = comps[0] if comp_sign[0] is False else comps[1]

    out = mesh.copy()
    twin = {}
    for v in dup_verts:
        twin[v] = out.add_vertex(mesh.coords[v].copy())

    # retarget minus-side tets and their boundary tags
    newtets = {tid: list(tet) for tid, tet in out.tets.items()}
    for v, tids in minus_tets_of.items():
        for tid in tids:
            newtets[tid] = [twin[v] if vv == v else vv for vv in newtets[tid]]
    tag_moves = {}
    for tri, pid in list(out.tri_tags.items()):
        owner = mesh.tets_of_triangle(tri)
        if not owner:
            continue
        tid = owner[0]
        newtri = _tri_key(tuple(
            twin[v] if (v in twin and tid in minus_tets_of.get(v, ())) else v
            for v in tri))
        if newtri != tri:
            tag_moves[tri] = (newtri, pid)
    for tri, (newtri, pid) in tag_moves.items():
        del out.tri_tags[tri]
        out.tri_tags[newtri] = pid

    out.tets = {}
    out._adj = None
    for tid, tet in newtets.items():
        out.add_tet(tid, tet)

    pairs = []
    for key in keyset:
        a, b, c = oriented[key]
        plus_tri = (a, b, c)
        minus_tri = tuple(twin.get(v, v) for v in plus_tri)
        pairs.append((plus_tri, minus_tri))
        out.tri_tags[_tri_key(plus_tri)] = patch_plus
        out.tri_tags[_tri_key(minus_tri)] = patch_minus
    out.crack_pairs = pairs
    out.validate()
    return out


def _tet_faces_local(tet):
    a, b, c, d = tet
    return (_tri_key((b, c, d)), _tri_key((a, c, d)),
            _tri_key((a, b, d)), _tri_key((a, b, c)))


# ---------------------------------------------------------------- DCB rig

DCB_PATCHES = {
    "mouth_top": 7, "mouth_bottom": 8, "clamped": 2,
    "bottom": 3, "top": 4, "side_z0": 5, "side_z1": 6,
    "crack_plus": 101, "crack_minus": 102,
}


def dcb_mesh(length=120.0, height=8.0, thickness=2.0, a0=36.0,
             nx=40, ny=4, nz=2):
    """Double cantilever beam: box with a midplane pre-crack of length a0.

    The mouth face x=0 is split into top/bottom arm patches for opening
    tractions; the far face x=length is the clamped patch. Returns
    (mesh, patch id map).
    """
    p = DCB_PATCHES
    tol = 1e-9
    ymid = height / 2.0

    def tagger(c):
        x, y, z = c
        if abs(x) < tol:
            return p["mouth_top"] if y > ymid else p["mouth_bottom"]
        if abs(x - length) < tol:
            return p["clamped"]
        if abs(y) < tol:
            return p["bottom"]
        if abs(y - height) < tol:
            return p["top"]
        if abs(z) < tol:
            return p["side_z0"]
        if abs(z - thickness) < tol:
            return p["side_z1"]
        return None

    mesh = box_mesh(nx, ny, nz, lengths=(length, height, thickness),
                    symmetric_y=True, tagger=tagger)
    crack = []
    for tri, tets in mesh._a("tri_to_tets").items():
        if len(tets) != 2:
            continue
        pts = np.array([mesh.coords[v] for v in tri])
        if np.all(np.abs(pts[:, 1] - ymid) < tol) and np.max(pts[:, 0]) <= a0 + tol:
            crack.append(tri)
    if not crack:
        raise MeshError("pre-crack region is empty; align a0 with the grid")
    return insert_crack(mesh, crack, p["crack_plus"], p["crack_minus"]), dict(p)


# ------------------------------------------------- notched three-point bend

TPB_PATCHES = {
    "left_end": 1, "right_end": 2, "bottom": 3, "top": 4,
    "side_z0": 5, "side_z1": 6, "support_left": 11, "support_right": 12,
    "load_strip": 13, "crack_plus": 101, "crack_minus": 102,
}


def notched_beam_mesh(notch_angle_deg=45.0, length=260.0, depth=60.0,
                      thickness=10.0, notch_height=20.0, support_inset=10.0,
                      nx=26, ny=6, nz=2, blend_width=30.0):
    """Three-point-bend beam with an inclined through-thickness edge notch.

    The notch plane makes `notch_angle_deg` with the front face z=0: the
    structured midplane is sheared in x by (z - t/2)/tan(angle), blended to
    zero over `blend_width` so the outline stays rectangular. Support strips
    (bottom) and the central load strip (top) are one cell wide.
    """
    p = TPB_PATCHES
    tol = 1e-9
    xc = length / 2.0
    dx = length / nx

    def tagger(c):
        x, y, z = c
        if abs(x) < tol:
            return p["left_end"]
        if abs(x - length) < tol:
            return p["right_end"]
        if abs(y) < tol:
            if support_inset <= x <= support_inset + dx:
                return p["support_left"]
            if length - support_inset - dx <= x <= length - support_inset:
                return p["support_right"]
            return p["bottom"]
        if abs(y - depth) < tol:
            if xc - dx <= x <= xc + dx:
                return p["load_strip"]
            return p["top"]
        if abs(z) < tol:
            return p["side_z0"]
        if abs(z - thickness) < tol:
            return p["side_z1"]
        return None

    mesh = box_mesh(nx, ny, nz, lengths=(length, depth, thickness), tagger=tagger)

    crack = []
    for tri, tets in mesh._a("tri_to_tets").items():
        if len(tets) != 2:
            continue
        pts = np.array([mesh.coords[v] for v in tri])
        if np.all(np.abs(pts[:, 0] - xc) < tol) and np.max(pts[:, 1]) <= notch_height + tol:
            crack.append(tri)
    cracked = insert_crack(mesh, crack, p["crack_plus"], p["crack_minus"])

    # shear the region around the notch so the crack plane is inclined
    phi = np.deg2rad(90.0 - notch_angle_deg)
    if abs(phi) > 1e-12:
        for v, c in cracked.coords.items():
            x, y, z = c
            w = max(0.0, 1.0 - abs(x - xc) / blend_width)
            cracked.coords[v] = np.array(
                [x + (z - thickness / 2.0) * np.tan(phi) * w, y, z])
        cracked._adj = None
        cracked.validate()
    return cracked, dict(p)
