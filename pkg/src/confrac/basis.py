"""Hierarchical H1 basis on tetrahedra (orders 1..3) and quadrature rules.

Entity-attached functions: 4 vertex functions (barycentric coordinates),
p-1 per edge, (p-1)(p-2)/2 per face, (p-1)(p-2)(p-3)/6 interior. Edge
kernels are Legendre polynomials in (lam_b - lam_a) where (a, b) is the edge
ordered by ascending *global* vertex id, which makes traces of shared-entity
functions identical from both adjacent elements without any neighbour
communication. The mesh geometry map stays linear (straight tets); only the
spatial field order varies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

REF_VERTICES = np.array(
    [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
)
# local entity orderings (ascending local vertex tuples)
TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
TET_FACES = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))

_GRAD_LAMBDA = np.array(
    [[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
)

MAX_ORDER = 3


class BasisError(ValueError):
    pass


def n_functions(order: int) -> int:
    """Dimension of the order-p space on one tet: (p+1)(p+2)(p+3)/6."""
    return (order + 1) * (order + 2) * (order + 3) // 6


def _check_order(order: int) -> None:
    if not 1 <= order <= MAX_ORDER:
        raise BasisError(f"approximation order must be in 1..{MAX_ORDER}, got {order}")


@dataclass(frozen=True)
class BasisFunction:
    kind: str          # 'vertex' | 'edge' | 'face'
    verts: tuple       # local vertex ids of the carrying entity
    k: int = 0         # kernel degree within the entity


class BasisSet:
    """Order-p hierarchical basis on the reference tet.

    Evaluation takes the element's global vertex ids so that edge kernels are
    oriented consistently between neighbours (ascending global id).
    """

    def __init__(self, order: int):
        _check_order(order)
        self.order = order
        funcs = [BasisFunction("vertex", (i,)) for i in range(4)]
        for e in TET_EDGES:
            for k in range(order - 1):
                funcs.append(BasisFunction("edge", e, k))
        if order >= 3:
            for f in TET_FACES:
                funcs.append(BasisFunction("face", f))
        self.functions = tuple(funcs)
        assert len(funcs) == n_functions(order)

    def __len__(self) -> int:
        return len(self.functions)

    def eval(self, points, global_ids=(0, 1, 2, 3)):
        """Values and reference gradients at points (n, 3) in the reference tet.

        Returns (values (n, nf), gradients (n, nf, 3)).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = pts.shape[0]
        lam = np.empty((n, 4))
        lam[:, 1:] = pts
        lam[:, 0] = 1.0 - pts.sum(axis=1)
        vals = np.empty((n, len(self.functions)))
        grads = np.empty((n, len(self.functions), 3))
        gids = tuple(global_ids)
        for idx, f in enumerate(self.functions):
            if f.kind == "vertex":
                i = f.verts[0]
                vals[:, idx] = lam[:, i]
                grads[:, idx] = _GRAD_LAMBDA[i]
            elif f.kind == "edge":
                a, b = f.verts
                if gids[a] > gids[b]:
                    a, b = b, a
                la, lb = lam[:, a], lam[:, b]
                ga, gb = _GRAD_LAMBDA[a], _GRAD_LAMBDA[b]
                if f.k == 0:
                    vals[:, idx] = la * lb
                    grads[:, idx] = la[:, None] * gb + lb[:, None] * ga
                elif f.k == 1:
                    t = lb - la
                    vals[:, idx] = la * lb * t
                    grads[:, idx] = (
                        (lb * t)[:, None] * ga
                        + (la * t)[:, None] * gb
                        + (la * lb)[:, None] * (gb - ga)
                    )
                else:  # pragma: no cover - orders above 3 rejected at init
                    raise BasisError("edge kernel degree beyond order 3")
            else:  # face bubble
                i, j, k = f.verts
                li, lj, lk = lam[:, i], lam[:, j], lam[:, k]
                vals[:, idx] = li * lj * lk
                grads[:, idx] = (
                    (lj * lk)[:, None] * _GRAD_LAMBDA[i]
                    + (li * lk)[:, None] * _GRAD_LAMBDA[j]
                    + (li * lj)[:, None] * _GRAD_LAMBDA[k]
                )
        return vals, grads


_BASIS_CACHE: dict[int, BasisSet] = {}


def basis_set(order: int) -> BasisSet:
    _check_order(order)
    if order not in _BASIS_CACHE:
        _BASIS_CACHE[order] = BasisSet(order)
    return _BASIS_CACHE[order]


def eval_basis(order: int, point):
    """Values and reference gradients of all order-p functions at one point.

    The point must lie in the closed reference tet.
    """
    p = np.asarray(point, dtype=float)
    tol = 1e-12
    bary0 = 1.0 - p.sum()
    if p.min() < -tol or bary0 < -tol:
        raise BasisError(f"point {p} outside the reference tetrahedron")
    vals, grads = basis_set(order).eval(p[None, :])
    return vals[0], grads[0]


def physical_gradients(ref_grads, jacobian):
    """Push reference gradients through a coordinate Jacobian.

    ref_grads has gradient rows (..., nf, 3); jacobian is d(phys)/d(ref).
    Applying the returned rows to nodal coordinates yields the gradient of
    the interpolated field in physical coordinates.
    """
    jac = np.asarray(jacobian, dtype=float)
    det = np.linalg.det(jac)
    if det <= 0.0:
        raise BasisError(f"degenerate element: coordinate Jacobian det = {det:g}")
    return np.asarray(ref_grads) @ np.linalg.inv(jac)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (n, dim) reference coordinates
    weights: np.ndarray  # sums to the reference element measure
    degree: int          # total polynomial degree integrated exactly


_TET_DEG2_A = (5.0 + 3.0 * np.sqrt(5.0)) / 20.0
_TET_DEG2_B = (5.0 - np.sqrt(5.0)) / 20.0

MAX_QUAD_DEGREE = 20


def _jacobi01(n: int, alpha: int):
    """Gauss-Jacobi nodes/weights on [0,1] for weight (1-t)^alpha."""
    if alpha == 0:
        x, w = roots_jacobi(n, 0.0, 0.0)
    else:
        x, w = roots_jacobi(n, float(alpha), 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


def _duffy_tet(n: int) -> QuadratureRule:
    xi, wxi = _jacobi01(n, 2)
    eta, weta = _jacobi01(n, 1)
    zeta, wz = _jacobi01(n, 0)
    pts = []
    wts = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                x = xi[i]
                y = eta[j] * (1.0 - xi[i])
                z = zeta[k] * (1.0 - xi[i]) * (1.0 - eta[j])
                pts.append((x, y, z))
                wts.append(wxi[i] * weta[j] * wz[k])
    return QuadratureRule(np.array(pts), np.array(wts), 2 * n - 1)


def _duffy_tri(n: int) -> QuadratureRule:
    xi, wxi = _jacobi01(n, 1)
    eta, we = _jacobi01(n, 0)
    pts = []
    wts = []
    for i in range(n):
        for j in range(n):
            pts.append((xi[i], eta[j] * (1.0 - xi[i])))
            wts.append(wxi[i] * we[j])
    return QuadratureRule(np.array(pts), np.array(wts), 2 * n - 1)


_TET_RULES: dict[int, QuadratureRule] = {}
_TRI_RULES: dict[int, QuadratureRule] = {}


def quadrature_for(degree: int) -> QuadratureRule:
    """Smallest stored tet rule integrating total degree `degree` exactly."""
    if degree > MAX_QUAD_DEGREE:
        raise BasisError(f"quadrature degree {degree} beyond table (max {MAX_QUAD_DEGREE})")
    degree = max(degree, 1)
    if degree not in _TET_RULES:
        if degree == 1:
            rule = QuadratureRule(np.full((1, 3), 0.25), np.array([1.0 / 6.0]), 1)
        elif degree == 2:
            a, b = _TET_DEG2_A, _TET_DEG2_B
            pts = np.full((4, 3), b)
            for i in range(3):
                pts[i + 1, i] = a
            rule = QuadratureRule(pts, np.full(4, 1.0 / 24.0), 2)
        else:
            rule = _duffy_tet((degree + 2) // 2)
        _TET_RULES[degree] = rule
    return _TET_RULES[degree]


def tri_quadrature_for(degree: int) -> QuadratureRule:
    """Smallest stored unit-triangle rule exact to `degree`."""
    if degree > MAX_QUAD_DEGREE:
        raise BasisError(f"quadrature degree {degree} beyond table (max {MAX_QUAD_DEGREE})")
    degree = max(degree, 1)
    if degree not in _TRI_RULES:
        if degree == 1:
            rule = QuadratureRule(np.full((1, 2), 1.0 / 3.0), np.array([0.5]), 1)
        elif degree == 2:
            pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
            rule = QuadratureRule(pts, np.full(3, 1.0 / 6.0), 2)
        else:
            rule = _duffy_tri((degree + 2) // 2)
        _TRI_RULES[degree] = rule
    return _TRI_RULES[degree]


def face_points_to_tet(face_local, tri_points):
    """Map unit-triangle points onto a local face of the reference tet."""
    tri = np.atleast_2d(tri_points)
    corners = REF_VERTICES[list(face_local)]
    bary = np.column_stack([1.0 - tri.sum(axis=1), tri[:, 0], tri[:, 1]])
    return bary @ corners
