"""Orientation and in-sphere predicates with exact-sign fallback.

Topological decisions (flips) must never be made on a rounded sign. Both
predicates first evaluate the determinant in floats with a conservative
forward error bound; if the magnitude is below the bound the computation is
repeated in exact rational arithmetic (float inputs are dyadic rationals, so
``fractions.Fraction`` reproduces the determinant exactly).
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

# Forward error of a 3x3 / 4x4 determinant of differences is bounded by
# C * eps * (sum of |term| products); these constants are deliberately loose.
_EPS = np.finfo(float).eps
_O3D_GUARD = 16.0 * _EPS
_ISP_GUARD = 64.0 * _EPS


def _det3_exact(m) -> Fraction:
    a, b, c = m[0], m[1], m[2]
    return (
        a[0] * (b[1] * c[2] - b[2] * c[1])
        - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
    )


def _det4_exact(m) -> Fraction:
    total = Fraction(0)
    sign = 1
    for col in range(4):
        minor = [[m[r][c] for c in range(4) if c != col] for r in (1, 2, 3)]
        total += sign * m[0][col] * _det3_exact(minor)
        sign = -sign
    return total


def orient3d(a, b, c, d) -> int:
    """Sign of the orientation of tet (a, b, c, d).

    Returns +1 if d lies on the positive side of the plane through a, b, c
    (right-handed abc), -1 on the negative side, 0 if exactly coplanar.
    """
    a = np.asarray(a, dtype=float)
    rows = np.array([np.asarray(p, dtype=float) - a for p in (b, c, d)])
    det = np.linalg.det(rows)
    mags = np.abs(rows)
    permanent = (
        mags[0, 0] * (mags[1, 1] * mags[2, 2] + mags[1, 2] * mags[2, 1])
        + mags[0, 1] * (mags[1, 0] * mags[2, 2] + mags[1, 2] * mags[2, 0])
        + mags[0, 2] * (mags[1, 0] * mags[2, 1] + mags[1, 1] * mags[2, 0])
    )
    if abs(det) > _O3D_GUARD * permanent:
        return 1 if det > 0.0 else -1
    exact_rows = [
        [Fraction(float(v)) - Fraction(float(w)) for v, w in zip(p, a)]
        for p in (b, c, d)
    ]
    det_exact = _det3_exact(exact_rows)
    return (det_exact > 0) - (det_exact < 0)


def insphere(a, b, c, d, e) -> int:
    """Sign of the in-sphere test of point e against the circumsphere of (a,b,c,d).

    For a positively oriented tet: +1 means e is strictly inside the
    circumsphere, -1 strictly outside, 0 exactly on it. For a negatively
    oriented tet the sign is flipped so the meaning is orientation free.
    """
    pts = [np.asarray(p, dtype=float) for p in (a, b, c, d)]
    e = np.asarray(e, dtype=float)
    rows = np.empty((4, 4))
    for i, p in enumerate(pts):
        diff = p - e
        rows[i, :3] = diff
        rows[i, 3] = diff @ diff
    det = np.linalg.det(rows)

    mags = np.abs(rows)
    permanent = 0.0
    for col in range(4):
        sub = np.delete(mags, col, axis=1)
        permanent += mags[0, col] * (
            sub[1, 0] * (sub[2, 1] * sub[3, 2] + sub[2, 2] * sub[3, 1])
            + sub[1, 1] * (sub[2, 0] * sub[3, 2] + sub[2, 2] * sub[3, 0])
            + sub[1, 2] * (sub[2, 0] * sub[3, 1] + sub[2, 1] * sub[3, 0])
        )
    orientation = orient3d(a, b, c, d)
    if orientation == 0:
        return 0
    if abs(det) > _ISP_GUARD * permanent:
        raw = 1 if det > 0.0 else -1
        return raw * orientation

    exact = []
    fe = [Fraction(float(v)) for v in e]
    for p in pts:
        diff = [Fraction(float(v)) - w for v, w in zip(p, fe)]
        exact.append(diff + [diff[0] ** 2 + diff[1] ** 2 + diff[2] ** 2])
    det_exact = _det4_exact(exact)
    raw = (det_exact > 0) - (det_exact < 0)
    return raw * orientation
