"""Volume-length element quality, log-barrier energy and pseudo-stress.

The quality of a tet is q = 6*sqrt(2) V / l_rms^3 (1 for equilateral, 0 for
degenerate). Under a material deformation H relative to the reference
element, the relative quality change b = det(H) / dl_rms^3 is kept above a
floor gamma_b by the barrier B_e = b^2 / (2(1-gamma)) - ln(b - gamma). The
pseudo-stress Q = dB_e/dH vanishes identically for rigid motions and pure
dilations (b stays 1, where dB_e/db = 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import TET_EDGES

_SQRT2 = np.sqrt(2.0)


class BarrierViolation(RuntimeError):
    """Element quality dropped to the barrier: b <= gamma_b."""

    def __init__(self, b, gamma_b, element=None):
        self.b = b
        self.gamma_b = gamma_b
        self.element = element
        where = f" (element {element})" if element is not None else ""
        super().__init__(f"quality barrier violated{where}: b = {b:g} <= {gamma_b:g}")


def tet_volume(coords):
    """Signed volume of tets given vertex coords (..., 4, 3)."""
    c = np.asarray(coords)
    e = c[..., 1:, :] - c[..., :1, :]
    return np.linalg.det(e) / 6.0


def tet_quality(coords):
    """Volume-length quality 6*sqrt(2) V / l_rms^3 of tets (..., 4, 3)."""
    c = np.asarray(coords, dtype=float)
    vol = tet_volume(c)
    i, j = zip(*TET_EDGES)
    d = c[..., list(j), :] - c[..., list(i), :]
    l2 = np.einsum("...jk,...jk->...j", d, d).mean(axis=-1)
    lrms = np.sqrt(l2)
    return 6.0 * _SQRT2 * vol / lrms**3


@dataclass(frozen=True)
class ElementQuality:
    """Reference-configuration data entering the barrier for one or more tets."""

    dchi: np.ndarray   # (..., 6, 3) reference edge vectors
    l0: np.ndarray     # (...) reference rms edge length
    V0: np.ndarray     # (...) reference volume
    q0: np.ndarray     # (...) reference quality

    @classmethod
    def from_coords(cls, coords):
        c = np.asarray(coords, dtype=float)
        i, j = zip(*TET_EDGES)
        dchi = c[..., list(j), :] - c[..., list(i), :]
        l0 = np.sqrt(np.einsum("...jk,...jk->...j", dchi, dchi).mean(axis=-1))
        V0 = tet_volume(c)
        q0 = 6.0 * _SQRT2 * V0 / l0**3
        return cls(dchi=dchi, l0=np.asarray(l0), V0=np.asarray(V0), q0=np.asarray(q0))


def _b_and_lrms(H, elem: ElementQuality):
    """b(H) and current rms length; complex-safe (plain transposes only)."""
    dX = np.einsum("...cd,...jd->...jc", H, elem.dchi)
    l2 = np.einsum("...jk,...jk->...j", dX, dX).mean(axis=-1)
    lrms = np.sqrt(l2)
    detH = np.linalg.det(H)
    b = detH * (elem.l0 / lrms) ** 3
    return b, lrms, dX, detH


def quality_measures(H, elem: ElementQuality, gamma_b: float):
    """(q, b, B_e) for material deformation H on the reference element."""
    H = np.asarray(H)
    b, _, _, detH = _b_and_lrms(H, elem)
    if np.any(np.real(detH) <= 0.0):
        raise BarrierViolation(float(np.min(np.real(detH))), gamma_b)
    if np.any(np.real(b) <= gamma_b):
        raise BarrierViolation(float(np.min(np.real(b))), gamma_b)
    Be = b**2 / (2.0 * (1.0 - gamma_b)) - np.log(b - gamma_b)
    return elem.q0 * b, b, Be


def quality_stress(H, elem: ElementQuality, gamma_b: float, check: bool = True):
    """Pseudo-stress Q = dB_e/dH, shape (..., 3, 3).

    Q = det(H) (l0/l_rms)^3 (b/(1-gamma) - 1/(b-gamma)) Q_hat with
    Q_hat = H^-T - 1/(2 l_rms^2) sum_j dX_j dchi_j^T.
    """
    H = np.asarray(H)
    b, lrms, dX, detH = _b_and_lrms(H, elem)
    if check and np.any(np.real(b) <= gamma_b):
        raise BarrierViolation(float(np.min(np.real(b))), gamma_b)
    Hit = np.swapaxes(np.linalg.inv(H), -1, -2)
    Qhat = Hit - np.einsum("...jc,...jd->...cd", dX, elem.dchi) / (
        2.0 * lrms[..., None, None] ** 2
    )
    dBdb = b / (1.0 - gamma_b) - 1.0 / (b - gamma_b)
    scale = detH * (elem.l0 / lrms) ** 3 * dBdb
    return scale[..., None, None] * Qhat


def quality_stress_tangent(H, elem: ElementQuality, gamma_b: float):
    """dQ/dH (..., 3, 3, 3, 3), indices [c, D, e, F], by complex step.

    Exact to machine precision: B_e is holomorphic in H where b > gamma_b.
    """
    H = np.asarray(H, dtype=float)
    out = np.empty(H.shape[:-2] + (3, 3, 3, 3))
    h = 1e-30
    for e in range(3):
        for f in range(3):
            Hc = H.astype(complex)
            Hc[..., e, f] += 1j * h
            Q = quality_stress(Hc, elem, gamma_b, check=False)
            out[..., :, :, e, f] = Q.imag / h
    return out
