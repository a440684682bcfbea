"""Compressible neo-Hookean constitutive law and its tangents.

All functions broadcast over leading axes, so F may be a single (3, 3)
matrix or a stacked (..., 3, 3) array of deformation gradients. Stresses:
first Piola-Kirchhoff P = dPsi/dF and the material (Eshelby) stress
Sigma = Psi*I - F^T P, which drives configurational changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_I3 = np.eye(3)


class InadmissibleDeformation(ValueError):
    """det(F) <= 0: the deformation map locally inverts."""


@dataclass(frozen=True)
class HyperelasticParams:
    """Young's modulus E [MPa], Poisson ratio nu, Griffith energy gc [N/mm]."""

    E: float
    nu: float
    gc: float = 0.0

    def __post_init__(self):
        if self.E <= 0.0:
            raise ValueError(f"E must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise ValueError(f"nu must lie in (-1, 0.5), got {self.nu}")
        if self.gc < 0.0:
            raise ValueError(f"gc must be non-negative, got {self.gc}")

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))


def _det_and_check(F):
    J = np.linalg.det(F)
    if np.any(J <= 0.0):
        bad = float(np.min(J))
        raise InadmissibleDeformation(f"det(F) = {bad:g} <= 0")
    return J


def energy(F, params: HyperelasticParams):
    """Free energy density Psi(F) >= 0 with Psi(I) = 0, units N/mm^2."""
    F = np.asarray(F, dtype=float)
    J = _det_and_check(F)
    mu, lam = params.mu, params.lam
    trC = np.einsum("...ij,...ij->...", F, F)
    logJ = np.log(J)
    return 0.5 * mu * (trC - 3.0) - mu * logJ + 0.5 * lam * logJ**2


def piola(F, params: HyperelasticParams):
    """First Piola-Kirchhoff stress P = dPsi/dF."""
    F = np.asarray(F, dtype=float)
    J = _det_and_check(F)
    mu, lam = params.mu, params.lam
    Fit = np.swapaxes(np.linalg.inv(F), -1, -2)
    logJ = np.log(J)[..., None, None]
    return mu * (F - Fit) + lam * logJ * Fit


def eshelby(F, params: HyperelasticParams):
    """Eshelby stress Sigma = Psi*I - F^T P (assembled from energy and piola)."""
    F = np.asarray(F, dtype=float)
    psi = energy(F, params)
    P = piola(F, params)
    FtP = np.einsum("...ca,...cb->...ab", F, P)
    return psi[..., None, None] * _I3 - FtP


def piola_tangent(F, params: HyperelasticParams):
    """dP/dF as a (..., 3, 3, 3, 3) array, indices [a, J, b, L]."""
    F = np.asarray(F, dtype=float)
    J = _det_and_check(F)
    mu, lam = params.mu, params.lam
    Finv = np.linalg.inv(F)
    Fit = np.swapaxes(Finv, -1, -2)
    logJ = np.log(J)
    dP = np.einsum("ab,JL->aJbL", _I3, _I3) * mu
    dP = np.broadcast_to(dP, F.shape[:-2] + (3, 3, 3, 3)).copy()
    dP += lam * np.einsum("...aJ,...bL->...aJbL", Fit, Fit)
    dP += (mu - lam * logJ)[..., None, None, None, None] * np.einsum(
        "...Jb,...La->...aJbL", Finv, Finv
    )
    return dP


def eshelby_tangent(F, params: HyperelasticParams, dPdF=None):
    """dSigma/dF as (..., 3, 3, 3, 3), indices [A, B, b, L]."""
    F = np.asarray(F, dtype=float)
    P = piola(F, params)
    if dPdF is None:
        dPdF = piola_tangent(F, params)
    term1 = np.einsum("AB,...bL->...ABbL", _I3, P)
    term2 = np.einsum("AL,...bB->...ABbL", _I3, P)
    term3 = np.einsum("...cA,...cBbL->...ABbL", F, dPdF)
    return term1 - term2 - term3


def tangents(F, params: HyperelasticParams, H=None):
    """Consistent tangents (dP/dF, dSigma/dF[, dSigma/dH]).

    When the material-map gradient H is supplied, the chain-rule tangent of
    Sigma with respect to H at fixed spatial map (F = h H^-1, h fixed) is
    appended: dF[e,E]/dH[c,D] = -F[e,c] (H^-1)[D,E].
    """
    dPdF = piola_tangent(F, params)
    dSdF = eshelby_tangent(F, params, dPdF)
    if H is None:
        return dPdF, dSdF
    Hinv = np.linalg.inv(np.asarray(H, dtype=float))
    F = np.asarray(F, dtype=float)
    dSdH = -np.einsum("...ABeE,...ec,...DE->...ABcD", dSdF, F, Hinv)
    return dPdF, dSdF, dSdH
