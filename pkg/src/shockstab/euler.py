"""Compressible Euler state handling: conversions, equation of state, fluxes.

States are plain numpy arrays with the component axis last:

* conserved  ``U = (rho, rho*u, rho*v, rho*e)``
* primitive  ``W = (rho, u, v, p)``

All functions broadcast over leading axes, so a single state ``(4,)`` and a
field of states ``(nx, ny, 4)`` go through the same code path.
"""

from dataclasses import dataclass

import numpy as np


class AdmissibilityError(ValueError):
    """A state has non-positive density, pressure, or internal energy."""


@dataclass(frozen=True)
class GasModel:
    """Perfect gas with constant specific heat ratio (> 1)."""

    gamma: float = 1.4

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")


def check_conserved(U, gas=GasModel()):
    """Raise AdmissibilityError unless density and internal energy are positive."""
    U = np.asarray(U, dtype=float)
    rho = U[..., 0]
    if not np.all(rho > 0.0):
        raise AdmissibilityError("non-positive density")
    e_int = U[..., 3] - 0.5 * (U[..., 1] ** 2 + U[..., 2] ** 2) / rho
    if not np.all(e_int > 0.0):
        raise AdmissibilityError("non-positive internal energy")


def check_primitive(W):
    """Raise AdmissibilityError unless density and pressure are positive."""
    W = np.asarray(W, dtype=float)
    if not np.all(W[..., 0] > 0.0):
        raise AdmissibilityError("non-positive density")
    if not np.all(W[..., 3] > 0.0):
        raise AdmissibilityError("non-positive pressure")


def pressure_from_conserved(U, gas=GasModel(), validate=True):
    """Pressure p = (gamma-1) * rho * (e - (u^2+v^2)/2)."""
    U = np.asarray(U, dtype=float)
    if validate:
        check_conserved(U, gas)
    rho = U[..., 0]
    kinetic = 0.5 * (U[..., 1] ** 2 + U[..., 2] ** 2) / rho
    return (gas.gamma - 1.0) * (U[..., 3] - kinetic)


def conserved_to_primitive(U, gas=GasModel(), validate=True):
    U = np.asarray(U, dtype=float)
    p = pressure_from_conserved(U, gas, validate=validate)
    W = np.empty_like(U)
    W[..., 0] = U[..., 0]
    W[..., 1] = U[..., 1] / U[..., 0]
    W[..., 2] = U[..., 2] / U[..., 0]
    W[..., 3] = p
    return W


def primitive_to_conserved(W, gas=GasModel(), validate=True):
    W = np.asarray(W, dtype=float)
    if validate:
        check_primitive(W)
    rho, u, v, p = W[..., 0], W[..., 1], W[..., 2], W[..., 3]
    U = np.empty_like(W)
    U[..., 0] = rho
    U[..., 1] = rho * u
    U[..., 2] = rho * v
    U[..., 3] = p / (gas.gamma - 1.0) + 0.5 * rho * (u**2 + v**2)
    return U


def sound_speed(W, gas=GasModel()):
    W = np.asarray(W, dtype=float)
    return np.sqrt(gas.gamma * W[..., 3] / W[..., 0])


def physical_flux(W, n, gas=GasModel()):
    """Euler flux through a face with unit normal n = (nx, ny).

    F = (rho*q, rho*q*u + p*nx, rho*q*v + p*ny, (rho*e + p)*q) with the
    face-normal velocity q = u*nx + v*ny.
    """
    W = np.asarray(W, dtype=float)
    n = np.asarray(n, dtype=float)
    rho, u, v, p = W[..., 0], W[..., 1], W[..., 2], W[..., 3]
    nx, ny = n[..., 0], n[..., 1]
    q = u * nx + v * ny
    rho_e = p / (gas.gamma - 1.0) + 0.5 * rho * (u**2 + v**2)
    F = np.empty_like(W)
    F[..., 0] = rho * q
    F[..., 1] = rho * q * u + p * nx
    F[..., 2] = rho * q * v + p * ny
    F[..., 3] = (rho_e + p) * q
    return F


def transform_matrix_dU_dW(W, gas=GasModel()):
    """Jacobian dU/dW of the conserved state with respect to the primitive state.

    Returns a (..., 4, 4) array; the last row is
    ((u^2+v^2)/2, rho*u, rho*v, 1/(gamma-1)).
    """
    W = np.asarray(W, dtype=float)
    rho, u, v = W[..., 0], W[..., 1], W[..., 2]
    T = np.zeros(W.shape[:-1] + (4, 4), dtype=float)
    T[..., 0, 0] = 1.0
    T[..., 1, 0] = u
    T[..., 1, 1] = rho
    T[..., 2, 0] = v
    T[..., 2, 2] = rho
    T[..., 3, 0] = 0.5 * (u**2 + v**2)
    T[..., 3, 1] = rho * u
    T[..., 3, 2] = rho * v
    T[..., 3, 3] = 1.0 / (gas.gamma - 1.0)
    return T
