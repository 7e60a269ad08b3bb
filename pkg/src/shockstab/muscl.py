"""MUSCL interface reconstruction with slope limiters.

Face states from a four-cell stencil (m1, m, p, p1) along a grid line:

    q_face^- = q_m + 0.5 * psi^L * (q_m - q_m1)
    q_face^+ = q_p - 0.5 * psi^R * (q_p1 - q_p)

with psi^L = psi(r^L), r^L = (q_p - q_m)/(q_m - q_m1), and
psi^R = psi(r^R), r^R = (q_p - q_m)/(q_p1 - q_p). Limiting is applied
component-wise; whenever the relevant denominator vanishes the limiter value
is set to zero for that component. Reconstruction can act on conserved or
primitive variables; the psi = 0 degenerate case reproduces the first-order
scheme.
"""

import numpy as np


def _superbee(r):
    return np.maximum(0.0, np.maximum(np.minimum(2.0 * r, 1.0), np.minimum(r, 2.0)))


def _van_leer(r):
    rp = np.maximum(r, 0.0)
    return 2.0 * rp / (1.0 + rp)


def _van_albada(r):
    rp = np.maximum(r, 0.0)
    return (rp**2 + rp) / (1.0 + rp**2)


def _minmod(r):
    return np.maximum(0.0, np.minimum(r, 1.0))


def _none(r):
    return np.zeros_like(np.asarray(r, dtype=float))


LIMITERS = {
    "superbee": _superbee,
    "vanleer": _van_leer,
    "vanalbada": _van_albada,
    "minmod": _minmod,
    "none": _none,
}

# Relative floor below which a consecutive difference counts as zero. Keeps
# floating-point dust in uniform regions from switching the limiter on.
ZERO_FLOOR = 1e-14


def limiter_value(kind, r):
    """Limiter psi(r); zero for r <= 0 for every kind."""
    try:
        fn = LIMITERS[kind]
    except KeyError:
        raise ValueError(f"unknown limiter {kind!r}; choose from {sorted(LIMITERS)}")
    return fn(np.asarray(r, dtype=float))


def ratio(q_m1, q_m, q_p, q_p1):
    """Consecutive gradient ratios (r_L, r_R) per component.

    Zero denominators produce inf/nan here; callers apply the zero-limiter
    rule (see face_psi).
    """
    q_m1, q_m, q_p, q_p1 = (np.asarray(a, dtype=float) for a in (q_m1, q_m, q_p, q_p1))
    num = q_p - q_m
    with np.errstate(divide="ignore", invalid="ignore"):
        r_L = num / (q_m - q_m1)
        r_R = num / (q_p1 - q_p)
    return r_L, r_R


def face_psi(kind, q_m1, q_m, q_p, q_p1, floor=ZERO_FLOOR):
    """Limiter values (psi_L, psi_R) for one face, zero-denominator rule applied.

    A backward/forward difference whose magnitude is at or below
    floor * local scale is treated as exactly zero and forces psi = 0 for
    that component.
    """
    q_m1, q_m, q_p, q_p1 = (np.asarray(a, dtype=float) for a in (q_m1, q_m, q_p, q_p1))
    num = q_p - q_m
    d_minus = q_m - q_m1
    d_plus = q_p1 - q_p
    if kind not in LIMITERS:
        raise ValueError(f"unknown limiter {kind!r}")
    fn = LIMITERS[kind]
    dead_L = np.abs(d_minus) <= floor * np.maximum(np.abs(q_m), np.abs(q_m1))
    dead_R = np.abs(d_plus) <= floor * np.maximum(np.abs(q_p), np.abs(q_p1))
    r_L = num / np.where(dead_L, 1.0, d_minus)
    r_R = num / np.where(dead_R, 1.0, d_plus)
    psi_L = np.where(dead_L, 0.0, fn(r_L))
    psi_R = np.where(dead_R, 0.0, fn(r_R))
    return psi_L, psi_R


def face_states(kind, q_m1, q_m, q_p, q_p1, psi=None, floor=ZERO_FLOOR):
    """Reconstructed (minus-side, plus-side) face states.

    psi, when given, is a precomputed (psi_L, psi_R) pair (the frozen-limiter
    path); otherwise the limiter is evaluated on the stencil itself.
    """
    if psi is None:
        psi_L, psi_R = face_psi(kind, q_m1, q_m, q_p, q_p1, floor=floor)
    else:
        psi_L, psi_R = psi
    q_minus = q_m + 0.5 * psi_L * (q_m - q_m1)
    q_plus = q_p - 0.5 * psi_R * (q_p1 - q_p)
    return q_minus, q_plus


def reconstruct_face(kind, stencil, psi=None, floor=ZERO_FLOOR):
    """Face states from a stencil array of four consecutive cell states
    (stacked on the leading axis)."""
    stencil = np.asarray(stencil, dtype=float)
    return face_states(kind, stencil[0], stencil[1], stencil[2], stencil[3], psi=psi, floor=floor)
