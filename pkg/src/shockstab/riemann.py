"""Approximate Riemann solvers: Roe, HLL, HLLC, van Leer splitting, AUSM+.

Every solver is evaluated in the face-normal frame: velocities are rotated
so the normal component plays the 1D role and the tangential component is
advected passively, the 1D flux is computed, and the momentum components are
rotated back. This guarantees rotational invariance on distorted grids.

Inputs are primitive states (rho, u, v, p) with the component axis last and
a unit normal (nx, ny); everything broadcasts over leading axes. HLL and
HLLC use the Davis wave speed estimates
S_L = min(q_L - a_L, q_R - a_R), S_R = max(q_L + a_L, q_R + a_R).
"""

import numpy as np

from .euler import GasModel, sound_speed


def _rotated(W, n):
    """Split a primitive state into (rho, q, t, p) in the face frame."""
    rho, u, v, p = W[..., 0], W[..., 1], W[..., 2], W[..., 3]
    nx, ny = n[..., 0], n[..., 1]
    q = u * nx + v * ny
    t = -u * ny + v * nx
    return rho, q, t, p


def _rotate_back(F1d, n):
    """Map a face-frame flux (mass, normal mom, transverse mom, energy) to x-y."""
    nx, ny = n[..., 0], n[..., 1]
    F = np.empty(np.broadcast_shapes(F1d.shape[:-1], n.shape[:-1]) + (4,))
    F[..., 0] = F1d[..., 0]
    F[..., 1] = F1d[..., 1] * nx - F1d[..., 2] * ny
    F[..., 2] = F1d[..., 1] * ny + F1d[..., 2] * nx
    F[..., 3] = F1d[..., 3]
    return F


def _flux1d(rho, q, t, p, gas):
    """Physical Euler flux in the face frame."""
    rho_e = p / (gas.gamma - 1.0) + 0.5 * rho * (q**2 + t**2)
    F = np.empty(np.broadcast(rho, q).shape + (4,))
    F[..., 0] = rho * q
    F[..., 1] = rho * q * q + p
    F[..., 2] = rho * q * t
    F[..., 3] = (rho_e + p) * q
    return F


def _conserved1d(rho, q, t, p, gas):
    U = np.empty(np.broadcast(rho, q).shape + (4,))
    U[..., 0] = rho
    U[..., 1] = rho * q
    U[..., 2] = rho * t
    U[..., 3] = p / (gas.gamma - 1.0) + 0.5 * rho * (q**2 + t**2)
    return U


def roe_average(W_L, W_R, gas=GasModel()):
    """Density-weighted Roe averages (rho, u, v, H, a) of two primitive states."""
    W_L = np.asarray(W_L, dtype=float)
    W_R = np.asarray(W_R, dtype=float)
    sL = np.sqrt(W_L[..., 0])
    sR = np.sqrt(W_R[..., 0])
    wL = sL / (sL + sR)
    wR = 1.0 - wL
    g1 = gas.gamma / (gas.gamma - 1.0)
    HL = g1 * W_L[..., 3] / W_L[..., 0] + 0.5 * (W_L[..., 1] ** 2 + W_L[..., 2] ** 2)
    HR = g1 * W_R[..., 3] / W_R[..., 0] + 0.5 * (W_R[..., 1] ** 2 + W_R[..., 2] ** 2)
    rho = sL * sR
    u = wL * W_L[..., 1] + wR * W_R[..., 1]
    v = wL * W_L[..., 2] + wR * W_R[..., 2]
    H = wL * HL + wR * HR
    a2 = (gas.gamma - 1.0) * (H - 0.5 * (u**2 + v**2))
    if np.any(a2 <= 0.0):
        raise FloatingPointError("negative Roe-averaged sound speed: inadmissible inputs")
    return rho, u, v, H, np.sqrt(a2)


def roe_flux(W_L, W_R, n, gas=GasModel(), entropy_fix=0.0):
    """Roe flux 0.5*(F_L + F_R) - 0.5*|A|*(U_R - U_L), no entropy fix by default.

    entropy_fix > 0 applies a Harten-type floor of entropy_fix * a_roe to the
    acoustic wave speeds.
    """
    rhoL, qL, tL, pL = _rotated(W_L, n)
    rhoR, qR, tR, pR = _rotated(W_R, n)
    rho_h, u_h, v_h, H_h, a_h = roe_average(W_L, W_R, gas)
    nx, ny = n[..., 0], n[..., 1]
    q_h = u_h * nx + v_h * ny
    t_h = -u_h * ny + v_h * nx

    dq = qR - qL
    dt = tR - tL
    dp = pR - pL
    drho = rhoR - rhoL

    lam1 = np.abs(q_h - a_h)
    lam2 = np.abs(q_h)
    lam4 = np.abs(q_h + a_h)
    if entropy_fix > 0.0:
        eps = entropy_fix * a_h
        lam1 = np.where(lam1 < eps, 0.5 * (lam1**2 / eps + eps), lam1)
        lam4 = np.where(lam4 < eps, 0.5 * (lam4**2 / eps + eps), lam4)

    alpha1 = (dp - rho_h * a_h * dq) / (2.0 * a_h**2)
    alpha2 = drho - dp / a_h**2
    alpha3 = rho_h * dt
    alpha4 = (dp + rho_h * a_h * dq) / (2.0 * a_h**2)

    ke_h = 0.5 * (q_h**2 + t_h**2)
    shape = np.broadcast(rhoL, q_h).shape
    diss = np.zeros(shape + (4,))
    c1 = lam1 * alpha1
    diss[..., 0] += c1
    diss[..., 1] += c1 * (q_h - a_h)
    diss[..., 2] += c1 * t_h
    diss[..., 3] += c1 * (H_h - q_h * a_h)
    c2 = lam2 * alpha2
    diss[..., 0] += c2
    diss[..., 1] += c2 * q_h
    diss[..., 2] += c2 * t_h
    diss[..., 3] += c2 * ke_h
    c3 = lam2 * alpha3
    diss[..., 2] += c3
    diss[..., 3] += c3 * t_h
    c4 = lam4 * alpha4
    diss[..., 0] += c4
    diss[..., 1] += c4 * (q_h + a_h)
    diss[..., 2] += c4 * t_h
    diss[..., 3] += c4 * (H_h + q_h * a_h)

    FL = _flux1d(rhoL, qL, tL, pL, gas)
    FR = _flux1d(rhoR, qR, tR, pR, gas)
    return _rotate_back(0.5 * (FL + FR) - 0.5 * diss, n)


def _davis_speeds(qL, aL, qR, aR):
    SL = np.minimum(qL - aL, qR - aR)
    SR = np.maximum(qL + aL, qR + aR)
    return SL, SR


def hll_flux(W_L, W_R, n, gas=GasModel()):
    """HLL flux with Davis wave speeds."""
    rhoL, qL, tL, pL = _rotated(W_L, n)
    rhoR, qR, tR, pR = _rotated(W_R, n)
    aL = sound_speed(W_L, gas)
    aR = sound_speed(W_R, gas)
    SL, SR = _davis_speeds(qL, aL, qR, aR)
    FL = _flux1d(rhoL, qL, tL, pL, gas)
    FR = _flux1d(rhoR, qR, tR, pR, gas)
    UL = _conserved1d(rhoL, qL, tL, pL, gas)
    UR = _conserved1d(rhoR, qR, tR, pR, gas)
    Fmid = (SR[..., None] * FL - SL[..., None] * FR + (SL * SR)[..., None] * (UR - UL)) / (
        SR - SL
    )[..., None]
    F = np.where(SL[..., None] >= 0.0, FL, np.where(SR[..., None] <= 0.0, FR, Fmid))
    return _rotate_back(F, n)


def hllc_flux(W_L, W_R, n, gas=GasModel()):
    """HLLC flux: Davis estimates for S_L, S_R, contact speed from the standard
    HLLC jump conditions."""
    rhoL, qL, tL, pL = _rotated(W_L, n)
    rhoR, qR, tR, pR = _rotated(W_R, n)
    aL = sound_speed(W_L, gas)
    aR = sound_speed(W_R, gas)
    SL, SR = _davis_speeds(qL, aL, qR, aR)

    mL = rhoL * (SL - qL)
    mR = rhoR * (SR - qR)
    Sstar = (pR - pL + qL * mL - qR * mR) / (mL - mR)

    FL = _flux1d(rhoL, qL, tL, pL, gas)
    FR = _flux1d(rhoR, qR, tR, pR, gas)
    UL = _conserved1d(rhoL, qL, tL, pL, gas)
    UR = _conserved1d(rhoR, qR, tR, pR, gas)

    def star_state(rho, q, t, p, U, S):
        factor = rho * (S - q) / (S - Sstar)
        Ustar = np.empty_like(U)
        Ustar[..., 0] = factor
        Ustar[..., 1] = factor * Sstar
        Ustar[..., 2] = factor * t
        Ustar[..., 3] = factor * (
            U[..., 3] / rho + (Sstar - q) * (Sstar + p / (rho * (S - q)))
        )
        return Ustar

    FstarL = FL + SL[..., None] * (star_state(rhoL, qL, tL, pL, UL, SL) - UL)
    FstarR = FR + SR[..., None] * (star_state(rhoR, qR, tR, pR, UR, SR) - UR)

    F = np.where(
        SL[..., None] >= 0.0,
        FL,
        np.where(
            Sstar[..., None] >= 0.0,
            FstarL,
            np.where(SR[..., None] >= 0.0, FstarR, FR),
        ),
    )
    return _rotate_back(F, n)


def van_leer_flux(W_L, W_R, n, gas=GasModel()):
    """Van Leer flux-vector splitting, F+ from the left state plus F- from the
    right state, with the transverse velocity advected by the split mass flux."""
    g = gas.gamma

    def split(W, sign):
        rho, q, t, p = _rotated(W, n)
        a = sound_speed(W, gas)
        M = q / a
        mass = sign * 0.25 * rho * a * (M + sign) ** 2
        qa = ((g - 1.0) * q + sign * 2.0 * a) / g
        F = np.empty(mass.shape + (4,))
        F[..., 0] = mass
        F[..., 1] = mass * qa
        F[..., 2] = mass * t
        F[..., 3] = mass * (qa**2 * g**2 / (2.0 * (g**2 - 1.0)) + 0.5 * t**2)
        full = _flux1d(rho, q, t, p, gas)
        if sign > 0:
            F = np.where(M[..., None] >= 1.0, full, np.where(M[..., None] <= -1.0, 0.0, F))
        else:
            F = np.where(M[..., None] <= -1.0, full, np.where(M[..., None] >= 1.0, 0.0, F))
        return F

    return _rotate_back(split(W_L, 1.0) + split(W_R, -1.0), n)


# AUSM+ pressure/Mach splitting parameters (standard defaults)
AUSM_ALPHA = 3.0 / 16.0
AUSM_BETA = 1.0 / 8.0


def _ausm_mach_split(M, sign):
    sup = 0.5 * (M + sign * np.abs(M))
    sub = sign * 0.25 * (M + sign) ** 2 + sign * AUSM_BETA * (M**2 - 1.0) ** 2
    return np.where(np.abs(M) >= 1.0, sup, sub)


def _ausm_pressure_split(M, sign):
    sup = 0.5 * (1.0 + sign * np.sign(M))
    sub = 0.25 * (M + sign) ** 2 * (2.0 - sign * M) + sign * AUSM_ALPHA * M * (
        M**2 - 1.0
    ) ** 2
    return np.where(np.abs(M) >= 1.0, sup, sub)


def ausm_plus_flux(W_L, W_R, n, gas=GasModel()):
    """AUSM+ flux with alpha = 3/16, beta = 1/8.

    The interface sound speed uses the critical-speed construction
    a = min(a*_L^2 / max(a*_L, |q_L|), a*_R^2 / max(a*_R, |q_R|)), which is
    the variant that captures stationary normal shocks exactly.
    """
    g = gas.gamma
    rhoL, qL, tL, pL = _rotated(W_L, n)
    rhoR, qR, tR, pR = _rotated(W_R, n)
    HL = g / (g - 1.0) * pL / rhoL + 0.5 * (qL**2 + tL**2)
    HR = g / (g - 1.0) * pR / rhoR + 0.5 * (qR**2 + tR**2)
    astarL = np.sqrt(2.0 * (g - 1.0) / (g + 1.0) * HL)
    astarR = np.sqrt(2.0 * (g - 1.0) / (g + 1.0) * HR)
    atildeL = astarL**2 / np.maximum(astarL, np.abs(qL))
    atildeR = astarR**2 / np.maximum(astarR, np.abs(qR))
    a = np.minimum(atildeL, atildeR)

    ML = qL / a
    MR = qR / a
    m = _ausm_mach_split(ML, 1.0) + _ausm_mach_split(MR, -1.0)
    p_face = _ausm_pressure_split(ML, 1.0) * pL + _ausm_pressure_split(MR, -1.0) * pR

    mdot = a * m * np.where(m > 0.0, rhoL, rhoR)
    psi = np.where(
        m[..., None] > 0.0,
        np.stack([np.ones_like(qL), qL, tL, HL], axis=-1),
        np.stack([np.ones_like(qR), qR, tR, HR], axis=-1),
    )
    F = mdot[..., None] * psi
    F[..., 1] += p_face
    return _rotate_back(F, n)


SOLVERS = {
    "roe": roe_flux,
    "hll": hll_flux,
    "hllc": hllc_flux,
    "vanleer": van_leer_flux,
    "ausm+": ausm_plus_flux,
}


def numerical_flux(kind, W_L, W_R, n, gas=GasModel(), **kwargs):
    """Interface flux for the named solver; consistent with the physical flux
    and antisymmetric under (L, R, n) -> (R, L, -n)."""
    try:
        solver = SOLVERS[kind]
    except KeyError:
        raise ValueError(f"unknown Riemann solver {kind!r}; choose from {sorted(SOLVERS)}")
    W_L = np.asarray(W_L, dtype=float)
    W_R = np.asarray(W_R, dtype=float)
    n = np.asarray(n, dtype=float)
    return solver(W_L, W_R, n, gas, **kwargs)
