"""Semi-discrete finite-volume residual and explicit time marching.

The residual of cell (i, j) is

    R = -(1/V) * sum over the four faces of  L * F

with face fluxes from MUSCL-reconstructed states fed to a Riemann solver.
Fields carry two ghost layers; boundary conditions are imposed by filling
the ghosts (fixed supersonic inflow on the left, extrapolated outflow with a
pinned mass flux on the right, periodic wrap in y). Time integration is the
three-stage TVD Runge-Kutta scheme.
"""

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import muscl
from .euler import AdmissibilityError, GasModel, conserved_to_primitive, primitive_to_conserved, sound_speed
from .grid import GHOST
from .riemann import numerical_flux


@dataclass(frozen=True)
class Scheme:
    """Spatial discretization choices for one run."""

    solver: str = "roe"
    limiter: str = "vanalbada"
    recon_vars: str = "conservative"  # "conservative" or "primitive"
    gas: GasModel = GasModel()
    entropy_fix: float = 0.0
    psi_floor: float = muscl.ZERO_FLOOR

    def __post_init__(self):
        if self.recon_vars not in ("conservative", "primitive"):
            raise ValueError(f"unknown reconstruction variables {self.recon_vars!r}")

    @property
    def order(self):
        return 1 if self.limiter == "none" else 2


@dataclass
class BoundarySpec:
    """Left fixed inflow, right extrapolated outflow with pinned mass flux,
    periodic top/bottom."""

    inflow: np.ndarray
    outflow_mass_flux: float = 1.0


class FieldState:
    """Conserved states on a grid, ghost layers included. U has shape
    (nx + 4, ny + 4, 4); interior cell (i, j) sits at U[i + 2, j + 2]."""

    def __init__(self, grid, U=None, t=0.0):
        self.grid = grid
        shape = (grid.nx + 2 * GHOST, grid.ny + 2 * GHOST, 4)
        if U is None:
            U = np.zeros(shape)
        if U.shape != shape:
            raise ValueError(f"field shape {U.shape} does not match grid {shape}")
        self.U = U
        self.t = t

    @property
    def interior(self):
        g = GHOST
        return self.U[g : g + self.grid.nx, g : g + self.grid.ny]

    def copy(self):
        return FieldState(self.grid, self.U.copy(), self.t)

    def primitive(self, gas=GasModel()):
        return conserved_to_primitive(self.interior, gas, validate=False)

    def transverse_velocity_norm(self):
        """Max |v| over the interior; the perturbation-error indicator."""
        return float(np.max(np.abs(self.interior[..., 2] / self.interior[..., 0])))


def uniform_field(grid, U_cell, t=0.0):
    f = FieldState(grid, t=t)
    f.U[...] = np.asarray(U_cell, dtype=float)
    return f


def apply_boundaries(field, bc):
    """Fill the ghost layers in place and return the field."""
    U = field.U
    nx, ny = field.grid.nx, field.grid.ny
    g = GHOST
    U[0] = bc.inflow
    U[1] = bc.inflow
    last = U[g + nx - 1]
    for k in (g + nx, g + nx + 1):
        U[k] = last
        U[k, :, 1] = bc.outflow_mass_flux
    # periodic wrap in y (also covers the ghost columns)
    U[:, 0] = U[:, ny]
    U[:, 1] = U[:, ny + 1]
    U[:, ny + 2] = U[:, 2]
    U[:, ny + 3] = U[:, 3]
    return field


def periodic_wrap_y(field):
    """Re-impose only the periodic wrap; used when x-ghosts are pinned."""
    U = field.U
    ny = field.grid.ny
    U[:, 0] = U[:, ny]
    U[:, 1] = U[:, ny + 1]
    U[:, ny + 2] = U[:, 2]
    U[:, ny + 3] = U[:, 3]
    return field


@dataclass
class FrozenPsi:
    """Limiter values evaluated once on a mean field and reused unchanged."""

    x: tuple  # (psi_L, psi_R), each (nx+1, ny, 4)
    y: tuple  # (psi_L, psi_R), each (nx, ny+1, 4)


def frozen_limiter_table(field, scheme, diag=None):
    """Per-face limiter values of the mean field (x faces and y faces).

    Faces whose second-order states would be inadmissible carry psi = 0,
    matching the first-order fallback of the nonlinear residual, so the
    frozen table reproduces the scheme exactly as it evaluates at the mean.
    """
    q = _recon_array(field, scheme)
    nx, ny = field.grid.nx, field.grid.ny

    def table(stencil):
        s_m1, s_m, s_p, s_p1 = stencil
        psi = muscl.face_psi(scheme.limiter, s_m1, s_m, s_p, s_p1, floor=scheme.psi_floor)
        q_minus, q_plus = muscl.face_states(scheme.limiter, s_m1, s_m, s_p, s_p1, psi=psi)
        bad = _bad_face_mask(q_minus, q_plus, scheme)
        if np.any(bad):
            if diag is not None:
                diag["first_order_fallbacks"] = diag.get("first_order_fallbacks", 0) + int(bad.sum())
            psi = (
                np.where(bad[..., None], 0.0, psi[0]),
                np.where(bad[..., None], 0.0, psi[1]),
            )
        return psi

    x = table(
        (
            q[0 : nx + 1, 2 : ny + 2],
            q[1 : nx + 2, 2 : ny + 2],
            q[2 : nx + 3, 2 : ny + 2],
            q[3 : nx + 4, 2 : ny + 2],
        )
    )
    y = table(
        (
            q[2 : nx + 2, 0 : ny + 1],
            q[2 : nx + 2, 1 : ny + 2],
            q[2 : nx + 2, 2 : ny + 3],
            q[2 : nx + 2, 3 : ny + 4],
        )
    )
    return FrozenPsi(x=x, y=y)


def _recon_array(field, scheme):
    if scheme.recon_vars == "primitive":
        return conserved_to_primitive(field.U, scheme.gas, validate=False)
    return field.U


def _bad_face_mask(q_minus, q_plus, scheme):
    """Faces where either reconstructed state is inadmissible."""
    if scheme.recon_vars == "primitive":
        return (
            (q_minus[..., 0] <= 0.0)
            | (q_minus[..., 3] <= 0.0)
            | (q_plus[..., 0] <= 0.0)
            | (q_plus[..., 3] <= 0.0)
        )
    gm1 = scheme.gas.gamma - 1.0

    def bad(U):
        rho = U[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            p = gm1 * (U[..., 3] - 0.5 * (U[..., 1] ** 2 + U[..., 2] ** 2) / rho)
        return (rho <= 0.0) | (p <= 0.0) | ~np.isfinite(p)

    return bad(q_minus) | bad(q_plus)


def _face_states_to_primitive(q_minus, q_plus, scheme, q_m, q_p, diag):
    """Convert reconstructed face states to primitive pairs, falling back to
    the first-order (cell value) states wherever reconstruction produced an
    inadmissible state."""
    bad = _bad_face_mask(q_minus, q_plus, scheme)
    if np.any(bad):
        if diag is not None:
            diag["first_order_fallbacks"] = diag.get("first_order_fallbacks", 0) + int(bad.sum())
        q_minus = np.where(bad[..., None], q_m, q_minus)
        q_plus = np.where(bad[..., None], q_p, q_plus)
    if scheme.recon_vars == "primitive":
        return q_minus, q_plus
    W_minus = conserved_to_primitive(q_minus, scheme.gas, validate=False)
    W_plus = conserved_to_primitive(q_plus, scheme.gas, validate=False)
    return W_minus, W_plus


def residual(field, scheme, frozen=None, mass_flux_fix_col=None, diag=None, return_fluxes=False):
    """Per-cell dU/dt over the interior, shape (nx, ny, 4). Ghosts must be
    filled beforehand.

    frozen supplies precomputed limiter values (stability-analysis path);
    mass_flux_fix_col names the interior column whose downstream x-face mass
    flux is overwritten with the upstream one.
    """
    grid = field.grid
    nx, ny = grid.nx, grid.ny
    g = GHOST
    q = _recon_array(field, scheme)
    kwargs = {"entropy_fix": scheme.entropy_fix} if scheme.solver == "roe" else {}

    # x-direction faces f = 0..nx between interior cells (f-1, j) and (f, j)
    s_m1 = q[0 : nx + 1, g : g + ny]
    s_m = q[1 : nx + 2, g : g + ny]
    s_p = q[2 : nx + 3, g : g + ny]
    s_p1 = q[3 : nx + 4, g : g + ny]
    psi = frozen.x if frozen is not None else None
    q_minus, q_plus = muscl.face_states(
        scheme.limiter, s_m1, s_m, s_p, s_p1, psi=psi, floor=scheme.psi_floor
    )
    W_minus, W_plus = _face_states_to_primitive(q_minus, q_plus, scheme, s_m, s_p, diag)
    n_x = grid.xface_n[g : g + nx + 1, g : g + ny]
    Fx = numerical_flux(scheme.solver, W_minus, W_plus, n_x, scheme.gas, **kwargs)
    if mass_flux_fix_col is not None:
        Fx[mass_flux_fix_col + 1, :, 0] = Fx[mass_flux_fix_col, :, 0]

    # y-direction faces l = 0..ny between interior cells (i, l-1) and (i, l)
    s_m1 = q[g : g + nx, 0 : ny + 1]
    s_m = q[g : g + nx, 1 : ny + 2]
    s_p = q[g : g + nx, 2 : ny + 3]
    s_p1 = q[g : g + nx, 3 : ny + 4]
    psi = frozen.y if frozen is not None else None
    q_minus, q_plus = muscl.face_states(
        scheme.limiter, s_m1, s_m, s_p, s_p1, psi=psi, floor=scheme.psi_floor
    )
    W_minus, W_plus = _face_states_to_primitive(q_minus, q_plus, scheme, s_m, s_p, diag)
    n_y = grid.yface_n[g : g + nx, g : g + ny + 1]
    Fy = numerical_flux(scheme.solver, W_minus, W_plus, n_y, scheme.gas, **kwargs)

    Lx = grid.xface_len[g : g + nx + 1, g : g + ny]
    Ly = grid.yface_len[g : g + nx, g : g + ny + 1]
    vol = grid.interior_volumes
    LFx = Lx[..., None] * Fx
    LFy = Ly[..., None] * Fy
    R = -(LFx[1:] - LFx[:-1] + LFy[:, 1:] - LFy[:, :-1]) / vol[..., None]
    if return_fluxes:
        return R, (Fx, Fy)
    return R


def stable_dt(field, cfl):
    """cfl * min over cells of characteristic length / (|u| + |v| + a)."""
    W = field.primitive()
    a = sound_speed(W)
    speed = np.abs(W[..., 1]) + np.abs(W[..., 2]) + a
    return cfl * float(np.min(field.grid.char_length / speed))


def rk3_combine(u0, rate, dt):
    """Three-stage TVD Runge-Kutta update; rate maps a state to its time
    derivative. Works on any array-like state (used on fields and on scalar
    test problems alike)."""
    u1 = u0 + dt * rate(u0)
    u2 = 0.75 * u0 + 0.25 * (u1 + dt * rate(u1))
    return u0 / 3.0 + (2.0 / 3.0) * (u2 + dt * rate(u2))


def _check_interior_admissible(field, gas):
    U = field.interior
    rho = U[..., 0]
    if not np.all(rho > 0.0):
        raise AdmissibilityError(f"negative density at t={field.t:.6g}")
    e_int = U[..., 3] - 0.5 * (U[..., 1] ** 2 + U[..., 2] ** 2) / rho
    if not np.all(e_int > 0.0):
        raise AdmissibilityError(f"negative internal energy at t={field.t:.6g}")


def rk3_step(field, dt, scheme, bc, mass_flux_fix_col=None, diag=None):
    """Advance the field by one RK3 step (ghosts refreshed before each stage)."""
    grid = field.grid
    g = GHOST

    def rate(U_ext):
        stage = FieldState(grid, np.ascontiguousarray(U_ext), field.t)
        apply_boundaries(stage, bc)
        out = np.zeros_like(U_ext)
        out[g : g + grid.nx, g : g + grid.ny] = residual(
            stage, scheme, mass_flux_fix_col=mass_flux_fix_col, diag=diag
        )
        return out

    new = FieldState(grid, rk3_combine(field.U, rate, dt), field.t + dt)
    apply_boundaries(new, bc)
    _check_interior_admissible(new, scheme.gas)
    return new


@dataclass
class MarchResult:
    field: FieldState
    steps: int
    converged: bool
    reason: str
    residual_history: list = dataclass_field(default_factory=list)


def march(
    field,
    scheme,
    bc,
    cfl=0.1,
    t_end=None,
    residual_tol=None,
    max_steps=200_000,
    mass_flux_fix_col=None,
    callbacks=(),
    stop=None,
    residual_check_every=10,
    diag=None,
):
    """Advance until t_end, residual convergence, a stop predicate, or the
    step budget. Admissibility failures are reported in the result rather
    than raised."""
    field = field.copy()
    apply_boundaries(field, bc)
    for cb in callbacks:
        cb(field, 0)
    steps = 0
    history = []
    reason = "t_end" if t_end is not None else "max_steps"
    converged = False
    while steps < max_steps:
        if t_end is not None and field.t >= t_end - 1e-12:
            reason = "t_end"
            break
        dt = stable_dt(field, cfl)
        if t_end is not None:
            dt = min(dt, t_end - field.t)
        try:
            field = rk3_step(field, dt, scheme, bc, mass_flux_fix_col=mass_flux_fix_col, diag=diag)
        except AdmissibilityError as err:
            reason = f"inadmissible: {err}"
            break
        steps += 1
        for cb in callbacks:
            cb(field, steps)
        if stop is not None and stop(field):
            reason = "stop_condition"
            break
        if residual_tol is not None and steps % residual_check_every == 0:
            r = np.max(
                np.abs(residual(field, scheme, mass_flux_fix_col=mass_flux_fix_col))
            )
            history.append((field.t, float(r)))
            if r < residual_tol:
                converged = True
                reason = "converged"
                break
    else:
        reason = "max_steps"
    return MarchResult(field=field, steps=steps, converged=converged, reason=reason, residual_history=history)
