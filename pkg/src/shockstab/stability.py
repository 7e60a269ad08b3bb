"""Linear stability analysis of the discrete scheme about a steady mean field.

Small perturbations of the cell states obey d(delta q)/dt = S * delta q with
the limiter frozen at its mean-field values. S is assembled face by face:
each face flux is linearized about the mean reconstructed interface states
via central-difference Jacobians, the reconstruction chain rule distributes
those Jacobians onto the four stencil cells, and every face deposits into
the rows of its two adjacent cells with opposite signs. The resulting
stencil couples a cell to itself, its four neighbors, and the four
second-ring cells along the axes; with the limiter off the second ring
vanishes and the first-order operator is recovered.

In the conservative form the unknowns are the conserved-variable errors; in
the primitive form reconstruction acts on primitive variables and each
cell's block row is premultiplied by the inverse of dU/dW at that cell.

Ghost cells are treated as error-free: their perturbations are identically
zero, so they contribute to S only through the mean flux gradients. The
optional outflow coupling switch instead ties right-ghost errors to the last
interior column through the extrapolation rule (mass flux stays pinned).
"""

from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.linalg

from . import muscl
from .euler import GasModel, conserved_to_primitive, primitive_to_conserved, transform_matrix_dU_dW
from .grid import GHOST
from .riemann import numerical_flux
from .solver import FieldState, frozen_limiter_table, periodic_wrap_y, residual


class UnsteadyMeanError(RuntimeError):
    """The linearization point is not steady to the required tolerance."""


@dataclass
class StabilityMatrix:
    S: np.ndarray
    cells: list  # active interior cells (i, j), i-major order
    index: dict  # (i, j) -> block row
    recon_vars: str
    grid_shape: tuple
    mean_primitive: np.ndarray  # interior mean W, used for variable transforms
    meta: dict = dataclass_field(default_factory=dict)

    @property
    def n_active(self):
        return len(self.cells)


@dataclass
class EigenSpectrum:
    eigenvalues: np.ndarray  # sorted: descending real part, then descending imag
    eigenvectors: np.ndarray | None
    max_real: float
    argmax: int


@dataclass
class UnstableMode:
    eigenvalue: complex
    fields: dict  # variable name -> complex (nx, ny) array, nan outside the mask
    residual: float


def flux_jacobians(kind, q_minus, q_plus, n, gas, recon_vars, delta=1e-7, entropy_fix=0.0):
    """Central-difference Jacobians (dF/dq_minus, dF/dq_plus) of the numerical
    flux with respect to the two interface states, in the configured variable
    set. Column k uses F(q + delta*e_k) - F(q - delta*e_k) over 2*delta."""
    q_minus = np.asarray(q_minus, dtype=float)
    q_plus = np.asarray(q_plus, dtype=float)
    kwargs = {"entropy_fix": entropy_fix} if kind == "roe" else {}
    gas = gas or GasModel()

    def to_prim(q):
        if recon_vars == "primitive":
            return q
        return conserved_to_primitive(q, gas, validate=False)

    def flux(qL, qR):
        F = numerical_flux(kind, to_prim(qL), to_prim(qR), n, gas, **kwargs)
        if not np.all(np.isfinite(F)):
            raise FloatingPointError("non-finite numerical flux during linearization")
        return F

    shape = q_minus.shape[:-1]
    A_minus = np.empty(shape + (4, 4))
    A_plus = np.empty(shape + (4, 4))
    for k in range(4):
        e = np.zeros(4)
        e[k] = delta
        A_minus[..., :, k] = (flux(q_minus + e, q_plus) - flux(q_minus - e, q_plus)) / (2 * delta)
        A_plus[..., :, k] = (flux(q_minus, q_plus + e) - flux(q_minus, q_plus - e)) / (2 * delta)
    return A_minus, A_plus


def active_cells(nx, ny, mask=None):
    """Active interior cells in i-major order with their block-row indices."""
    cells = []
    for i in range(nx):
        for j in range(ny):
            if mask is None or mask[i, j]:
                cells.append((i, j))
    index = {c: k for k, c in enumerate(cells)}
    return cells, index


def _face_mean_states(field, scheme, frozen):
    """Mean reconstructed interface states for all x and y faces."""
    nx, ny = field.grid.nx, field.grid.ny
    g = GHOST
    if scheme.recon_vars == "primitive":
        q = conserved_to_primitive(field.U, scheme.gas, validate=False)
    else:
        q = field.U
    x_minus, x_plus = muscl.face_states(
        scheme.limiter,
        q[0 : nx + 1, g : g + ny],
        q[1 : nx + 2, g : g + ny],
        q[2 : nx + 3, g : g + ny],
        q[3 : nx + 4, g : g + ny],
        psi=frozen.x,
    )
    y_minus, y_plus = muscl.face_states(
        scheme.limiter,
        q[g : g + nx, 0 : ny + 1],
        q[g : g + nx, 1 : ny + 2],
        q[g : g + nx, 2 : ny + 3],
        q[g : g + nx, 3 : ny + 4],
        psi=frozen.y,
    )
    return (x_minus, x_plus), (y_minus, y_plus)


def assemble_matrix(
    mean_field,
    scheme,
    active_mask=None,
    jac_delta=1e-7,
    couple_outflow_ghosts=False,
    steadiness_tol=1e-10,
    on_unsteady="error",
):
    """Stability matrix about a steady mean field (ghosts already filled).

    on_unsteady: "error" refuses when the active-cell residual exceeds
    steadiness_tol; "allow" records it in the metadata and proceeds (frozen
    sub-domain studies and distorted grids linearize about means that are not
    discrete steady states).
    """
    grid = mean_field.grid
    nx, ny = grid.nx, grid.ny
    g = GHOST
    cells, index = active_cells(nx, ny, active_mask)
    if not cells:
        raise ValueError("no active cells")

    R = residual(mean_field, scheme)
    if active_mask is None:
        r_active = float(np.max(np.abs(R)))
    else:
        r_active = float(np.max(np.abs(R[active_mask])))
    if r_active > steadiness_tol and on_unsteady == "error":
        raise UnsteadyMeanError(
            f"mean field residual {r_active:.3e} exceeds {steadiness_tol:.1e}; "
            "pass on_unsteady='allow' to analyze a non-steady linearization point"
        )

    frozen = frozen_limiter_table(mean_field, scheme)
    (x_minus, x_plus), (y_minus, y_plus) = _face_mean_states(mean_field, scheme, frozen)

    n_x = grid.xface_n[g : g + nx + 1, g : g + ny]
    n_y = grid.yface_n[g : g + nx, g : g + ny + 1]
    Ax_minus, Ax_plus = flux_jacobians(
        scheme.solver, x_minus, x_plus, n_x, scheme.gas, scheme.recon_vars,
        delta=jac_delta, entropy_fix=scheme.entropy_fix,
    )
    Ay_minus, Ay_plus = flux_jacobians(
        scheme.solver, y_minus, y_plus, n_y, scheme.gas, scheme.recon_vars,
        delta=jac_delta, entropy_fix=scheme.entropy_fix,
    )

    def chain_blocks(A_minus, A_plus, psi_L, psi_R):
        # columns scale with the frozen limiter diagonal
        b_m1 = -0.5 * A_minus * psi_L[..., None, :]
        b_m = A_minus * (1.0 + 0.5 * psi_L)[..., None, :]
        b_p = A_plus * (1.0 + 0.5 * psi_R)[..., None, :]
        b_p1 = -0.5 * A_plus * psi_R[..., None, :]
        return b_m1, b_m, b_p, b_p1

    bx = chain_blocks(Ax_minus, Ax_plus, frozen.x[0], frozen.x[1])
    by = chain_blocks(Ay_minus, Ay_plus, frozen.y[0], frozen.y[1])

    vol = grid.interior_volumes
    Lx = grid.xface_len[g : g + nx + 1, g : g + ny]
    Ly = grid.yface_len[g : g + nx, g : g + ny + 1]

    N = len(cells)
    S = np.zeros((4 * N, 4 * N))
    ghost_T = np.diag([1.0, 0.0, 1.0, 1.0])  # outflow extrapolation, mass flux pinned

    def resolve_column(i, j):
        """Map a stencil cell to (block column, weight) or None if error-free."""
        if 0 <= j < ny:
            jj = j
        else:
            jj = j % ny  # periodic wrap
        if 0 <= i < nx:
            k = index.get((i, jj))
            return None if k is None else (k, None)
        if i >= nx and couple_outflow_ghosts:
            k = index.get((nx - 1, jj))
            return None if k is None else (k, ghost_T)
        return None

    def deposit(row, coeff, stencil, blocks, fi, fj):
        r0 = 4 * row
        for (ci, cj), B in zip(stencil, blocks):
            col = resolve_column(ci, cj)
            if col is None:
                continue
            k, weight = col
            block = B[fi, fj]
            if weight is not None:
                block = block @ weight
            S[r0 : r0 + 4, 4 * k : 4 * k + 4] += coeff * block

    # x faces: face f sits between interior cells (f-1, j) and (f, j)
    for f in range(nx + 1):
        for j in range(ny):
            stencil = ((f - 2, j), (f - 1, j), (f, j), (f + 1, j))
            L = Lx[f, j]
            left = index.get((f - 1, j))
            if left is not None:
                deposit(left, -L / vol[f - 1, j], stencil, bx, f, j)
            right = index.get((f, j)) if 0 <= f < nx else None
            if right is not None:
                deposit(right, L / vol[f, j], stencil, bx, f, j)

    # y faces: face l sits between interior cells (i, l-1) and (i, l);
    # stencil columns with j outside the interior wrap periodically
    for i in range(nx):
        for l in range(ny + 1):
            stencil = ((i, l - 2), (i, l - 1), (i, l), (i, l + 1))
            L = Ly[i, l]
            if 0 <= l - 1 < ny:
                below = index.get((i, l - 1))
                if below is not None:
                    deposit(below, -L / vol[i, l - 1], stencil, by, i, l)
            if 0 <= l < ny:
                here = index.get((i, l))
                if here is not None:
                    deposit(here, L / vol[i, l], stencil, by, i, l)

    mean_W = conserved_to_primitive(mean_field.interior, scheme.gas, validate=False)
    if scheme.recon_vars == "primitive":
        for (i, j), k in index.items():
            T = transform_matrix_dU_dW(mean_W[i, j], scheme.gas)
            S[4 * k : 4 * k + 4, :] = np.linalg.solve(T, S[4 * k : 4 * k + 4, :])

    meta = {
        "mean_residual_active": r_active,
        "jac_delta": jac_delta,
        "recon_vars": scheme.recon_vars,
        "solver": scheme.solver,
        "limiter": scheme.limiter,
        "couple_outflow_ghosts": couple_outflow_ghosts,
        "n_active": N,
    }
    return StabilityMatrix(
        S=S,
        cells=cells,
        index=index,
        recon_vars=scheme.recon_vars,
        grid_shape=(nx, ny),
        mean_primitive=mean_W,
        meta=meta,
    )


def spectrum(matrix, want_vectors=False):
    """Full complex spectrum via the dense general eigensolver (Hessenberg
    reduction plus shifted QR), sorted by descending real part."""
    S = matrix.S if isinstance(matrix, StabilityMatrix) else np.asarray(matrix)
    if not np.all(np.isfinite(S)):
        raise ValueError("stability matrix has non-finite entries")
    if want_vectors:
        vals, vecs = scipy.linalg.eig(S)
    else:
        vals = scipy.linalg.eigvals(S)
        vecs = None
    order = np.lexsort((-vals.imag, -vals.real))
    vals = vals[order]
    if vecs is not None:
        vecs = vecs[:, order]
    _check_conjugate_pairs(vals)
    max_real = float(vals[0].real)
    return EigenSpectrum(eigenvalues=vals, eigenvectors=vecs, max_real=max_real, argmax=0)


def _check_conjugate_pairs(vals, rtol=1e-6):
    scale = max(1.0, float(np.max(np.abs(vals))))
    complex_vals = vals[np.abs(vals.imag) > rtol * scale]
    if complex_vals.size == 0:
        return
    # every strictly complex eigenvalue must have a conjugate partner
    conj = np.conj(complex_vals)
    for z in complex_vals:
        if np.min(np.abs(conj - z)) > 1e-6 * scale:
            raise FloatingPointError(f"eigenvalue {z} lacks a conjugate partner")


def unstable_mode(matrix, eig, which=None):
    """Eigenvector of the max-real-part eigenvalue mapped back onto the grid.

    Returns per-variable complex fields for both the matrix's native
    variables and the primitive set (rho, u, v, p); entries outside the
    active mask are nan. The vector is scaled to unit maximum magnitude with
    the largest component rotated to the positive real axis.
    """
    if eig.eigenvectors is None:
        raise ValueError("spectrum was computed without eigenvectors")
    k = eig.argmax if which is None else which
    lam = eig.eigenvalues[k]
    vec = eig.eigenvectors[:, k].copy()
    res = float(np.linalg.norm(matrix.S @ vec - lam * vec) / np.linalg.norm(vec))
    # unit max magnitude, largest component rotated to the positive real axis
    vec = vec / vec[np.argmax(np.abs(vec))]

    nx, ny = matrix.grid_shape
    native = np.full((nx, ny, 4), np.nan + 0j)
    for (i, j), r in matrix.index.items():
        native[i, j] = vec[4 * r : 4 * r + 4]

    if matrix.recon_vars == "primitive":
        prim = native
    else:
        prim = np.full_like(native, np.nan + 0j)
        for (i, j) in matrix.index:
            T = transform_matrix_dU_dW(matrix.mean_primitive[i, j])
            prim[i, j] = np.linalg.solve(T, native[i, j])
    fields = {
        "rho": prim[..., 0],
        "u": prim[..., 1],
        "v": prim[..., 2],
        "p": prim[..., 3],
    }
    return UnstableMode(eigenvalue=complex(lam), fields=fields, residual=res)


def summarize_spectrum(eig, neutral_band=1e-9):
    """Split the spectrum summary into the raw maximum and the maximum outside
    the neutral band.

    The steady discrete shock lies on a one-parameter family (its position is
    free under the mass-flux-pinned outflow), so the operator carries a
    structural displacement eigenvalue at zero, computed as roundoff noise.
    Stability classifications and growth-rate comparisons use the non-neutral
    maximum; both values are reported.
    """
    ev = eig.eigenvalues
    neutral = np.abs(ev.real) <= neutral_band
    summary = {
        "max_real_all": float(ev.real.max()),
        "n_neutral": int(neutral.sum()),
        "neutral_band": float(neutral_band),
    }
    if np.all(neutral):
        summary["max_real"] = 0.0
    else:
        summary["max_real"] = float(ev.real[~neutral].max())
    return summary


def neutral_band_for(profile_or_residual, floor=1e-9, cap=1e-3):
    """Neutral-mode exclusion band scaled to the linearization residual: the
    displacement eigenvalue shifts by the amount the mean fails steadiness."""
    r = getattr(profile_or_residual, "residual_unfixed", profile_or_residual)
    return max(floor, min(100.0 * float(r), cap))


def localization_case(kind, config):
    """Mean field and active mask for the frozen-region source studies.

    upstream: every interior cell carries the pre-shock state, the right
    ghost layers carry the internal and post-shock states (the shock sits on
    the outflow boundary). downstream: mirrored, with the shock on the inflow
    boundary. shock: the converged profile with only the shock column and one
    neighbor column on each side active, everything else frozen at the mean.
    """
    from .grid import make_grid
    from .shock import initial_states, intermediate_state, solve_1d_steady, project_profile
    from .solver import apply_boundaries, uniform_field

    gas = config.gas
    U_L, U_R = initial_states(config.m0, gas)
    U_M = primitive_to_conserved(intermediate_state(config.m0, config.epsilon, gas), gas)
    grid = make_grid(config.grid)
    nx, ny = grid.nx, grid.ny
    g = GHOST
    meta = {"case": kind}
    if kind == "upstream":
        field = uniform_field(grid, U_L)
        field.U[g + nx] = U_M
        field.U[g + nx + 1] = U_R
        periodic_wrap_y(field)
        mask = np.ones((nx, ny), dtype=bool)
    elif kind == "downstream":
        field = uniform_field(grid, U_R)
        apply_boundaries(field, config.boundary())
        field.U[1] = U_M
        field.U[0] = U_L
        periodic_wrap_y(field)
        mask = np.ones((nx, ny), dtype=bool)
    elif kind == "shock":
        profile = solve_1d_steady(config)
        field = project_profile(profile, grid, config)
        mask = np.zeros((nx, ny), dtype=bool)
        i_s = config.shock_column
        mask[max(i_s - 1, 0) : min(i_s + 2, nx), :] = True
        meta["profile_residual_unfixed"] = profile.residual_unfixed
    else:
        raise ValueError(f"unknown localization case {kind!r}")
    return field, mask, meta


def frozen_matvec(mean_field, scheme, matrix, x):
    """Directional derivative of the frozen-limiter nonlinear residual:
    (R(mean + x) - R(mean - x)) / 2 restricted to active cells, with x living
    in the matrix's variable space. The independent check of S @ x."""
    frozen = frozen_limiter_table(mean_field, scheme)
    cells = matrix.cells
    g = GHOST

    def perturbed_rows(sign):
        f = mean_field.copy()
        if scheme.recon_vars == "primitive":
            W = conserved_to_primitive(f.U, scheme.gas, validate=False)
            for (i, j), k in matrix.index.items():
                W[g + i, g + j] += sign * x[4 * k : 4 * k + 4]
            f.U[...] = primitive_to_conserved(W, scheme.gas, validate=False)
        else:
            for (i, j), k in matrix.index.items():
                f.U[g + i, g + j] += sign * x[4 * k : 4 * k + 4]
        periodic_wrap_y(f)
        R = residual(f, scheme, frozen=frozen)
        out = np.empty(4 * len(cells))
        for (i, j), k in matrix.index.items():
            out[4 * k : 4 * k + 4] = R[i, j]
        return out

    y = 0.5 * (perturbed_rows(+1.0) - perturbed_rows(-1.0))
    if scheme.recon_vars == "primitive":
        for (i, j), k in matrix.index.items():
            T = transform_matrix_dU_dW(matrix.mean_primitive[i, j], scheme.gas)
            y[4 * k : 4 * k + 4] = np.linalg.solve(T, y[4 * k : 4 * k + 4])
    return y
