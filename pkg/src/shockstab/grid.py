"""Structured quadrilateral grids with ghost layers and face geometry.

Cells are indexed (i, j) with i along x (the shock-normal direction) and j
along y. Two ghost layers surround the interior on every side; arrays are
stored ghost-extended, so interior cell (i, j) lives at array index
(i + 2, j + 2). Node line k of the extended node arrays is interior node
line k - 2.

Face normals are stored with a fixed global orientation: x-faces point in
+x (from cell i-1 to cell i) and y-faces point in +y. Outward normals for a
given cell follow from the side (E, N, W, S) convention.
"""

from dataclasses import dataclass, field

import numpy as np

GHOST = 2


@dataclass(frozen=True)
class GridSpec:
    """Grid family selector: Cartesian, stretched aspect ratio, or distorted."""

    kind: str = "cartesian"
    nx: int = 11
    ny: int = 11
    dx: float = 1.0
    delta: float = 1.0  # aspect ratio dy/dx
    alpha: float = 0.0  # distortion angle in degrees

    def __post_init__(self):
        if self.kind not in ("cartesian", "aspect", "distorted"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.nx < 3 or self.ny < 3:
            raise ValueError("nx and ny must be at least 3")
        if not self.delta > 0.0:
            raise ValueError("aspect ratio delta must be positive")
        if not abs(self.alpha) < 45.0:
            raise ValueError("distortion angle must satisfy |alpha| < 45 degrees")

    @property
    def dy(self):
        return self.delta * self.dx


class StructuredGrid:
    """Quadrilateral mesh geometry: volumes, face lengths, unit normals.

    Construction computes everything once; instances are immutable in use and
    safe to share across workers.
    """

    def __init__(self, node_x, node_y, spec=None):
        # node_x/node_y are interior node coordinates, shape (nx+1, ny+1)
        node_x = np.asarray(node_x, dtype=float)
        node_y = np.asarray(node_y, dtype=float)
        self.nx = node_x.shape[0] - 1
        self.ny = node_x.shape[1] - 1
        self.spec = spec
        self.node_x, self.node_y = _extend_nodes(node_x, node_y)
        self._build_geometry()

    def _build_geometry(self):
        x, y = self.node_x, self.node_y
        # shoelace volume of each extended cell
        x00, x10, x11, x01 = x[:-1, :-1], x[1:, :-1], x[1:, 1:], x[:-1, 1:]
        y00, y10, y11, y01 = y[:-1, :-1], y[1:, :-1], y[1:, 1:], y[:-1, 1:]
        self.vol = 0.5 * (
            (x00 * y10 - x10 * y00)
            + (x10 * y11 - x11 * y10)
            + (x11 * y01 - x01 * y11)
            + (x01 * y00 - x00 * y01)
        )
        # x-faces: tangent from node (k, l) to node (k, l+1), normal rotated to +x
        tx = x[:, 1:] - x[:, :-1]
        ty = y[:, 1:] - y[:, :-1]
        self.xface_len = np.hypot(tx, ty)
        self.xface_n = np.stack([ty, -tx], axis=-1) / self.xface_len[..., None]
        # y-faces: tangent from node (k, l) to node (k+1, l), normal rotated to +y
        tx = x[1:, :] - x[:-1, :]
        ty = y[1:, :] - y[:-1, :]
        self.yface_len = np.hypot(tx, ty)
        self.yface_n = np.stack([-ty, tx], axis=-1) / self.yface_len[..., None]

        g, nx, ny = GHOST, self.nx, self.ny
        vol_i = self.vol[g : g + nx, g : g + ny]
        if not np.all(vol_i > 0.0):
            raise ValueError("grid has non-positive cell volumes")
        # characteristic length per interior cell: volume / longest face
        le = self.xface_len[g + 1 : g + nx + 1, g : g + ny]
        lw = self.xface_len[g : g + nx, g : g + ny]
        ln = self.yface_len[g : g + nx, g + 1 : g + ny + 1]
        ls = self.yface_len[g : g + nx, g : g + ny]
        self.char_length = vol_i / np.max(np.stack([le, lw, ln, ls]), axis=0)

    @property
    def interior_volumes(self):
        g = GHOST
        return self.vol[g : g + self.nx, g : g + self.ny]

    def cell_geometry(self, i, j):
        """Volume and the four (length, outward normal) pairs, ordered E, N, W, S."""
        if not (-GHOST <= i < self.nx + GHOST and -GHOST <= j < self.ny + GHOST):
            raise IndexError(f"cell ({i}, {j}) outside interior-or-ghost range")
        gi, gj = i + GHOST, j + GHOST
        east = (self.xface_len[gi + 1, gj], self.xface_n[gi + 1, gj].copy())
        west = (self.xface_len[gi, gj], -self.xface_n[gi, gj])
        north = (self.yface_len[gi, gj + 1], self.yface_n[gi, gj + 1].copy())
        south = (self.yface_len[gi, gj], -self.yface_n[gi, gj])
        return self.vol[gi, gj], [east, north, west, south]

    def cell_centers(self):
        """Interior cell centroids (vertex average), two arrays (nx, ny)."""
        g = GHOST
        x = self.node_x[g : g + self.nx + 1, g : g + self.ny + 1]
        y = self.node_y[g : g + self.nx + 1, g : g + self.ny + 1]
        cx = 0.25 * (x[:-1, :-1] + x[1:, :-1] + x[1:, 1:] + x[:-1, 1:])
        cy = 0.25 * (y[:-1, :-1] + y[1:, :-1] + y[1:, 1:] + y[:-1, 1:])
        return cx, cy

    def export_nodes_csv(self, path):
        """Write interior node coordinates as CSV rows (i, j, x, y)."""
        g = GHOST
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("i,j,x,y\n")
            for i in range(self.nx + 1):
                for j in range(self.ny + 1):
                    f.write(
                        f"{i},{j},{self.node_x[g + i, g + j]!r},"
                        f"{self.node_y[g + i, g + j]!r}\n"
                    )


def _extend_nodes(node_x, node_y):
    """Add two ghost node layers by reflecting across the boundary lines.

    The generated boundaries are straight (vertical in x, horizontal in y),
    so mirroring the neighbor nodes reproduces the interior cell shapes in
    the ghost layers.
    """
    nxp, nyp = node_x.shape
    x = np.empty((nxp + 2 * GHOST, nyp + 2 * GHOST))
    y = np.empty_like(x)
    g = GHOST
    x[g : g + nxp, g : g + nyp] = node_x
    y[g : g + nxp, g : g + nyp] = node_y
    # x-direction: reflect about the vertical boundary lines
    for m in (1, 2):
        x[g - m, g : g + nyp] = 2.0 * node_x[0] - node_x[m]
        y[g - m, g : g + nyp] = node_y[m]
        x[g + nxp - 1 + m, g : g + nyp] = 2.0 * node_x[-1] - node_x[-1 - m]
        y[g + nxp - 1 + m, g : g + nyp] = node_y[-1 - m]
    # y-direction: reflect about the horizontal boundary lines (fills corners too)
    for m in (1, 2):
        x[:, g - m] = x[:, g + m]
        y[:, g - m] = 2.0 * y[:, g] - y[:, g + m]
        x[:, g + nyp - 1 + m] = x[:, g + nyp - 1 - m]
        y[:, g + nyp - 1 + m] = 2.0 * y[:, g + nyp - 1] - y[:, g + nyp - 1 - m]
    return x, y


def make_cartesian(nx, ny, dx, dy):
    """Uniform rectangle grid; every volume is dx*dy."""
    if nx < 3 or ny < 3:
        raise ValueError("nx and ny must be at least 3")
    if not (dx > 0.0 and dy > 0.0):
        raise ValueError("dx and dy must be positive")
    xs = dx * np.arange(nx + 1)
    ys = dy * np.arange(ny + 1)
    node_x, node_y = np.meshgrid(xs, ys, indexing="ij")
    return StructuredGrid(node_x, node_y, spec=GridSpec("cartesian" if dy == dx else "aspect", nx, ny, dx, dy / dx))


def make_distorted(nx, ny, dx, dy, alpha):
    """Sawtooth-sheared grid: interior node columns shift in x by
    alternating +/- (dy/2)*tan(alpha) per node row, so the faces running in
    the y direction meet the x axis at the distortion angle alpha (degrees).
    alpha = 0 reproduces the Cartesian grid exactly.
    """
    if not abs(alpha) < 45.0:
        raise ValueError("distortion angle must satisfy |alpha| < 45 degrees")
    if nx < 3 or ny < 3:
        raise ValueError("nx and ny must be at least 3")
    xs = dx * np.arange(nx + 1)
    ys = dy * np.arange(ny + 1)
    node_x, node_y = np.meshgrid(xs, ys, indexing="ij")
    shift = 0.5 * dy * np.tan(np.radians(alpha))
    signs = np.where(np.arange(ny + 1) % 2 == 0, 1.0, -1.0)
    node_x[1:nx, :] += shift * signs[None, :]
    return StructuredGrid(node_x, node_y, spec=GridSpec("distorted", nx, ny, dx, dy / dx, alpha))


def make_grid(spec):
    """Build the grid described by a GridSpec."""
    if spec.kind == "distorted":
        grid = make_distorted(spec.nx, spec.ny, spec.dx, spec.dy, spec.alpha)
    else:
        grid = make_cartesian(spec.nx, spec.ny, spec.dx, spec.dy)
    grid.spec = spec
    return grid
