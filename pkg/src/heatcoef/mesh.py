"""Structured triangulations of the unit square and boundary geometry.

The mesh is the standard right-triangle split of an nx-by-ny cell grid:
every cell is cut along the diagonal from its lower-left to its upper-right
corner, so the stiffness stencil of the unit coefficient reduces to the
familiar five-point star.  Node index = j * (nx + 1) + i for grid position
(i, j), i.e. nodal fields reshape to (ny + 1, nx + 1) row-major.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Mesh",
    "BoundaryBand",
    "build_structured_mesh",
    "distance_to_boundary",
    "boundary_band",
    "write_grid",
    "read_grid",
]


@dataclass(frozen=True)
class Mesh:
    """Conforming P1 triangulation of the closed unit square.

    Attributes
    ----------
    nodes : (n_nodes, 2) float array of vertex coordinates.
    elements : (n_elements, 3) int array of counterclockwise vertex triples.
    boundary_node_flags : (n_nodes,) bool array, True on the four sides.
    h : nominal element diameter (length of the cell diagonal).
    nx, ny : generating cell counts; None for hand-built meshes, in which
        case the grid-dump helpers are unavailable.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_node_flags: np.ndarray
    h: float
    nx: int | None = None
    ny: int | None = None

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def interior_node_flags(self) -> np.ndarray:
        return ~self.boundary_node_flags

    def signed_areas(self) -> np.ndarray:
        """Signed area of every element; positive iff stored counterclockwise."""
        p = self.nodes[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


@dataclass(frozen=True)
class BoundaryBand:
    """Nodes lying strictly within distance epsilon of the boundary."""

    epsilon: float
    node_mask: np.ndarray


def build_structured_mesh(nx: int, ny: int) -> Mesh:
    """Triangulate the unit square into 2*nx*ny right triangles.

    Cell diagonals alternate with the checkerboard parity of the cell, so
    the triangulation inherits the full symmetry group of the square on
    even grids.  That keeps genuinely symmetry-paired eigenvalues of the
    discrete pencil (modes (m,n) and (n,m)) exactly degenerate instead of
    split at O(h^2), which the spectral clustering downstream relies on.

    Rejects grids below 2x2 cells: a coarser grid has no interior node and
    every downstream Dirichlet-reduced operator would be empty.
    """
    if nx < 2 or ny < 2:
        raise ValueError(f"grid must have at least 2 cells per side, got nx={nx}, ny={ny}")
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii, jj = ii.ravel(), jj.ravel()
    n00 = jj * (nx + 1) + ii
    n10 = n00 + 1
    n01 = n00 + (nx + 1)
    n11 = n01 + 1
    even = (ii + jj) % 2 == 0
    # even cells: diagonal n00-n11; odd cells: diagonal n10-n01 (both CCW)
    first = np.where(even[:, None],
                     np.column_stack([n00, n10, n11]),
                     np.column_stack([n00, n10, n01]))
    second = np.where(even[:, None],
                      np.column_stack([n00, n11, n01]),
                      np.column_stack([n10, n11, n01]))
    elements = np.vstack([first, second])

    gi = np.tile(np.arange(nx + 1), ny + 1)
    gj = np.repeat(np.arange(ny + 1), nx + 1)
    flags = (gi == 0) | (gi == nx) | (gj == 0) | (gj == ny)

    h = float(np.hypot(1.0 / nx, 1.0 / ny))
    return Mesh(nodes=nodes, elements=elements, boundary_node_flags=flags, h=h, nx=nx, ny=ny)


def distance_to_boundary(mesh: Mesh) -> np.ndarray:
    """Nodal distance to the boundary of the unit square, min(x, 1-x, y, 1-y)."""
    x = mesh.nodes[:, 0]
    y = mesh.nodes[:, 1]
    return np.minimum.reduce([x, 1.0 - x, y, 1.0 - y])


def boundary_band(mesh: Mesh, epsilon: float) -> BoundaryBand:
    """Mask of nodes with distance-to-boundary strictly below epsilon.

    epsilon must lie in (0, 0.5): at 0.5 the band swallows the whole square
    and the complements used by the lower-bound checks become empty.
    """
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"band width must satisfy 0 < epsilon < 0.5, got {epsilon}")
    d = distance_to_boundary(mesh)
    return BoundaryBand(epsilon=float(epsilon), node_mask=d < epsilon)


def write_grid(path, mesh: Mesh, values) -> None:
    """Dump a nodal field in the plain-text grid format.

    First line is "nx ny"; then ny+1 lines, one mesh row per line with the
    nx+1 node values in x order, full double precision.
    """
    if mesh.nx is None or mesh.ny is None:
        raise ValueError("grid dumps require a structured mesh with nx, ny set")
    v = np.asarray(values, dtype=float)
    if v.shape != (mesh.n_nodes,):
        raise ValueError(f"expected {mesh.n_nodes} nodal values, got shape {v.shape}")
    rows = v.reshape(mesh.ny + 1, mesh.nx + 1)
    lines = [f"{mesh.nx} {mesh.ny}"]
    for row in rows:
        lines.append(" ".join(format(x, ".17g") for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_grid(path) -> tuple[int, int, np.ndarray]:
    """Read a grid dump; returns (nx, ny, flat nodal values in node order)."""
    text = Path(path).read_text(encoding="ascii").strip().splitlines()
    if not text:
        raise ValueError(f"empty grid file: {path}")
    head = text[0].split()
    if len(head) != 2:
        raise ValueError(f"malformed grid header {text[0]!r} in {path}")
    nx, ny = int(head[0]), int(head[1])
    if len(text) != ny + 2:
        raise ValueError(f"grid file {path} has {len(text) - 1} rows, expected {ny + 1}")
    rows = []
    for line in text[1:]:
        row = np.array([float(t) for t in line.split()])
        if row.size != nx + 1:
            raise ValueError(f"grid row with {row.size} values, expected {nx + 1} in {path}")
        rows.append(row)
    return nx, ny, np.concatenate(rows)
