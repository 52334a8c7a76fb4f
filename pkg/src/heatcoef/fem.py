"""P1 finite elements: stiffness/mass assembly, Dirichlet reduction, norms.

The diffusion coefficient lives in the same P1 nodal space as the solution;
inside each element it is replaced by the average of its three vertex
values, which keeps assembly exact for piecewise-constant data and makes
the weak transport operator of the inversion module an exact factorization
of a |-> A(a) u.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh

__all__ = [
    "CoefficientField",
    "OperatorPair",
    "AdmissibilityError",
    "Norms",
    "assemble_stiffness",
    "assemble_mass",
    "assemble_pair",
    "apply_dirichlet",
    "compute_norms",
    "l2_norm",
    "make_field",
    "validate_coefficient",
    "gradient_bound",
    "element_gradients",
    "nodal_gradients",
]


class AdmissibilityError(ValueError):
    """A coefficient field violates the admissible-set constraints."""


@dataclass(frozen=True)
class CoefficientField:
    """Nodal diffusion coefficient with its admissibility data.

    values : nodal values on all mesh nodes (>= 1, <= a_plus when admissible).
    a_plus : upper bound of the admissible set (> 1).
    boundary_trace : full-length array carrying the prescribed boundary
        values at boundary nodes; interior entries are zero by convention.
    """

    values: np.ndarray
    a_plus: float
    boundary_trace: np.ndarray


@dataclass(frozen=True)
class OperatorPair:
    """Stiffness/mass pair, optionally Dirichlet-reduced.

    A freshly assembled pair holds the full matrices over all nodes.  After
    apply_dirichlet, `stiffness` and `mass` are the interior-node blocks,
    `interior_nodes` maps reduced index -> full node index,
    `interior_index_map` maps full node index -> reduced index (-1 on the
    boundary), and the unreduced matrices stay available as full_*.
    """

    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    interior_index_map: np.ndarray | None = None
    interior_nodes: np.ndarray | None = None
    full_stiffness: sp.csr_matrix | None = None
    full_mass: sp.csr_matrix | None = None

    @property
    def is_reduced(self) -> bool:
        return self.interior_nodes is not None


class Norms(NamedTuple):
    l2: float
    h1: float
    h2_surrogate: float


def _element_geometry(mesh: Mesh):
    """P1 shape data per element: (b, c, area) with grad(lambda_i) = (b_i, c_i) / (2 area)."""
    p = mesh.nodes[mesh.elements]
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * np.einsum("ei,ei->e", x, b)
    return b, c, area


def _coefficient_values(a, n_nodes: int) -> np.ndarray:
    if isinstance(a, CoefficientField):
        v = a.values
    else:
        v = np.asarray(a, dtype=float)
        if v.ndim == 0:
            v = np.full(n_nodes, float(v))
    if v.shape != (n_nodes,):
        raise ValueError(f"coefficient has shape {v.shape}, expected ({n_nodes},)")
    return v


def assemble_stiffness(mesh: Mesh, a) -> sp.csr_matrix:
    """Assemble A(a)_ij = sum_K abar_K int_K grad(phi_i).grad(phi_j).

    `a` may be a scalar, a nodal array, or a CoefficientField; the element
    value abar_K is the mean of the three vertex values.
    """
    v = _coefficient_values(a, mesh.n_nodes)
    b, c, area = _element_geometry(mesh)
    abar = v[mesh.elements].mean(axis=1)
    scale = abar / (4.0 * area)
    local = (np.einsum("ei,ej->eij", b, b) + np.einsum("ei,ej->eij", c, c)) * scale[:, None, None]
    rows = np.repeat(mesh.elements, 3, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 3)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    return A.tocsr()


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Assemble the consistent P1 mass matrix, local block (|K|/12)[[2,1,1],[1,2,1],[1,1,2]]."""
    _, _, area = _element_geometry(mesh)
    template = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = area[:, None, None] * template
    rows = np.repeat(mesh.elements, 3, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 3)).ravel()
    M = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes))
    return M.tocsr()


def assemble_pair(mesh: Mesh, a) -> OperatorPair:
    """Assemble the full (unreduced) stiffness/mass pair for coefficient a."""
    return OperatorPair(stiffness=assemble_stiffness(mesh, a), mass=assemble_mass(mesh))


def apply_dirichlet(pair: OperatorPair, mesh: Mesh) -> OperatorPair:
    """Eliminate boundary rows/columns, keeping the interior-node blocks."""
    if pair.is_reduced:
        raise ValueError("pair is already Dirichlet-reduced")
    interior = np.flatnonzero(mesh.interior_node_flags)
    if interior.size == 0:
        raise ValueError("mesh has no interior nodes")
    index_map = np.full(mesh.n_nodes, -1, dtype=int)
    index_map[interior] = np.arange(interior.size)
    A = pair.stiffness[interior][:, interior].tocsr()
    M = pair.mass[interior][:, interior].tocsr()
    return OperatorPair(
        stiffness=A,
        mass=M,
        interior_index_map=index_map,
        interior_nodes=interior,
        full_stiffness=pair.stiffness,
        full_mass=pair.mass,
    )


def l2_norm(w: np.ndarray, mass: sp.spmatrix) -> float:
    """Mass-matrix L2 norm sqrt(w' M w)."""
    return float(np.sqrt(max(w @ (mass @ w), 0.0)))


def compute_norms(w, pair: OperatorPair) -> Norms:
    """L2, H1 and H2-surrogate norms of a nodal field.

    `pair` must be the Dirichlet-reduced pair of the *unit* coefficient so
    the H1 seminorm uses the plain Laplacian stiffness.  The H2 surrogate
    adds the L2 norm of the discrete Laplacian z solving M z = -A(1) w on
    interior nodes; it is only defined for fields vanishing on the boundary
    and raises otherwise.
    """
    if not pair.is_reduced:
        raise ValueError("compute_norms requires a Dirichlet-reduced unit-coefficient pair")
    w = np.asarray(w, dtype=float)
    n = pair.full_mass.shape[0]
    if w.shape != (n,):
        raise ValueError(f"field has shape {w.shape}, expected ({n},)")
    l2sq = max(w @ (pair.full_mass @ w), 0.0)
    h1sq = l2sq + max(w @ (pair.full_stiffness @ w), 0.0)
    boundary = np.delete(np.arange(n), pair.interior_nodes)
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    if boundary.size and np.max(np.abs(w[boundary])) > 1e-12 * scale:
        raise ValueError("H2 surrogate undefined: field is nonzero on boundary nodes")
    wi = w[pair.interior_nodes]
    z = spla.spsolve(pair.mass.tocsc(), -(pair.stiffness @ wi))
    h2sq = h1sq + max(z @ (pair.mass @ z), 0.0)
    return Norms(l2=float(np.sqrt(l2sq)), h1=float(np.sqrt(h1sq)), h2_surrogate=float(np.sqrt(h2sq)))


def make_field(mesh: Mesh, values, a_plus: float) -> CoefficientField:
    """Wrap nodal values as a CoefficientField, taking the trace from the boundary nodes."""
    v = np.asarray(values, dtype=float)
    if v.shape != (mesh.n_nodes,):
        raise ValueError(f"expected {mesh.n_nodes} nodal values, got shape {v.shape}")
    trace = np.where(mesh.boundary_node_flags, v, 0.0)
    return CoefficientField(values=v.copy(), a_plus=float(a_plus), boundary_trace=trace)


def validate_coefficient(mesh: Mesh, field: CoefficientField, tol: float = 1e-12) -> None:
    """Raise AdmissibilityError (naming the worst node) on bound/trace violations."""
    v = field.values
    if field.a_plus <= 1.0:
        raise AdmissibilityError(f"a_plus must exceed 1, got {field.a_plus}")
    low = np.argmin(v)
    if v[low] < 1.0 - tol:
        x, y = mesh.nodes[low]
        raise AdmissibilityError(
            f"coefficient value {v[low]:.6g} < 1 at node {low} (x={x:.6g}, y={y:.6g})"
        )
    high = np.argmax(v)
    if v[high] > field.a_plus + tol:
        x, y = mesh.nodes[high]
        raise AdmissibilityError(
            f"coefficient value {v[high]:.6g} > a_plus={field.a_plus:.6g} at node {high} "
            f"(x={x:.6g}, y={y:.6g})"
        )
    bnd = mesh.boundary_node_flags
    mismatch = np.abs(v[bnd] - field.boundary_trace[bnd])
    if mismatch.size and np.max(mismatch) > tol:
        k = np.flatnonzero(bnd)[int(np.argmax(mismatch))]
        raise AdmissibilityError(
            f"boundary value {v[k]:.6g} differs from trace {field.boundary_trace[k]:.6g} at node {k}"
        )


def element_gradients(mesh: Mesh, w) -> np.ndarray:
    """Constant gradient of the P1 interpolant on each element, shape (n_elements, 2)."""
    w = np.asarray(w, dtype=float)
    b, c, area = _element_geometry(mesh)
    we = w[mesh.elements]
    gx = np.einsum("ei,ei->e", we, b) / (2.0 * area)
    gy = np.einsum("ei,ei->e", we, c) / (2.0 * area)
    return np.column_stack([gx, gy])


def nodal_gradients(mesh: Mesh, w) -> np.ndarray:
    """Area-weighted average of the element gradients at each node."""
    g = element_gradients(mesh, w)
    _, _, area = _element_geometry(mesh)
    acc = np.zeros((mesh.n_nodes, 2))
    wsum = np.zeros(mesh.n_nodes)
    for local in range(3):
        idx = mesh.elements[:, local]
        np.add.at(acc, idx, g * area[:, None])
        np.add.at(wsum, idx, area)
    return acc / wsum[:, None]


def gradient_bound(mesh: Mesh, values) -> float:
    """Largest elementwise |grad a_h|, the discrete stand-in for the C1 seminorm."""
    g = element_gradients(mesh, values)
    return float(np.max(np.hypot(g[:, 0], g[:, 1])))
