"""Coefficient reconstruction from a single final-time snapshot.

At the snapshot time the evolution satisfies the stationary transport
identity div(a grad u_T) = -l_1 u_T + F(a; ., T) exactly at the discrete
level, so testing against interior basis functions gives a linear system
in the nodal coefficient values:

    G(u_T) a = -l_1 M u_T + M F        (interior rows)

with G_ij = -sum_{K contains j} (|K|/3) grad u_T . grad phi_i.  Both l_1
and F depend on the unknown coefficient, which the outer fixed-point loop
re-estimates from the current iterate.

The scalar l_1 needs special treatment: M u_T lies almost entirely inside
the range of G (a coefficient increment can absorb an eigenvalue shift),
so the data equation leaves l_1 nearly free and re-inserting the previous
iterate's eigenvalue contracts that direction only algebraically (the
error decays like 1/iteration -- measured, not a guess).  Each outer step
therefore refines the scalar by solving the self-consistency equation
phi(x) = l_1(candidate(x)) - x = 0 over the one-parameter family of
transport solves; phi is a near-touching parabola, so a fitted-parabola
root step converges in a handful of inner evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import (
    CoefficientField,
    OperatorPair,
    _element_geometry,
    apply_dirichlet,
    assemble_pair,
    assemble_stiffness,
    compute_norms,
    gradient_bound,
    l2_norm,
)
from .heat import check_u0_condition, compute_F, evolve, fit_log_slope
from .mesh import Mesh
from .spectral import solve_generalized_eig

__all__ = [
    "TransportSystem",
    "InversionOptions",
    "InversionReport",
    "StabilityTable",
    "TransportSolveError",
    "assemble_transport_operator",
    "build_transport_system",
    "solve_transport_ls",
    "admissible_projection",
    "fixed_point_invert",
    "stability_ratio_experiment",
]

_SMOOTHING_PASS_CAP = 5
# Inner eigenvalue-closure budget per outer step: one evaluation costs a
# transport solve plus a single-mode eigensolve, cheap next to the full
# eigensolve that opens the step.
_CLOSURE_EVAL_CAP = 7


class TransportSolveError(RuntimeError):
    """The regularized transport solve failed (singular normal matrix)."""


@dataclass(frozen=True)
class TransportSystem:
    """Weak transport operator, right-hand side and regularization data.

    G : (n_interior, n_nodes) operator on nodal coefficient values.
    rhs : interior test-function moments of -l_1 u_T + F.
    R : Laplacian stiffness over all coefficient nodes (Tikhonov metric).
    alpha : absolute regularization weight (already scaled).
    boundary_values : full-length array, prescribed a0 at boundary nodes.
    interior_nodes / boundary_nodes : index partition of the coefficient dofs.
    """

    G: sp.csr_matrix
    rhs: np.ndarray
    R: sp.csr_matrix
    alpha: float
    boundary_values: np.ndarray
    interior_nodes: np.ndarray
    boundary_nodes: np.ndarray


@dataclass(frozen=True)
class InversionOptions:
    """Knobs of the fixed-point reconstruction (alpha is relative to
    the largest diagonal of G'G)."""

    T: float
    modes: int = 40
    alpha: float = 1e-8
    tol_fp: float = 1e-8
    max_iter: int = 50
    cluster_tol: float = 1e-6


@dataclass(frozen=True)
class InversionReport:
    a_rec: CoefficientField
    iterations: int
    residual_trace: np.ndarray
    data_residual: float
    rel_error: float | None
    converged: bool
    stalled: bool
    lambda1_trace: np.ndarray
    smoothing_capped: int


def assemble_transport_operator(mesh: Mesh, u_T) -> sp.csr_matrix:
    """Assemble G with G a = -(A(a) u_T) restricted to interior rows, exactly.

    Exactness holds because the elementwise coefficient is the vertex
    average: each element spreads -(|K|) grad u_T . grad phi_i equally over
    its three coefficient vertices.
    """
    u_T = np.asarray(u_T, dtype=float)
    if u_T.shape != (mesh.n_nodes,):
        raise ValueError(f"snapshot has shape {u_T.shape}, expected ({mesh.n_nodes},)")
    scale = max(1.0, float(np.max(np.abs(u_T))))
    if np.any(np.abs(u_T[mesh.boundary_node_flags]) > 1e-12 * scale):
        raise ValueError("snapshot must vanish on boundary nodes")
    b, c, area = _element_geometry(mesh)
    ue = u_T[mesh.elements]
    gx = np.einsum("ei,ei->e", ue, b) / (2.0 * area)
    gy = np.einsum("ei,ei->e", ue, c) / (2.0 * area)
    # test-function factor per (element, local i): grad u_T . grad phi_i * |K|
    dot = (gx[:, None] * b + gy[:, None] * c) / 2.0
    entries = -dot / 3.0

    interior = np.flatnonzero(mesh.interior_node_flags)
    index_map = np.full(mesh.n_nodes, -1, dtype=int)
    index_map[interior] = np.arange(interior.size)

    rows_full = np.repeat(mesh.elements, 3, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 3)).ravel()
    vals = np.repeat(entries, 3, axis=1).ravel()
    keep = index_map[rows_full] >= 0
    G = sp.coo_matrix(
        (vals[keep], (index_map[rows_full[keep]], cols[keep])),
        shape=(interior.size, mesh.n_nodes),
    )
    return G.tocsr()


def build_transport_system(
    mesh: Mesh,
    unit_pair: OperatorPair,
    u_T,
    lambda1: float,
    F_values,
    alpha: float,
    a0,
) -> TransportSystem:
    """Assemble the regularized transport system for one outer iteration.

    alpha is relative: the stored weight is alpha times the largest
    diagonal of G'G (falling back to alpha itself when G vanishes).
    """
    if not unit_pair.is_reduced:
        raise ValueError("build_transport_system needs the reduced unit pair")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    G = assemble_transport_operator(mesh, u_T)
    M = unit_pair.full_mass
    F_values = np.asarray(F_values, dtype=float)
    rhs_full = -lambda1 * (M @ np.asarray(u_T, dtype=float)) + M @ F_values
    interior = np.flatnonzero(mesh.interior_node_flags)
    boundary = np.flatnonzero(mesh.boundary_node_flags)
    col_sq = np.asarray(G.multiply(G).sum(axis=0)).ravel()
    scale = float(col_sq.max()) if col_sq.max() > 0 else 1.0
    a0 = np.asarray(a0, dtype=float)
    if a0.shape != (mesh.n_nodes,):
        raise ValueError(f"boundary trace has shape {a0.shape}, expected ({mesh.n_nodes},)")
    return TransportSystem(
        G=G,
        rhs=rhs_full[interior],
        R=unit_pair.full_stiffness,
        alpha=float(alpha * scale),
        boundary_values=a0,
        interior_nodes=interior,
        boundary_nodes=boundary,
    )


def solve_transport_ls(system: TransportSystem, a_prior: CoefficientField) -> CoefficientField:
    """Minimize ||G a - rhs||^2 + alpha (a - prior)' R (a - prior), a|_G = a0.

    Solved through the symmetric normal equations after eliminating the
    constrained boundary values.  The result is *not* projected onto the
    admissible set; see admissible_projection.
    """
    G, R, alpha = system.G, system.R, system.alpha
    I, B = system.interior_nodes, system.boundary_nodes
    prior = a_prior.values
    H = (G.T @ G + alpha * R).tocsr()
    b = G.T @ system.rhs + alpha * (R @ prior)
    a = np.empty(system.boundary_values.shape[0])
    a[B] = system.boundary_values[B]
    rhs_int = b[I] - H[I][:, B] @ a[B]
    H_II = H[I][:, I].tocsc()
    sol = spla.spsolve(H_II, rhs_int)
    if not np.all(np.isfinite(sol)):
        diag = H_II.diagonal()
        cond = float(diag.max() / max(diag.min(), 1e-300))
        raise TransportSolveError(
            f"singular normal matrix in transport solve (diagonal ratio {cond:.3e})"
        )
    a[I] = sol
    return CoefficientField(values=a, a_plus=a_prior.a_plus,
                            boundary_trace=np.where(_boundary_mask(system), a, 0.0))


def _boundary_mask(system: TransportSystem) -> np.ndarray:
    mask = np.zeros(system.boundary_values.shape[0], dtype=bool)
    mask[system.boundary_nodes] = True
    return mask


def admissible_projection(
    mesh: Mesh,
    a,
    a0,
    a_plus: float,
) -> tuple[CoefficientField, bool]:
    """Project nodal values onto the admissible set.

    Clamps to [1, a_plus], re-imposes the boundary trace, and if the
    elementwise gradient exceeds a_plus runs up to five interior Jacobi
    smoothing passes (re-clamping after each).  Returns (field, capped):
    capped is True when the gradient bound is still violated after the
    final pass.
    """
    values = np.asarray(a, dtype=float).copy()
    a0 = np.asarray(a0, dtype=float)
    bnd = mesh.boundary_node_flags

    def enforce(v):
        v = np.clip(v, 1.0, a_plus)
        v[bnd] = a0[bnd]
        return v

    values = enforce(values)
    capped = False
    if gradient_bound(mesh, values) > a_plus:
        A = assemble_stiffness(mesh, 1.0)
        diag = A.diagonal()
        for _ in range(_SMOOTHING_PASS_CAP):
            smoothed = values - (A @ values) / diag
            values[~bnd] = smoothed[~bnd]
            values = enforce(values)
            if gradient_bound(mesh, values) <= a_plus:
                break
        else:
            capped = True
    trace = np.where(bnd, values, 0.0)
    return CoefficientField(values=values, a_plus=float(a_plus), boundary_trace=trace), capped


def _ground_eigenvalue(mesh: Mesh, values, cluster_tol: float) -> float:
    """Lowest eigenvalue of the operator pair for one nodal coefficient."""
    pair = apply_dirichlet(assemble_pair(mesh, values), mesh)
    return float(solve_generalized_eig(pair, 1, cluster_tol).hat_eigenvalues[0])


def _next_closure_point(samples: list[tuple[float, float]], x0: float) -> float | None:
    """Next trial eigenvalue for the root of phi(x) = l_1(candidate(x)) - x.

    With fewer than three samples take Picard steps x + phi.  Afterwards
    fit a parabola through the three smallest-|phi| samples and step to
    its left root -- the branch the plain iteration contracts toward; the
    right root is a spurious self-consistent pair -- or to the vertex when
    the parabola has no real root.  Falls back to a Picard step from the
    best sample, and returns None when the trial would duplicate an
    existing sample (nothing new to learn).
    """
    if len(samples) < 3:
        xq, phiq = samples[-1]
        xn = xq + phiq
    else:
        pts = sorted(samples, key=lambda t: abs(t[1]))[:3]
        xa = np.array([t[0] for t in pts])
        pa = np.array([t[1] for t in pts])
        xn = None
        if np.unique(xa).size == 3:
            c2, c1, c0 = np.polyfit(xa - xa[0], pa, 2)
            if np.all(np.isfinite([c2, c1, c0])) and c2 > 0:
                disc = c1 * c1 - 4.0 * c2 * c0
                if disc >= 0.0:
                    xn = float(xa[0] + (-c1 - np.sqrt(disc)) / (2.0 * c2))
                else:
                    xn = float(xa[0] - c1 / (2.0 * c2))
        if xn is None or not np.isfinite(xn) or xn <= 0.0 or abs(xn - x0) > 0.5 * abs(x0):
            xq, phiq = min(samples, key=lambda t: abs(t[1]))
            xn = xq + phiq
    if not np.isfinite(xn) or xn <= 0.0:
        return None
    if any(abs(xn - xs) <= 1e-15 * max(1.0, abs(xn)) for xs, _ in samples):
        return None
    return float(xn)


def fixed_point_invert(
    mesh: Mesh,
    u0,
    u_T,
    a0,
    a_plus: float,
    opts: InversionOptions,
    a_true: CoefficientField | None = None,
) -> InversionReport:
    """Reconstruct the coefficient from one final-time snapshot.

    Starting from the harmonic extension of the boundary trace, each
    iteration re-solves the eigenproblem at the current iterate, rebuilds
    F, solves the regularized transport system with the iterate as
    Tikhonov prior, and projects onto the admissible set.  The eigenvalue
    inserted into the right-hand side is refined within the step by the
    scalar closure phi(x) = l_1(candidate(x)) - x = 0 (see module
    docstring); the candidate belonging to the accepted scalar becomes the
    next iterate.  Stops when the L2 step drops below tol_fp; an
    increasing step or hitting max_iter sets the stall flag (on an
    increase the pre-increase iterate is kept).
    """
    if check_u0_condition(mesh, u0) <= 0:
        raise ValueError("initial state must satisfy int u0 * d_Omega > 0")
    a0 = np.asarray(a0, dtype=float)
    unit_pair = apply_dirichlet(assemble_pair(mesh, 1.0), mesh)
    I, B = unit_pair.interior_nodes, np.flatnonzero(mesh.boundary_node_flags)
    R = unit_pair.full_stiffness

    start = np.empty(mesh.n_nodes)
    start[B] = a0[B]
    start[I] = spla.spsolve(R[I][:, I].tocsc(), -(R[I][:, B] @ a0[B]))
    start = np.maximum(start, 1.0)
    current, _ = admissible_projection(mesh, start, a0, a_plus)

    M_full = unit_pair.full_mass
    assemble_transport_operator(mesh, u_T)  # validates the snapshot early
    trace, lam1s = [], []
    converged = stalled = False
    capped_count = 0
    system = None
    for _ in range(opts.max_iter):
        pair = apply_dirichlet(assemble_pair(mesh, current.values), mesh)
        spec = solve_generalized_eig(pair, opts.modes, opts.cluster_tol)
        lam_raw = float(spec.hat_eigenvalues[0])
        F = compute_F(spec, u0, opts.T).values

        samples: list[tuple[float, float, TransportSystem, CoefficientField, bool]] = []

        def evaluate(x: float) -> float:
            sys_x = build_transport_system(mesh, unit_pair, u_T, x, F, opts.alpha, a0)
            raw = solve_transport_ls(sys_x, current)
            projected, capped = admissible_projection(mesh, raw.values, a0, a_plus)
            phi = _ground_eigenvalue(mesh, projected.values, opts.cluster_tol) - x
            samples.append((x, phi, sys_x, projected, capped))
            return phi

        evaluate(lam_raw)
        phi_tol = 1e-10 * max(1.0, abs(lam_raw))
        while abs(samples[-1][1]) > phi_tol and len(samples) < _CLOSURE_EVAL_CAP:
            xn = _next_closure_point([(s[0], s[1]) for s in samples], lam_raw)
            if xn is None:
                break
            evaluate(xn)
        x_acc, phi_acc, system, projected, capped = min(samples, key=lambda t: abs(t[1]))
        capped_count += int(capped)
        step = l2_norm(projected.values - current.values, M_full)
        lam1s.append(x_acc + phi_acc)  # ground eigenvalue of the accepted iterate
        if trace and step > trace[-1]:
            trace.append(step)
            stalled = True
            break  # keep `current`, the pre-increase iterate
        trace.append(step)
        current = projected
        if step <= opts.tol_fp:
            converged = True
            break
    else:
        stalled = True

    data_residual = float(np.linalg.norm(system.G @ current.values - system.rhs)) if system is not None else float("nan")
    rel_error = None
    if a_true is not None:
        num = l2_norm(current.values - a_true.values, M_full)
        den = l2_norm(a_true.values, M_full)
        rel_error = float(num / den)
    return InversionReport(
        a_rec=current,
        iterations=len(trace),
        residual_trace=np.array(trace),
        data_residual=data_residual,
        rel_error=rel_error,
        converged=converged,
        stalled=stalled,
        lambda1_trace=np.array(lam1s),
        smoothing_capped=capped_count,
    )


@dataclass(frozen=True)
class StabilityTable:
    """Stability ratios rho(T) = ||a - a~|| / ||u(T) - u~(T)||_H2 over a grid.

    bracket(T) = e^{l_1 T} ||u - u~||_L2 + e^{-(l_2 - l_1) T} ||a - a~||_L2
    is the envelope the reciprocal-eigenvalue gap is measured against;
    c_fit are the per-T quotients |1/l_1 - 1/l_1~| / bracket(T).
    """

    T: np.ndarray
    l2_udiff: np.ndarray
    h2_udiff: np.ndarray
    rho: np.ndarray
    bracket: np.ndarray
    c_fit: np.ndarray
    indistinguishable: np.ndarray
    coeff_diff: float
    recip_gap: float
    fitted_rate: float
    lambda1: float
    lambda1_tilde: float
    lambda1_unit: float
    a_plus: float
    identical: bool

    @property
    def rate_low(self) -> float:
        return 0.8 * min(self.lambda1, self.lambda1_tilde)

    @property
    def rate_high(self) -> float:
        return 1.2 * self.a_plus * self.lambda1_unit

    def c_fit_spread(self) -> float:
        c = self.c_fit[np.isfinite(self.c_fit) & (self.c_fit > 0)]
        if c.size < 2:
            return float("nan")
        return float(c.max() / c.min())


def stability_ratio_experiment(
    mesh: Mesh,
    a: CoefficientField,
    a_tilde: CoefficientField,
    u0,
    T_grid,
    K: int = 40,
    cluster_tol: float = 1e-6,
) -> StabilityTable:
    """Measure how fast distinguishing two coefficients degrades with T.

    Identical coefficients return an empty, flagged table; per-T snapshot
    differences below 1e-14 are flagged indistinguishable and excluded
    from the rate fit.
    """
    grid = np.asarray(T_grid, dtype=float)
    if grid.size < 2 or np.any(grid <= 0):
        raise ValueError("T_grid must hold at least two positive times")
    unit_pair = apply_dirichlet(assemble_pair(mesh, 1.0), mesh)
    spec_unit = solve_generalized_eig(unit_pair, 1, cluster_tol)
    cdiff = l2_norm(a.values - a_tilde.values, unit_pair.full_mass)
    if cdiff == 0.0:
        empty = np.array([])
        return StabilityTable(
            T=empty, l2_udiff=empty, h2_udiff=empty, rho=empty, bracket=empty,
            c_fit=empty, indistinguishable=np.array([], dtype=bool), coeff_diff=0.0,
            recip_gap=0.0, fitted_rate=float("nan"), lambda1=float("nan"),
            lambda1_tilde=float("nan"), lambda1_unit=float(spec_unit.eigenvalues[0]),
            a_plus=a.a_plus, identical=True,
        )
    spec = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, a.values), mesh), K, cluster_tol)
    spec_t = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, a_tilde.values), mesh), K, cluster_tol)
    lam1, lam1t = float(spec.hat_eigenvalues[0]), float(spec_t.hat_eigenvalues[0])
    lam2 = float(spec.hat_eigenvalues[1])
    recip_gap = abs(1.0 / lam1 - 1.0 / lam1t)

    l2d = np.empty(grid.size)
    h2d = np.empty(grid.size)
    for i, t in enumerate(grid):
        du = evolve(spec, u0, t).u - evolve(spec_t, u0, t).u
        norms = compute_norms(du, unit_pair)
        l2d[i] = norms.l2
        h2d[i] = norms.h2_surrogate
    flagged = l2d < 1e-14
    with np.errstate(divide="ignore"):
        rho = np.where(h2d > 0, cdiff / np.where(h2d > 0, h2d, 1.0), np.inf)
    rho[flagged] = np.nan
    bracket = np.exp(lam1 * grid) * l2d + np.exp(-(lam2 - lam1) * grid) * cdiff
    c_fit = np.where(bracket > 0, recip_gap / np.where(bracket > 0, bracket, 1.0), np.nan)
    ok = ~flagged
    fitted = fit_log_slope(grid[ok], rho[ok]) if ok.sum() >= 2 else float("nan")
    return StabilityTable(
        T=grid, l2_udiff=l2d, h2_udiff=h2d, rho=rho, bracket=bracket, c_fit=c_fit,
        indistinguishable=flagged, coeff_diff=cdiff, recip_gap=recip_gap,
        fitted_rate=fitted, lambda1=lam1, lambda1_tilde=lam1t,
        lambda1_unit=float(spec_unit.eigenvalues[0]), a_plus=a.a_plus, identical=False,
    )
