"""Spectral heat flow, the first-mode correction field, and decay diagnostics.

Evolution uses the strictly ordered spectrum: u(t) = sum_k e^{-l_k t} P_k u0
over the computed clusters.  The correction field

    F(a; x, T) = d_t u(x, T) + l_1 u(x, T)

removes the ground-mode rate from the snapshot; by construction it has no
cluster-1 content and decays like e^{-l_2 T}.  (Expanded in the eigenbasis
its tail coefficients are (l_1 - l_k) e^{-l_k T}, k >= 2.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import (
    CoefficientField,
    apply_dirichlet,
    assemble_mass,
    assemble_pair,
    l2_norm,
    validate_coefficient,
)
from .mesh import BoundaryBand, Mesh, distance_to_boundary
from .fem import nodal_gradients
from .spectral import SpectralDecomposition, solve_generalized_eig

__all__ = [
    "HeatSnapshot",
    "CorrectionF",
    "FLipschitzTable",
    "LowerBoundReport",
    "evolve",
    "compute_F",
    "fit_log_slope",
    "f_lipschitz_experiment",
    "lower_bound_check",
    "check_u0_condition",
    "certify_decay_threshold",
]


@dataclass(frozen=True)
class HeatSnapshot:
    """State of the spectral heat flow at one time.

    u and du_dt are full nodal fields (zero on the boundary); the
    truncation bound is e^{-l_K t} times the L2 norm of the part of u0
    outside the computed span, a valid tail bound since every dropped mode
    decays at least that fast.
    """

    t: float
    u: np.ndarray
    du_dt: np.ndarray
    modes_used: int
    truncation_bound: float


@dataclass(frozen=True)
class CorrectionF:
    """Correction field at time T; decay_rate_estimate is filled only when
    compute_F is given a fit grid."""

    T: float
    values: np.ndarray
    decay_rate_estimate: float | None = None


def _mode_data(spec: SpectralDecomposition, u0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(coefficients, clustered rates, tail of u0 outside the span)."""
    u0 = np.asarray(u0, dtype=float)
    wi = spec.restrict(u0)
    boundary_scale = max(1.0, float(np.max(np.abs(u0))))
    full = np.zeros(spec.n_nodes, dtype=bool)
    full[spec.interior_nodes] = True
    if np.any(np.abs(u0[~full]) > 1e-12 * boundary_scale):
        raise ValueError("initial state must vanish on boundary nodes")
    coeffs = spec.eigenvectors.T @ (spec.mass_int @ wi)
    rates = spec.hat_eigenvalues[spec.cluster_index]
    tail = wi - spec.eigenvectors @ coeffs
    return coeffs, rates, tail


def evolve(spec: SpectralDecomposition, u0, t: float) -> HeatSnapshot:
    """Heat snapshot sum_k e^{-l_k t} P_k u0 with its time derivative."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    coeffs, rates, tail = _mode_data(spec, u0)
    damp = np.exp(-rates * t)
    u = spec.extend(spec.eigenvectors @ (coeffs * damp))
    du = spec.extend(spec.eigenvectors @ (-(rates * coeffs) * damp))
    bound = float(np.exp(-spec.hat_eigenvalues[-1] * t)) * l2_norm(tail, spec.mass_int)
    return HeatSnapshot(t=float(t), u=u, du_dt=du, modes_used=spec.K, truncation_bound=bound)


def compute_F(spec: SpectralDecomposition, u0, T: float, fit_T_grid=None) -> CorrectionF:
    """Correction field d_t u + l_1 u at time T, evaluated as the tail series.

    With fit_T_grid (>= 2 positive times) the exponential decay rate of
    ||F|| is fitted over that grid and stored on the result.
    """
    if T <= 0:
        raise ValueError(f"snapshot time must be positive, got {T}")
    coeffs, rates, _ = _mode_data(spec, u0)
    lam1 = spec.hat_eigenvalues[0]

    def tail_field(t: float) -> np.ndarray:
        w = (lam1 - rates) * np.exp(-rates * t)
        w[spec.cluster_index == 0] = 0.0
        return spec.eigenvectors @ (coeffs * w)

    values = spec.extend(tail_field(T))
    rate = None
    if fit_T_grid is not None:
        grid = np.asarray(fit_T_grid, dtype=float)
        norms = np.array([l2_norm(tail_field(t), spec.mass_int) for t in grid])
        rate = fit_log_slope(grid, norms)
    return CorrectionF(T=float(T), values=values, decay_rate_estimate=rate)


def fit_log_slope(ts, values) -> float:
    """Least-squares slope of log(values) against ts; nan if under two positive points."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = values > 0
    if mask.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(ts[mask], np.log(values[mask]), 1)
    return float(slope)


@dataclass(frozen=True)
class FLipschitzTable:
    """Per-T Lipschitz quotients ||F(a) - F(a~)|| / ||a - a~||."""

    T: np.ndarray
    diff_norm: np.ndarray
    ratio: np.ndarray
    coeff_diff: float
    fitted_slope: float
    beta2: float            # min of the two second strict eigenvalues
    identical: bool


def f_lipschitz_experiment(
    mesh: Mesh,
    a: CoefficientField,
    a_tilde: CoefficientField,
    u0,
    T_grid,
    K: int = 40,
    cluster_tol: float = 1e-6,
) -> FLipschitzTable:
    """Tabulate the coefficient-Lipschitz quotients of F over a time grid.

    The fitted log-slope of the quotient is compared downstream against
    -min(l_2(a), l_2(a~)).  Identical coefficients short-circuit to the
    zero-numerator path (flagged, no fit).
    """
    validate_coefficient(mesh, a)
    validate_coefficient(mesh, a_tilde)
    grid = np.asarray(T_grid, dtype=float)
    if grid.size < 2 or np.any(grid <= 0):
        raise ValueError("T_grid must hold at least two positive times")
    mass = assemble_mass(mesh)
    cdiff = l2_norm(a.values - a_tilde.values, mass)
    spec = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, a.values), mesh), K, cluster_tol)
    if cdiff == 0.0:
        zero = np.zeros(grid.size)
        return FLipschitzTable(T=grid, diff_norm=zero, ratio=zero, coeff_diff=0.0,
                               fitted_slope=float("nan"),
                               beta2=float(spec.hat_eigenvalues[1]), identical=True)
    spec_t = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, a_tilde.values), mesh), K, cluster_tol)
    diffs = np.empty(grid.size)
    for i, t in enumerate(grid):
        Fa = compute_F(spec, u0, t).values
        Fb = compute_F(spec_t, u0, t).values
        diffs[i] = l2_norm(spec.restrict(Fa - Fb), spec.mass_int)
    ratios = diffs / cdiff
    beta2 = float(min(spec.hat_eigenvalues[1], spec_t.hat_eigenvalues[1]))
    return FLipschitzTable(T=grid, diff_norm=diffs, ratio=ratios, coeff_diff=cdiff,
                           fitted_slope=fit_log_slope(grid, ratios), beta2=beta2,
                           identical=False)


@dataclass(frozen=True)
class LowerBoundReport:
    """Minima of the ground-mode comparison quotients at time T.

    u_ratio_min / dudt_ratio_min run over interior nodes; the gradient
    quotient and the raw |grad phi1| minimum run over the boundary band;
    eig_floor_min is min over all nodes of phi1^2 + 1_band |grad phi1|^2.
    """

    T: float
    epsilon: float
    u0_weight: float
    u_ratio_min: float
    dudt_ratio_min: float
    grad_ratio_min: float
    grad_phi1_band_min: float
    eig_floor_min: float
    lambda1: float

    @property
    def all_positive(self) -> bool:
        return min(self.u_ratio_min, self.dudt_ratio_min, self.grad_ratio_min,
                   self.grad_phi1_band_min, self.eig_floor_min) > 0.0


def check_u0_condition(mesh: Mesh, u0) -> float:
    """Weighted mass int u0 * d_Omega dx (mass-matrix quadrature)."""
    u0 = np.asarray(u0, dtype=float)
    d = distance_to_boundary(mesh)
    return float(u0 @ (assemble_mass(mesh) @ d))


def lower_bound_check(
    mesh: Mesh,
    spec: SpectralDecomposition,
    u0,
    T: float,
    band: BoundaryBand,
) -> LowerBoundReport:
    """Evaluate the ground-mode lower-bound quotients at time T.

    Requires int u0 d_Omega > 0 (otherwise the snapshot has no certified
    sign and the quotients are meaningless).
    """
    weight = check_u0_condition(mesh, u0)
    if weight <= 0:
        raise ValueError(f"int u0 * d_Omega = {weight:.6g} must be positive for lower bounds")
    if T <= 0:
        raise ValueError(f"snapshot time must be positive, got {T}")
    snap = evolve(spec, u0, T)
    lam1 = float(spec.hat_eigenvalues[0])
    phi1 = spec.extend(spec.eigenvectors[:, 0])
    interior = np.zeros(spec.n_nodes, dtype=bool)
    interior[spec.interior_nodes] = True
    decay = np.exp(-lam1 * T)

    den = decay * phi1[interior]
    u_ratio = snap.u[interior] / den
    dudt_ratio = -snap.du_dt[interior] / den

    g_u = nodal_gradients(mesh, snap.u)
    g_phi = nodal_gradients(mesh, phi1)
    gu2 = np.einsum("nd,nd->n", g_u, g_u)
    gp2 = np.einsum("nd,nd->n", g_phi, g_phi)
    bmask = band.node_mask
    with np.errstate(divide="ignore", invalid="ignore"):
        grad_ratio = gu2[bmask] / (decay ** 2 * gp2[bmask])
    grad_ratio = grad_ratio[np.isfinite(grad_ratio)]
    floor = phi1 ** 2 + np.where(bmask, gp2, 0.0)

    return LowerBoundReport(
        T=float(T),
        epsilon=band.epsilon,
        u0_weight=weight,
        u_ratio_min=float(np.min(u_ratio)),
        dudt_ratio_min=float(np.min(dudt_ratio)),
        grad_ratio_min=float(np.min(grad_ratio)) if grad_ratio.size else float("nan"),
        grad_phi1_band_min=float(np.min(np.sqrt(gp2[bmask]))) if bmask.any() else float("nan"),
        eig_floor_min=float(np.min(floor)),
        lambda1=lam1,
    )


def certify_decay_threshold(
    mesh: Mesh,
    spec: SpectralDecomposition,
    u0,
    T_grid,
    band: BoundaryBand,
) -> float | None:
    """Smallest grid time at which all lower-bound minima are positive, or None."""
    for t in sorted(np.asarray(T_grid, dtype=float)):
        if t <= 0:
            continue
        report = lower_bound_check(mesh, spec, u0, t, band)
        if report.all_positive:
            return float(t)
    return None
