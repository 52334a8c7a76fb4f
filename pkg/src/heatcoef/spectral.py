"""Generalized eigendecomposition of the elliptic pencil and its diagnostics.

Solves A(a) v = lambda M v on the Dirichlet-reduced P1 spaces (dense LAPACK
path, desk scale), merges near-degenerate eigenvalues into a strictly
ordered spectrum, and provides the spectral projections plus the gap,
min-max and perturbation experiments built on them.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .fem import (
    AdmissibilityError,
    CoefficientField,
    OperatorPair,
    apply_dirichlet,
    assemble_mass,
    assemble_pair,
    l2_norm,
)
from .mesh import Mesh

__all__ = [
    "SpectralDecomposition",
    "GapReport",
    "SandwichReport",
    "EigenPerturbationTable",
    "ProjectionPerturbationTable",
    "EigensolverError",
    "solve_generalized_eig",
    "strictify_spectrum",
    "check_gap_property",
    "gap_report",
    "spectral_projection_apply",
    "regroup_spectrum",
    "projection_difference_norm",
    "mass_sqrt",
    "verify_minmax_sandwich",
    "eigen_perturbation_experiment",
    "projection_perturbation_experiment",
    "weyl_ratios",
]

# Normalization exponent 1 + n/4 of the eigenvalue-difference experiments
# (n = 2 space dimensions).
RATE_EXPONENT_2D = 1.5

_RESIDUAL_TOL = 1e-8


class EigensolverError(RuntimeError):
    """Dense generalized eigensolver failed or returned poor residuals."""


@dataclass(frozen=True)
class SpectralDecomposition:
    """Leading eigenpairs of A(a) v = lambda M v on interior nodes.

    eigenvalues : (K,) ascending, multiplicities repeated.
    eigenvectors : (n_interior, K), M-orthonormal columns; the first is
        normalized to positive M-weighted mean.
    hat_eigenvalues : strictly increasing cluster values (means).
    multiplicities : cluster sizes, summing to K.
    cluster_index : (K,) position of each eigenvalue's cluster.
    mass_int / interior_nodes / n_nodes : reduced mass matrix and the
        interior-to-full index data needed to apply projections to full
        nodal fields.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    hat_eigenvalues: np.ndarray
    multiplicities: np.ndarray
    cluster_index: np.ndarray
    cluster_tol: float
    K: int
    mass_int: sp.csr_matrix
    interior_nodes: np.ndarray
    n_nodes: int

    @property
    def n_clusters(self) -> int:
        return self.hat_eigenvalues.size

    def cluster_slice(self, k: int) -> slice:
        """Column slice of the eigenvectors belonging to strict index k (1-based)."""
        if not 1 <= k <= self.n_clusters:
            raise IndexError(f"strict index k={k} outside 1..{self.n_clusters}")
        offsets = np.concatenate([[0], np.cumsum(self.multiplicities)])
        return slice(int(offsets[k - 1]), int(offsets[k]))

    def restrict(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n_nodes,):
            raise ValueError(f"field has shape {w.shape}, expected ({self.n_nodes},)")
        return w[self.interior_nodes]

    def extend(self, wi: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_nodes)
        out[self.interior_nodes] = wi
        return out


@dataclass(frozen=True)
class GapReport:
    """Separation of the strict spectrum against delta * lambda^-gamma."""

    gamma: float
    delta: float
    satisfied: np.ndarray  # per consecutive strict pair
    delta_max: float       # largest delta for which every pair passes
    rho: np.ndarray        # isolation radii delta / (4 lambda_k^gamma)

    @property
    def all_satisfied(self) -> bool:
        return bool(np.all(self.satisfied))


@dataclass(frozen=True)
class SandwichReport:
    """Per-index check lambda_k(1) <= lambda_k(a) <= a_plus * lambda_k(1)."""

    a_plus: float
    rel_slack: float
    lambdas: np.ndarray
    lambdas_unit: np.ndarray
    lower_ok: np.ndarray
    upper_ok: np.ndarray
    first_violation: tuple | None  # (k, side, lambda, bound)

    @property
    def ok(self) -> bool:
        return self.first_violation is None


def solve_generalized_eig(pair: OperatorPair, K: int, cluster_tol: float = 1e-6) -> SpectralDecomposition:
    """Lowest K eigenpairs of the Dirichlet-reduced pencil, M-orthonormal.

    Dense LAPACK solve; the artifact targets meshes with at most a few
    thousand interior nodes, where this is both exact and fast.
    """
    if not pair.is_reduced:
        raise ValueError("eigensolve requires a Dirichlet-reduced pair")
    n = pair.stiffness.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"requested K={K} eigenpairs from a pencil of size {n}")
    A = pair.stiffness.toarray()
    M = pair.mass.toarray()
    try:
        vals, vecs = la.eigh(A, M, subset_by_index=(0, K - 1))
    except la.LinAlgError as exc:  # pragma: no cover - depends on LAPACK failure
        raise EigensolverError(f"generalized eigensolver failed: {exc}") from exc

    res = pair.stiffness @ vecs - (pair.mass @ vecs) * vals[None, :]
    scale = np.abs(vals)[None, :] * np.abs(pair.mass @ vecs) + 1e-300
    rel = np.max(np.abs(res) / np.max(scale, axis=0, keepdims=True))
    if not np.isfinite(vals).all() or rel > _RESIDUAL_TOL:
        raise EigensolverError(
            f"eigensolver residual {rel:.3e} above {_RESIDUAL_TOL:.0e} "
            f"(n={n}, K={K}); pencil may be ill-conditioned"
        )

    ones = np.ones(n)
    mean0 = ones @ (pair.mass @ vecs[:, 0])
    if mean0 < 0:
        vecs[:, 0] = -vecs[:, 0]
    for j in range(1, K):
        lead = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[lead, j] < 0:
            vecs[:, j] = -vecs[:, j]

    hat, mult = strictify_spectrum(vals, cluster_tol)
    cluster_index = np.repeat(np.arange(hat.size), mult)
    return SpectralDecomposition(
        eigenvalues=vals,
        eigenvectors=vecs,
        hat_eigenvalues=hat,
        multiplicities=mult,
        cluster_index=cluster_index,
        cluster_tol=float(cluster_tol),
        K=K,
        mass_int=pair.mass,
        interior_nodes=pair.interior_nodes.copy(),
        n_nodes=pair.full_mass.shape[0],
    )


def strictify_spectrum(eigenvalues, cluster_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge consecutive eigenvalues with relative gap below cluster_tol.

    Returns (hat_eigenvalues, multiplicities); each cluster value is the
    mean of its members and the output sequence is strictly increasing.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("expected a non-empty 1-d eigenvalue array")
    if np.any(np.diff(lam) < 0):
        raise ValueError("eigenvalues must be sorted ascending")
    hat, mult = [], []
    start = 0
    for i in range(1, lam.size + 1):
        if i == lam.size or lam[i] - lam[i - 1] >= cluster_tol * max(abs(lam[i - 1]), 1e-300):
            hat.append(lam[start:i].mean())
            mult.append(i - start)
            start = i
    return np.array(hat), np.array(mult, dtype=int)


def gap_report(hat_eigenvalues, gamma: float, delta: float) -> GapReport:
    """Check hat_lambda_{k+1} - hat_lambda_k >= delta * hat_lambda_k^-gamma per pair."""
    hat = np.asarray(hat_eigenvalues, dtype=float)
    if hat.size < 2:
        raise ValueError("gap check needs at least two strict eigenvalues")
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    gaps = np.diff(hat)
    bounds = delta * hat[:-1] ** (-gamma)
    satisfied = gaps >= bounds
    delta_max = float(np.min(gaps * hat[:-1] ** gamma))
    rho = delta / (4.0 * hat ** gamma)
    return GapReport(gamma=float(gamma), delta=float(delta), satisfied=satisfied,
                     delta_max=delta_max, rho=rho)


def check_gap_property(spec: SpectralDecomposition, gamma: float, delta: float) -> GapReport:
    return gap_report(spec.hat_eigenvalues, gamma, delta)


def spectral_projection_apply(spec: SpectralDecomposition, k: int, w) -> np.ndarray:
    """Apply the spectral projection of strict index k (1-based) to a nodal field."""
    sl = spec.cluster_slice(k)
    wi = spec.restrict(w)
    phi = spec.eigenvectors[:, sl]
    coeffs = phi.T @ (spec.mass_int @ wi)
    return spec.extend(phi @ coeffs)


def mass_sqrt(mass: sp.spmatrix) -> np.ndarray:
    """Dense symmetric square root of the (SPD) mass matrix."""
    w, V = la.eigh(mass.toarray())
    if w[0] <= 0:
        raise EigensolverError(f"mass matrix not positive definite (min eig {w[0]:.3e})")
    return (V * np.sqrt(w)) @ V.T


def regroup_spectrum(
    spec: SpectralDecomposition, multiplicities: np.ndarray
) -> SpectralDecomposition:
    """Re-cluster a decomposition using an externally supplied multiplicity pattern.

    The projection sweep compares cluster projections of two operators whose
    spectra are grouped the same way.  Clustering the perturbed spectrum
    independently can split a symmetry degeneracy (the split is tiny but
    larger than cluster_tol), which changes the cluster ranks and turns
    ||P_k - P~_k|| into a rank-mismatch constant instead of a perturbation
    measurement.  Inheriting the grouping keeps the ranks aligned.
    """
    multiplicities = np.asarray(multiplicities, dtype=int)
    if multiplicities.sum() != spec.K:
        raise ValueError(
            f"multiplicity pattern sums to {multiplicities.sum()}, expected K={spec.K}"
        )
    offsets = np.concatenate([[0], np.cumsum(multiplicities)])
    hat = np.array([
        spec.eigenvalues[offsets[i]:offsets[i + 1]].mean()
        for i in range(multiplicities.size)
    ])
    cluster_index = np.repeat(np.arange(multiplicities.size), multiplicities)
    return dataclasses.replace(
        spec,
        hat_eigenvalues=hat,
        multiplicities=multiplicities,
        cluster_index=cluster_index,
    )


def projection_difference_norm(
    spec_a: SpectralDecomposition,
    spec_b: SpectralDecomposition,
    pair: OperatorPair,
    k: int,
    _sqrt: np.ndarray | None = None,
) -> float:
    """L2(M)-operator norm of P_k - Ptilde_k.

    Computed as the largest singular value of S (P_k - Ptilde_k) S^-1 with
    S the symmetric square root of M; since S P S^-1 is symmetric here this
    is the largest absolute eigenvalue.
    """
    if spec_a.mass_int.shape != spec_b.mass_int.shape:
        raise ValueError("decompositions live on different meshes")
    S = mass_sqrt(pair.mass if pair.is_reduced else pair.full_mass) if _sqrt is None else _sqrt
    Qa = S @ spec_a.eigenvectors[:, spec_a.cluster_slice(k)]
    Qb = S @ spec_b.eigenvectors[:, spec_b.cluster_slice(k)]
    D = Qa @ Qa.T - Qb @ Qb.T
    return float(np.max(np.abs(la.eigvalsh(D))))


def verify_minmax_sandwich(
    spec_a: SpectralDecomposition,
    spec_unit: SpectralDecomposition,
    a_plus: float,
    rel_slack: float = 1e-8,
) -> SandwichReport:
    """Check the two-sided eigenvalue bound against the unit-coefficient pencil.

    Exact for the discrete pencils whenever 1 <= a <= a_plus holds
    elementwise, because the quadratic forms then nest; rel_slack only
    absorbs floating-point noise.
    """
    kmax = min(spec_a.K, spec_unit.K)
    lam = spec_a.eigenvalues[:kmax]
    lam1 = spec_unit.eigenvalues[:kmax]
    lower_ok = lam >= lam1 * (1.0 - rel_slack)
    upper_ok = lam <= a_plus * lam1 * (1.0 + rel_slack)
    first = None
    for k in range(kmax):
        if not lower_ok[k]:
            first = (k + 1, "lower", float(lam[k]), float(lam1[k]))
            break
        if not upper_ok[k]:
            first = (k + 1, "upper", float(lam[k]), float(a_plus * lam1[k]))
            break
    return SandwichReport(
        a_plus=float(a_plus), rel_slack=rel_slack, lambdas=lam, lambdas_unit=lam1,
        lower_ok=lower_ok, upper_ok=upper_ok, first_violation=first,
    )


@dataclass(frozen=True)
class EigenPerturbationTable:
    """Rows of the eigenvalue-difference sweep; columns as in the CSV output."""

    k: np.ndarray
    s: np.ndarray
    lam: np.ndarray
    lam_tilde: np.ndarray
    diff: np.ndarray
    l2_coeff_diff: np.ndarray
    ratio: np.ndarray

    CSV_HEADER = ("k", "s", "lambda", "lambda_tilde", "diff", "l2_coeff_diff", "ratio")

    def rows(self):
        return zip(self.k, self.s, self.lam, self.lam_tilde, self.diff,
                   self.l2_coeff_diff, self.ratio)

    def ratio_spread(self) -> float:
        """max/min of the finite positive normalized ratios."""
        r = self.ratio[np.isfinite(self.ratio) & (self.ratio > 0)]
        if r.size == 0:
            return float("nan")
        return float(r.max() / r.min())


def _check_bounds(mesh: Mesh, values: np.ndarray, a_plus: float, label: str) -> None:
    low = int(np.argmin(values))
    if values[low] < 1.0 - 1e-12:
        x, y = mesh.nodes[low]
        raise AdmissibilityError(
            f"{label}: value {values[low]:.6g} < 1 at node {low} (x={x:.6g}, y={y:.6g})"
        )
    high = int(np.argmax(values))
    if values[high] > a_plus + 1e-12:
        x, y = mesh.nodes[high]
        raise AdmissibilityError(
            f"{label}: value {values[high]:.6g} > a_plus={a_plus:.6g} at node {high} "
            f"(x={x:.6g}, y={y:.6g})"
        )


def eigen_perturbation_experiment(
    mesh: Mesh,
    a: CoefficientField,
    eta: np.ndarray,
    scales,
    K: int,
    cluster_tol: float = 1e-6,
) -> EigenPerturbationTable:
    """Sweep a -> a + s*eta and tabulate |lambda_k - lambda_k~| ratios.

    ratio = diff / (min(lambda, lambda~)^(1 + n/4) * ||a - a~||_L2), n = 2.
    Every perturbed coefficient must stay within [1, a_plus].
    """
    eta = np.asarray(eta, dtype=float)
    _check_bounds(mesh, a.values, a.a_plus, "base coefficient")
    mass = assemble_mass(mesh)
    base = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, a.values), mesh), K, cluster_tol)
    ks, ss, lams, lamts, diffs, cdiffs, ratios = [], [], [], [], [], [], []
    for s in scales:
        values = a.values + s * eta
        _check_bounds(mesh, values, a.a_plus, f"perturbed coefficient (s={s:g})")
        pert = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, values), mesh), K, cluster_tol)
        cdiff = l2_norm(values - a.values, mass)
        for k in range(K):
            lam, lamt = float(base.eigenvalues[k]), float(pert.eigenvalues[k])
            diff = abs(lam - lamt)
            denom = min(lam, lamt) ** RATE_EXPONENT_2D * cdiff
            ratio = diff / denom if denom > 0 else float("nan")
            ks.append(k + 1)
            ss.append(float(s))
            lams.append(lam)
            lamts.append(lamt)
            diffs.append(diff)
            cdiffs.append(cdiff)
            ratios.append(ratio)
    return EigenPerturbationTable(
        k=np.array(ks), s=np.array(ss), lam=np.array(lams), lam_tilde=np.array(lamts),
        diff=np.array(diffs), l2_coeff_diff=np.array(cdiffs), ratio=np.array(ratios),
    )


@dataclass(frozen=True)
class ProjectionPerturbationTable:
    """Rows of the projection-difference sweep with the admissibility gate."""

    k: np.ndarray
    s: np.ndarray
    l2_coeff_diff: np.ndarray
    gate_bound: np.ndarray
    in_gate: np.ndarray
    proj_norm: np.ndarray
    normalized: np.ndarray

    CSV_HEADER = ("k", "s", "l2_coeff_diff", "gate_bound", "in_gate", "proj_norm", "normalized")

    def rows(self):
        return zip(self.k, self.s, self.l2_coeff_diff, self.gate_bound,
                   self.in_gate.astype(int), self.proj_norm, self.normalized)

    def gated_spread(self) -> float:
        """max/min of the normalized constants over the gated rows."""
        r = self.normalized[self.in_gate & np.isfinite(self.normalized) & (self.normalized > 0)]
        if r.size < 2:
            return float("nan")
        return float(r.max() / r.min())


def projection_perturbation_experiment(
    mesh: Mesh,
    a: CoefficientField,
    eta: np.ndarray,
    scales,
    n_clusters: int,
    gamma: float = 0.0,
    eta_hat: float = 0.05,
    K: int | None = None,
    cluster_tol: float = 1e-6,
) -> ProjectionPerturbationTable:
    """Sweep a -> a + s*eta and tabulate projection-difference constants.

    A row is "gated" when ||a - a~|| <= eta_hat * max(l_k, l_k~)^-(1+gamma+n/4)
    (the smallness regime of the projection bound); normalized is
    ||P_k - P~_k|| / ((max(l_k, l_k~)^(gamma+1) + 1)^2 ||a - a~||).

    The perturbed spectrum inherits the base multiplicity pattern (see
    regroup_spectrum) so that cluster k has the same rank on both sides.
    """
    eta = np.asarray(eta, dtype=float)
    K = K if K is not None else max(4 * n_clusters, 8)
    _check_bounds(mesh, a.values, a.a_plus, "base coefficient")
    mass = assemble_mass(mesh)
    pair = apply_dirichlet(assemble_pair(mesh, a.values), mesh)
    base = solve_generalized_eig(pair, K, cluster_tol)
    if base.n_clusters < n_clusters:
        raise ValueError(
            f"K={K} eigenpairs yield only {base.n_clusters} strict eigenvalues, "
            f"need {n_clusters}"
        )
    S = mass_sqrt(pair.mass)
    out = {name: [] for name in ("k", "s", "cd", "gate", "ing", "norm", "nrm")}
    for s in scales:
        values = a.values + s * eta
        _check_bounds(mesh, values, a.a_plus, f"perturbed coefficient (s={s:g})")
        pert = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, values), mesh), K, cluster_tol)
        pert = regroup_spectrum(pert, base.multiplicities)
        cdiff = l2_norm(values - a.values, mass)
        for k in range(1, n_clusters + 1):
            lmax = max(base.hat_eigenvalues[k - 1], pert.hat_eigenvalues[k - 1])
            gate = eta_hat * lmax ** (-(1.0 + gamma + 0.5))
            pnorm = projection_difference_norm(base, pert, pair, k, _sqrt=S)
            denom = (lmax ** (gamma + 1.0) + 1.0) ** 2 * cdiff
            out["k"].append(k)
            out["s"].append(float(s))
            out["cd"].append(cdiff)
            out["gate"].append(gate)
            out["ing"].append(cdiff <= gate)
            out["norm"].append(pnorm)
            out["nrm"].append(pnorm / denom if denom > 0 else float("nan"))
    return ProjectionPerturbationTable(
        k=np.array(out["k"]), s=np.array(out["s"]), l2_coeff_diff=np.array(out["cd"]),
        gate_bound=np.array(out["gate"]), in_gate=np.array(out["ing"], dtype=bool),
        proj_norm=np.array(out["norm"]), normalized=np.array(out["nrm"]),
    )


def weyl_ratios(spec: SpectralDecomposition, k_lo: int, k_hi: int, area: float = 1.0) -> np.ndarray:
    """lambda_k / (4 pi k / area) for k in [k_lo, k_hi] (1-based, repeated spectrum)."""
    if not 1 <= k_lo <= k_hi <= spec.K:
        raise ValueError(f"range [{k_lo}, {k_hi}] outside computed 1..{spec.K}")
    ks = np.arange(k_lo, k_hi + 1)
    return spec.eigenvalues[k_lo - 1:k_hi] * area / (4.0 * np.pi * ks)
