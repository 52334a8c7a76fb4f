import dataclasses

import numpy as np
import pytest

from heatcoef.catalog import direction_values, make_coefficient
from heatcoef.fem import AdmissibilityError, apply_dirichlet, assemble_pair, make_field
from heatcoef.mesh import build_structured_mesh
from heatcoef.spectral import (
    eigen_perturbation_experiment,
    gap_report,
    projection_difference_norm,
    projection_perturbation_experiment,
    regroup_spectrum,
    solve_generalized_eig,
    spectral_projection_apply,
    strictify_spectrum,
    verify_minmax_sandwich,
    weyl_ratios,
)

PI2 = np.pi ** 2


class TestSquareOracle:
    def test_ground_eigenvalue_within_one_percent(self, unit_spec32):
        assert unit_spec32.hat_eigenvalues[0] == pytest.approx(2 * PI2, rel=0.01)
        # frozen discrete value on the 32x32 grid
        assert unit_spec32.hat_eigenvalues[0] == pytest.approx(19.78151183, abs=1e-6)

    def test_second_cluster_is_the_degenerate_pair(self, unit_spec32):
        assert unit_spec32.multiplicities[0] == 1
        assert unit_spec32.multiplicities[1] == 2
        assert unit_spec32.hat_eigenvalues[1] == pytest.approx(5 * PI2, rel=0.02)
        # the alternating-diagonal triangulation keeps the (1,2)/(2,1) pair
        # exactly degenerate, not just within cluster_tol
        lam = unit_spec32.eigenvalues
        assert abs(lam[1] - lam[2]) <= 1e-12 * lam[1]

    def test_multiplicity_pattern_k10(self, unit_spec32):
        assert list(unit_spec32.multiplicities) == [1, 2, 1, 2, 2, 2]

    def test_orthonormality_and_residuals(self, unit_spec32, unit_pair32):
        V = unit_spec32.eigenvectors
        G = V.T @ (unit_pair32.mass @ V)
        assert np.allclose(G, np.eye(V.shape[1]), atol=1e-10)
        R = unit_pair32.stiffness @ V - (unit_pair32.mass @ V) * unit_spec32.eigenvalues
        assert np.max(np.abs(R)) < 1e-8 * unit_spec32.eigenvalues[-1]

    def test_ground_mode_positive_mean(self, unit_spec32, unit_pair32):
        phi1 = unit_spec32.eigenvectors[:, 0]
        assert np.ones(phi1.size) @ (unit_pair32.mass @ phi1) > 0


class TestStrictify:
    def test_no_merge_for_separated_values(self):
        hat, mult = strictify_spectrum([2.0, 5.0, 10.0], 1e-6)
        assert np.array_equal(hat, [2.0, 5.0, 10.0])
        assert np.array_equal(mult, [1, 1, 1])

    def test_merges_to_cluster_mean(self):
        lam = [2.0, 2.0 + 2e-9, 5.0]
        hat, mult = strictify_spectrum(lam, 1e-6)
        assert hat[0] == pytest.approx(2.0 + 1e-9, abs=1e-15)
        assert np.array_equal(mult, [2, 1])
        assert np.all(np.diff(hat) > 0)

    def test_rejects_unsorted_and_empty(self):
        with pytest.raises(ValueError):
            strictify_spectrum([3.0, 2.0], 1e-6)
        with pytest.raises(ValueError):
            strictify_spectrum([], 1e-6)


class TestGapReport:
    def test_reference_values_gamma0(self):
        rep = gap_report([2.0, 5.0, 10.0], gamma=0.0, delta=1.0)
        assert rep.all_satisfied
        assert rep.delta_max == pytest.approx(3.0)
        assert np.allclose(rep.rho, 0.25)

    def test_reference_values_gamma1(self):
        rep = gap_report([2.0, 5.0, 10.0], gamma=1.0, delta=6.0)
        # pair (2,5): 3 >= 6/2; pair (5,10): 5 >= 6/5
        assert rep.all_satisfied
        assert rep.delta_max == pytest.approx(6.0)

    def test_fails_above_delta_max(self):
        rep = gap_report([2.0, 5.0, 10.0], gamma=0.0, delta=3.0 + 1e-9)
        assert not rep.all_satisfied

    def test_needs_two_values(self):
        with pytest.raises(ValueError):
            gap_report([2.0], 0.0, 1.0)


class TestProjections:
    def test_projection_identity_and_orthogonality(self, unit_spec32):
        phi1 = unit_spec32.extend(unit_spec32.eigenvectors[:, 0])
        assert np.allclose(spectral_projection_apply(unit_spec32, 1, phi1), phi1, atol=1e-12)
        assert np.allclose(spectral_projection_apply(unit_spec32, 2, phi1), 0.0, atol=1e-12)

    def test_resolution_of_identity_on_span(self, unit_spec32, d_omega32):
        w_span = sum(
            spectral_projection_apply(unit_spec32, k, d_omega32)
            for k in range(1, unit_spec32.n_clusters + 1)
        )
        # the projected sum reproduces the in-span part of the field
        coeffs = unit_spec32.eigenvectors.T @ (unit_spec32.mass_int @ unit_spec32.restrict(d_omega32))
        span = unit_spec32.extend(unit_spec32.eigenvectors @ coeffs)
        assert np.allclose(w_span, span, atol=1e-12)

    def test_projection_is_idempotent_and_m_selfadjoint(self, unit_spec32, rng):
        M = unit_spec32.mass_int
        w = unit_spec32.extend(rng.normal(size=M.shape[0]))
        v = unit_spec32.extend(rng.normal(size=M.shape[0]))
        Pw = spectral_projection_apply(unit_spec32, 2, w)
        PPw = spectral_projection_apply(unit_spec32, 2, Pw)
        assert np.allclose(PPw, Pw, atol=1e-12)
        Pv = spectral_projection_apply(unit_spec32, 2, v)
        lhs = unit_spec32.restrict(Pw) @ (M @ unit_spec32.restrict(v))
        rhs = unit_spec32.restrict(w) @ (M @ unit_spec32.restrict(Pv))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_out_of_range_cluster(self, unit_spec32):
        with pytest.raises(IndexError):
            spectral_projection_apply(unit_spec32, unit_spec32.n_clusters + 1, None)

    def test_difference_norm_same_spec_is_zero(self, unit_spec32, unit_pair32):
        assert projection_difference_norm(unit_spec32, unit_spec32, unit_pair32, 1) == pytest.approx(0.0, abs=1e-12)

    def test_difference_norm_of_orthogonal_rank_one_is_one(self, unit_spec32, unit_pair32):
        # swap phi1 with phi4 (both simple clusters): orthogonal rank-1
        # projections differ by exactly 1 in operator norm
        V = unit_spec32.eigenvectors.copy()
        V[:, [0, 3]] = V[:, [3, 0]]
        swapped = dataclasses.replace(unit_spec32, eigenvectors=V)
        assert projection_difference_norm(unit_spec32, swapped, unit_pair32, 1) == pytest.approx(1.0, abs=1e-10)

    def test_difference_norm_bounded_by_one(self, mesh32, unit_spec32, unit_pair32):
        eta = direction_values(mesh32, "gaussian-bump", {"amplitude": 0.04, "width": 0.05})
        a = make_coefficient(mesh32, "constant", {"value": 1.0}, 2.0)
        pert = solve_generalized_eig(
            apply_dirichlet(assemble_pair(mesh32, a.values + 0.01 * eta), mesh32),
            unit_spec32.K, 1e-6)
        pert = regroup_spectrum(pert, unit_spec32.multiplicities)
        for k in range(1, 4):
            nrm = projection_difference_norm(unit_spec32, pert, unit_pair32, k)
            assert 0.0 <= nrm <= 1.0 + 1e-12


class TestRegroup:
    def test_rejects_wrong_total(self, unit_spec32):
        with pytest.raises(ValueError):
            regroup_spectrum(unit_spec32, np.array([1, 2]))

    def test_inherits_pattern_and_means(self, unit_spec32):
        pattern = np.array([3, 3, 4])
        re = regroup_spectrum(unit_spec32, pattern)
        assert np.array_equal(re.multiplicities, pattern)
        assert re.hat_eigenvalues[0] == pytest.approx(unit_spec32.eigenvalues[:3].mean())
        assert np.array_equal(re.cluster_index, np.repeat([0, 1, 2], [3, 3, 4]))


class TestMinmaxSandwich:
    def test_unit_coefficient_equality(self, unit_spec32):
        rep = verify_minmax_sandwich(unit_spec32, unit_spec32, a_plus=2.0)
        assert rep.ok
        assert np.allclose(rep.lambdas, rep.lambdas_unit)

    def test_scaled_coefficient_upper_equality(self, mesh32, unit_pair32, unit_spec32):
        spec2 = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh32, 2.0), mesh32), 10, 1e-6)
        rep = verify_minmax_sandwich(spec2, unit_spec32, a_plus=2.0)
        assert rep.ok
        assert np.allclose(rep.lambdas, 2.0 * rep.lambdas_unit, rtol=1e-10)

    def test_product_coefficient_sandwich_k20(self, mesh32):
        values = 1.0 + mesh32.nodes[:, 0] * mesh32.nodes[:, 1]
        pair = apply_dirichlet(assemble_pair(mesh32, values), mesh32)
        unit = apply_dirichlet(assemble_pair(mesh32, 1.0), mesh32)
        rep = verify_minmax_sandwich(
            solve_generalized_eig(pair, 20, 1e-6),
            solve_generalized_eig(unit, 20, 1e-6),
            a_plus=2.0,
        )
        assert rep.ok, rep.first_violation


class TestEigenPerturbation:
    def test_zero_scale_has_zero_differences(self, mesh32):
        a = make_coefficient(mesh32, "constant", {"value": 1.5}, 2.0)
        eta = direction_values(mesh32, "affine", None)
        tab = eigen_perturbation_experiment(mesh32, a, eta, [0.0], K=4)
        assert np.allclose(tab.diff, 0.0, atol=1e-10)

    def test_uniform_direction_scales_the_spectrum(self, mesh32):
        a = make_coefficient(mesh32, "constant", {"value": 1.0}, 2.0)
        eta = np.ones(mesh32.n_nodes)
        tab = eigen_perturbation_experiment(mesh32, a, eta, [0.5], K=6)
        assert np.allclose(tab.lam_tilde, 1.5 * tab.lam, rtol=1e-12)
        assert np.all(np.isfinite(tab.ratio))

    def test_inadmissible_perturbation_raises(self, mesh32):
        a = make_coefficient(mesh32, "constant", {"value": 1.0}, 2.0)
        with pytest.raises(AdmissibilityError):
            eigen_perturbation_experiment(mesh32, a, -np.ones(mesh32.n_nodes), [0.5], K=4)


class TestProjectionPerturbation:
    def test_gate_and_ranks(self, mesh32):
        a = make_coefficient(mesh32, "constant", {"value": 1.0}, 2.0)
        eta = direction_values(mesh32, "gaussian-bump", {"amplitude": 0.04, "width": 0.05})
        tab = projection_perturbation_experiment(mesh32, a, eta, (1e-3, 1e-2, 1e-1), n_clusters=5)
        assert tab.in_gate.sum() == 7
        # inherited grouping: every row measures equal-rank projections
        assert np.all(tab.proj_norm <= 1.0 + 1e-12)
        assert np.all(tab.proj_norm[tab.in_gate] < 0.5)
        assert tab.gated_spread() < 10.0


class TestWeyl:
    def test_frozen_endpoint_ratios(self, unit_pair32):
        spec = solve_generalized_eig(unit_pair32, 40, 1e-6)
        r = weyl_ratios(spec, 10, 40)
        assert r[0] == pytest.approx(1.35250, abs=1e-3)
        assert r[-1] == pytest.approx(1.27619, abs=1e-3)
        assert r[-1] < r[0]  # drifting toward 1 from above
        assert r.min() > 1.0

    def test_range_validation(self, unit_spec32):
        with pytest.raises(ValueError):
            weyl_ratios(unit_spec32, 5, 50)
