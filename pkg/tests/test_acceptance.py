"""End-to-end acceptance checks with pinned tolerances.

Each test pins the numeric contract of one advertised capability:
analytic spectrum oracle, two-sided eigenvalue bounds, perturbation
sweeps, decay-rate fits, positivity floors, reconstruction quality,
noise scaling, and bit-level determinism.  Tolerances and runtime
budgets are asserted, not logged.
"""

import re
import time
from pathlib import Path

import numpy as np
import pytest

from heatcoef.catalog import COEFFICIENT_KINDS, direction_values, make_coefficient
from heatcoef.fem import apply_dirichlet, assemble_pair, nodal_gradients
from heatcoef.heat import compute_F, evolve, f_lipschitz_experiment, fit_log_slope, l2_norm
from heatcoef.heat import lower_bound_check
from heatcoef.fem import assemble_mass
from heatcoef.inversion import stability_ratio_experiment
from heatcoef.mesh import boundary_band, build_structured_mesh, distance_to_boundary
from heatcoef.runner import run_scenario, write_reports
from heatcoef.scenario import parse_config, parse_config_text
from heatcoef.spectral import (
    eigen_perturbation_experiment,
    projection_perturbation_experiment,
    solve_generalized_eig,
    verify_minmax_sandwich,
)

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


def test_unit_square_spectrum_matches_analytic_oracle():
    start = time.monotonic()
    mesh = build_structured_mesh(32, 32)
    unit = make_coefficient(mesh, "constant", {"value": 1.0}, 2.0)
    spec = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, unit.values), mesh),
                                 10, 1e-6)
    lam1_exact = 2.0 * np.pi ** 2
    lam2_exact = 5.0 * np.pi ** 2
    assert abs(spec.eigenvalues[0] - lam1_exact) <= 0.01 * lam1_exact
    assert abs(spec.eigenvalues[1] - lam2_exact) <= 0.02 * lam2_exact
    assert abs(spec.eigenvalues[2] - lam2_exact) <= 0.02 * lam2_exact
    # the degenerate pair is detected as one cluster of size two
    assert spec.multiplicities[1] == 2
    assert time.monotonic() - start < 30.0


def test_eigenvalues_sandwiched_by_unit_pencil_for_every_catalog_coefficient():
    start = time.monotonic()
    mesh = build_structured_mesh(32, 32)
    unit = make_coefficient(mesh, "constant", {"value": 1.0}, 2.0)
    spec_unit = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, unit.values), mesh),
                                      20, 1e-6)
    for kind in sorted(COEFFICIENT_KINDS):
        a = make_coefficient(mesh, kind, None, 2.0)
        spec_a = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, a.values), mesh),
                                       20, 1e-6)
        report = verify_minmax_sandwich(spec_a, spec_unit, 2.0, rel_slack=1e-8)
        assert report.ok, f"{kind}: first violation at k={report.first_violation}"
    assert time.monotonic() - start < 60.0


def test_eigenvalue_shift_ratio_uniform_across_perturbation_sweep():
    start = time.monotonic()
    mesh = build_structured_mesh(32, 32)
    unit = make_coefficient(mesh, "constant", {"value": 1.0}, 2.0)
    eta = direction_values(mesh, "gaussian-bump", {"amplitude": 0.04})
    table = eigen_perturbation_experiment(mesh, unit, eta, (1e-3, 1e-2, 1e-1), K=10)
    spread = table.ratio_spread()
    assert np.isfinite(spread)
    assert spread <= 50.0  # measured 2.30
    assert time.monotonic() - start < 120.0


def test_projection_difference_normalized_within_one_order_of_magnitude():
    mesh = build_structured_mesh(32, 32)
    unit = make_coefficient(mesh, "constant", {"value": 1.0}, 2.0)
    eta = direction_values(mesh, "gaussian-bump", {"amplitude": 0.04})
    table = projection_perturbation_experiment(mesh, unit, eta, (1e-3, 1e-2, 1e-1),
                                               n_clusters=5, gamma=0.0, eta_hat=0.05)
    assert table.in_gate.sum() >= 2  # the gate must actually select a regime
    spread = table.gated_spread()
    assert np.isfinite(spread)
    assert spread <= 10.0  # measured 6.44


def test_correction_field_decay_and_lipschitz_slopes():
    mesh = build_structured_mesh(32, 32)
    bump = make_coefficient(mesh, "gaussian-bump", None, 2.0)
    two = make_coefficient(mesh, "two-bump", None, 2.0)
    d = distance_to_boundary(mesh)
    grid = np.linspace(1.0, 5.0, 9)
    spec = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, bump.values), mesh),
                                 40, 1e-6)
    lam2 = spec.hat_eigenvalues[1]
    F = compute_F(spec, d, 2.0, fit_T_grid=grid)
    assert abs(F.decay_rate_estimate + lam2) <= 0.05 * lam2  # measured 0.49%

    ft = f_lipschitz_experiment(mesh, bump, two, d, grid, K=40)
    assert abs(ft.fitted_slope + ft.beta2) <= 0.05 * ft.beta2  # measured 0.44%


def test_snapshot_norm_decays_at_ground_rate(mesh32, bump_spec32):
    # positive-weight start: fitted slope within 2% of the ground eigenvalue
    d = distance_to_boundary(mesh32)
    M = assemble_mass(mesh32)
    grid = np.linspace(1.0, 5.0, 9)
    norms = [l2_norm(evolve(bump_spec32, d, t).u, M) for t in grid]
    slope = fit_log_slope(grid, norms)
    lam1 = bump_spec32.hat_eigenvalues[0]
    assert abs(slope + lam1) <= 0.02 * lam1

    # pure ground mode: exact
    phi1 = bump_spec32.extend(bump_spec32.eigenvectors[:, 0])
    norms1 = [l2_norm(evolve(bump_spec32, phi1, t).u, M) for t in grid]
    slope1 = fit_log_slope(grid, norms1)
    assert abs(slope1 + lam1) <= 1e-6  # measured 1.5e-13


def test_ground_mode_lower_bound_quotients_all_positive(mesh32, bump_spec32):
    d = distance_to_boundary(mesh32)
    report = lower_bound_check(mesh32, bump_spec32, d, 2.0, boundary_band(mesh32, 0.1))
    assert report.all_positive
    assert report.u_ratio_min > 0.0
    assert report.dudt_ratio_min > 0.0
    assert report.grad_ratio_min > 0.0
    assert report.grad_phi1_band_min > 0.0
    assert report.eig_floor_min > 0.0


def test_band_gradient_floor_stable_under_mesh_refinement():
    # The fitted floor C0(h) = min over the 0.1-band of |grad phi1| is
    # required to settle to within +-20% between successive refinements.
    # On this square domain the ground-mode gradient vanishes linearly at
    # the four corners (locally phi1 ~ x y), so the nodal minimum keeps
    # shrinking like h and the stability requirement cannot hold; this
    # test documents that gap and is expected to fail.
    floors = []
    for n in (16, 32, 48):
        mesh = build_structured_mesh(n, n)
        a = make_coefficient(mesh, "gaussian-bump", None, 2.0)
        spec = solve_generalized_eig(apply_dirichlet(assemble_pair(mesh, a.values), mesh),
                                     1, 1e-6)
        phi1 = spec.extend(spec.eigenvectors[:, 0])
        g = nodal_gradients(mesh, phi1)
        mask = boundary_band(mesh, 0.1).node_mask
        floors.append(float(np.min(np.sqrt(np.einsum("nd,nd->n", g, g))[mask])))
    assert all(c > 0.0 for c in floors)
    for prev, curr in zip(floors, floors[1:]):
        assert abs(curr - prev) <= 0.2 * prev, (
            f"band gradient floor moved {abs(curr - prev) / prev:.1%} "
            f"between refinements: {floors}")


def test_noiseless_reconstruction_quality(tmp_path):
    start = time.monotonic()
    bump = parse_config(SCENARIO_DIR / "bump_invert.cfg")
    art = run_scenario(bump, "invert", tmp_path / "bump")
    assert art.all_pass
    conv = next(l for l in art.summary_lines if "fixed-point-converged" in l)
    iters = int(re.search(r"after (\d+) iteration", conv).group(1))
    assert conv.startswith("PASS") and iters <= 50
    err_line = next(l for l in art.summary_lines if "reconstruction-error" in l)
    rel = float(re.search(r"measured=([0-9.e+-]+)", err_line).group(1))
    assert rel <= 0.02  # measured 1.18e-6

    const = parse_config(SCENARIO_DIR / "constant_invert.cfg")
    art_c = run_scenario(const, "invert", tmp_path / "const")
    conv_c = next(l for l in art_c.summary_lines if "fixed-point-converged" in l)
    assert int(re.search(r"after (\d+) iteration", conv_c).group(1)) <= 2
    err_c = next(l for l in art_c.summary_lines if "reconstruction-error" in l)
    assert float(re.search(r"measured=([0-9.e+-]+)", err_c).group(1)) <= 1e-6
    assert time.monotonic() - start < 120.0


NOISY_INVERT = """\
name = ladder
coefficient = gaussian-bump
nx = 32
ny = 32
modes = 8
noise = 1e-6
seed = 1234
T = {T}
"""


def test_noise_floor_grows_with_snapshot_time(tmp_path):
    ladder_T = (0.15, 0.3, 0.6, 1.2)
    errors = []
    for T in ladder_T:
        s = parse_config_text(NOISY_INVERT.format(T=T))
        art = run_scenario(s, "invert", tmp_path / f"T{T}")
        line = next(l for l in art.summary_lines if "reconstruction-error" in l)
        errors.append(float(re.search(r"rel_error=([0-9.e+-]+)", line).group(1)))
    assert all(b >= a for a, b in zip(errors, errors[1:])), errors

    mesh = build_structured_mesh(32, 32)
    bump = make_coefficient(mesh, "gaussian-bump", None, 2.0)
    two = make_coefficient(mesh, "two-bump", None, 2.0)
    d = distance_to_boundary(mesh)
    tab = stability_ratio_experiment(mesh, bump, two, d, ladder_T, K=8)
    assert tab.rate_low <= tab.fitted_rate <= tab.rate_high  # measured 20.13 in [17.00, 47.48]
    assert tab.rate_low == pytest.approx(0.8 * tab.lambda1, abs=1e-12)
    assert tab.rate_high == pytest.approx(1.2 * tab.a_plus * tab.lambda1_unit, abs=1e-12)


@pytest.mark.parametrize("cfg,mode", [
    ("bump_invert.cfg", "invert"),
    ("stability_sweep.cfg", "stability-sweep"),
])
def test_repeated_runs_are_byte_identical(tmp_path, cfg, mode):
    scenario = parse_config(SCENARIO_DIR / cfg)
    first = run_scenario(scenario, mode, tmp_path / "a")
    write_reports(first)
    second = run_scenario(scenario, mode, tmp_path / "b")
    write_reports(second)
    assert first.files == second.files
    for name in first.files + ("summary.txt",):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
