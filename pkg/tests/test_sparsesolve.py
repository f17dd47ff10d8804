import numpy as np
import pytest

from sparsechoice.errors import InfeasibleError, NonFiniteColumnError, SolverError
from sparsechoice.featlib import LibraryMatrix
from sparsechoice.sparsesolve import (
    SolverSettings,
    min_feasible_pi,
    solve_multi,
    solve_one,
    verify_optimality,
)
from sparsechoice.sparsesolve.admm import normal_solver, project_ball, soft_threshold


def _feasible_instance(seed, J=30, k=10, noise=0.005):
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((J, k))
    zeta = np.zeros(k)
    zeta[[1, 4, 7]] = [1.5, -2.0, 0.8]
    return F, F @ zeta + noise * rng.standard_normal(J)


def test_soft_threshold_and_projection():
    np.testing.assert_array_equal(soft_threshold(np.array([3.0, -0.5, -2.0]), 1.0), [2.0, 0.0, -1.0])
    center = np.zeros(2)
    np.testing.assert_allclose(project_ball(np.array([3.0, 4.0]), center, 1.0), [0.6, 0.8])
    inside = np.array([0.1, 0.2])
    assert project_ball(inside, center, 1.0) is inside


def test_identity_library_with_zero_radius():
    o = np.random.default_rng(1).uniform(0.1, 0.9, size=6)
    result = solve_one(np.eye(6), o, SolverSettings(pi=0.0))
    assert result.converged
    np.testing.assert_allclose(result.coefficients, o, atol=1e-8)


def test_planted_support_is_recovered(planted):
    F, o, truth = planted(0, J=20, k=8, s=2)
    result = solve_one(F, o, SolverSettings(pi=1e-6))
    assert result.converged
    assert result.residual_norm <= 1e-6 * (1 + 1e-6)
    recovered = set(np.flatnonzero(np.abs(result.coefficients) > 1e-4))
    assert recovered == set(np.flatnonzero(truth))
    assert np.max(np.abs(result.coefficients - truth)) <= 1e-4


def test_matches_brute_force_optimum(planted, l1_oracle):
    for seed in range(8):
        F, o, _ = planted(100 + seed, J=30, k=6, s=int(1 + seed % 3))
        result = solve_one(F, o, SolverSettings(pi=1e-6))
        best, _ = l1_oracle(F, o, 1e-6)
        assert result.converged
        assert result.objective <= best + 1e-6 * (1 + best)
        assert result.objective == pytest.approx(best, rel=1e-5)


def test_infeasible_radius_reports_minimal_pi():
    rng = np.random.default_rng(2)
    F = rng.standard_normal((20, 3))
    o = rng.standard_normal(20)
    coef, *_ = np.linalg.lstsq(F, o, rcond=None)
    expected = np.linalg.norm(F @ coef - o)
    assert min_feasible_pi(F, o) == pytest.approx(expected, rel=1e-10)
    with pytest.raises(InfeasibleError) as excinfo:
        solve_one(F, o, SolverSettings(pi=1e-6))
    assert excinfo.value.min_pi == pytest.approx(expected, rel=1e-10)
    assert "minimal feasible pi" in str(excinfo.value)


def test_relax_widens_radius(event_log):
    rng = np.random.default_rng(2)
    F = rng.standard_normal((20, 3))
    o = rng.standard_normal(20)
    result = solve_one(F, o, SolverSettings(pi=1e-6, on_infeasible="relax", relax_margin=0.05))
    assert result.relaxed
    assert result.pi_effective == pytest.approx(result.min_feasible_pi * 1.05)
    assert result.converged
    assert result.residual_norm <= result.pi_effective * (1 + 1e-6)
    assert "solve.relaxed" in event_log.read_text(encoding="utf-8")


def test_non_finite_column_is_named():
    F = np.ones((5, 3))
    F[2, 1] = np.inf
    library = LibraryMatrix(F, ("a", "exp(x9)", "c"), ("f0", "f1", "f2"))
    with pytest.raises(NonFiniteColumnError) as excinfo:
        solve_one(library, np.full(5, 0.5), SolverSettings())
    assert excinfo.value.label == "exp(x9)"
    with pytest.raises(NonFiniteColumnError) as excinfo:
        solve_multi(library, np.full((5, 2), 0.5), SolverSettings())
    assert excinfo.value.alternative == 0
    assert str(excinfo.value).startswith("alternative 0:")


def test_origin_inside_ball_returns_zero():
    F = np.random.default_rng(3).standard_normal((10, 4))
    o = np.full(10, 0.01)
    result = solve_one(F, o, SolverSettings(pi=0.5))
    np.testing.assert_array_equal(result.coefficients, np.zeros(4))
    assert result.iterations == 0
    assert result.active_set == ()


def test_zero_columns_get_zero_coefficients():
    F, o = _feasible_instance(4)
    F[:, 3] = 0.0
    result = solve_one(F, o, SolverSettings(pi=0.1))
    assert result.coefficients[3] == 0.0
    assert result.converged


def test_bad_inputs_raise():
    F = np.ones((4, 2))
    with pytest.raises(SolverError):
        solve_one(F, np.ones(3), SolverSettings())
    with pytest.raises(SolverError):
        solve_one(F, np.array([1.0, np.nan, 0.0, 0.0]), SolverSettings())
    with pytest.raises(SolverError):
        solve_one(F, np.ones(4), SolverSettings(), weights=np.array([1.0, -1.0]))
    with pytest.raises(SolverError):
        solve_multi(F, np.ones((4, 2)), SolverSettings(), alternatives=[2])


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(pi=-0.1)
    with pytest.raises(ValueError):
        SolverSettings(rho=1e6)
    with pytest.raises(ValueError):
        SolverSettings(norm="l1")


def test_solve_multi_columns_match_single_solves():
    F, o = _feasible_instance(5)
    O = np.column_stack([o, 0.5 * o, -o])
    settings = SolverSettings(pi=0.05)
    multi = solve_multi(F, O, settings)
    assert multi.alternatives == (0, 1, 2)
    for a in range(3):
        np.testing.assert_array_equal(multi.column(a), solve_one(F, O[:, a], settings).coefficients)
    assert multi.converged.all()
    assert (multi.residual_norms <= 0.05 * (1 + 1e-6)).all()


def test_complementary_alternatives_sum_to_one():
    rng = np.random.default_rng(6)
    X = rng.uniform(-1, 1, size=(40, 3))
    F = np.column_stack([np.ones(40), X, X[:, 0] * X[:, 1]])
    p = 1 / (1 + np.exp(-(X[:, 0] + 2 * X[:, 1])))
    O = np.column_stack([p, 1 - p])
    pi = 1.5 * min_feasible_pi(F, p) + 0.01
    multi = solve_multi(F, O, SolverSettings(pi=pi))
    total = F @ multi.column(0) + F @ multi.column(1)
    assert np.max(np.abs(total - 1.0)) <= 2 * pi * (1 + 1e-6)


def test_scale_equivariance():
    F, o = _feasible_instance(7)
    base = solve_one(F, o, SolverSettings(pi=0.1))
    scaled = solve_one(F, 3.0 * o, SolverSettings(pi=0.3))
    np.testing.assert_allclose(scaled.coefficients, 3.0 * base.coefficients, rtol=1e-5, atol=1e-7)


def test_l1_norm_decreases_with_radius():
    F, o = _feasible_instance(8)
    norms = [solve_one(F, o, SolverSettings(pi=pi)).objective for pi in (0.05, 0.2, 1.0, 3.0, 6.0)]
    for smaller, larger in zip(norms, norms[1:]):
        assert larger <= smaller + 1e-6 * (1 + smaller)


def test_weights_change_the_selected_terms():
    rng = np.random.default_rng(9)
    F = rng.standard_normal((25, 2))
    F[:, 1] = F[:, 0] + 1e-3 * rng.standard_normal(25)
    o = F[:, 0]
    cheap_first = solve_one(F, o, SolverSettings(pi=0.05), weights=np.array([1.0, 10.0]))
    cheap_second = solve_one(F, o, SolverSettings(pi=0.05), weights=np.array([10.0, 1.0]))
    assert abs(cheap_first.coefficients[0]) > abs(cheap_first.coefficients[1])
    assert abs(cheap_second.coefficients[1]) > abs(cheap_second.coefficients[0])


def test_lasso_path_agrees_with_ball_solver():
    F, o = _feasible_instance(10)
    pi = 0.3
    ball = solve_one(F, o, SolverSettings(pi=pi))
    path = solve_one(F, o, SolverSettings(pi=pi, method="lasso_path", bisection_tol=1e-3))
    assert path.method == "lasso_path"
    assert path.converged
    assert (1 - 1e-3) * pi * (1 - 1e-9) <= path.residual_norm <= pi * (1 + 1e-9)
    assert path.objective == pytest.approx(ball.objective, rel=2e-2)


def test_wildly_scaled_columns_are_handled():
    F, o = _feasible_instance(11)
    scales = np.logspace(-3, 4, F.shape[1])
    result = solve_one(F * scales, o, SolverSettings(pi=0.1))
    reference = solve_one(F, o, SolverSettings(pi=0.1), weights=1.0 / scales)
    assert result.converged
    np.testing.assert_allclose(result.coefficients * scales, reference.coefficients, rtol=1e-4, atol=1e-6)


def test_certificate_passes_on_converged_solve():
    F, o = _feasible_instance(12)
    result = solve_one(F, o, SolverSettings(pi=0.2))
    cert = verify_optimality(F, o, result.coefficients, 0.2)
    assert cert.passed
    assert cert.worst_violation <= 1e-4
    assert cert.multiplier > 0
    assert set(cert.active_set) == set(result.active_set)


def test_certificate_trivial_at_zero():
    F = np.random.default_rng(13).standard_normal((10, 4))
    o = np.full(10, 0.01)
    cert = verify_optimality(F, o, np.zeros(4), pi=0.5)
    assert cert.passed
    assert cert.multiplier == 0.0
    assert cert.worst_violation == 0.0


def test_certificate_flags_perturbation():
    F, o = _feasible_instance(14)
    result = solve_one(F, o, SolverSettings(pi=0.2))
    perturbed = result.coefficients.copy()
    perturbed[0] += 0.1
    cert = verify_optimality(F, o, perturbed, 0.2)
    assert not cert.passed
    assert cert.worst_violation > 1e-2


def test_certificate_honours_weights():
    F, o = _feasible_instance(15)
    weights = np.linspace(0.5, 2.0, F.shape[1])
    result = solve_one(F, o, SolverSettings(pi=0.2), weights=weights)
    assert verify_optimality(F, o, result.coefficients, 0.2, weights=weights).passed
    assert not verify_optimality(F, o, result.coefficients, 0.2).passed


def test_solve_done_event(event_log):
    F, o = _feasible_instance(16)
    solve_one(F, o, SolverSettings(pi=0.1), alternative=3)
    text = event_log.read_text(encoding="utf-8")
    assert '"solve.done"' in text
    assert '"alternative": 3' in text


def test_woodbury_update_matches_direct_solve():
    A = np.random.default_rng(17).standard_normal((12, 40))
    b = np.random.default_rng(18).standard_normal(40)
    direct = np.linalg.solve(A.T @ A + np.eye(40), b)
    np.testing.assert_allclose(normal_solver(A)(b), direct, rtol=1e-9, atol=1e-12)
    tall = A[:, :8]
    np.testing.assert_allclose(
        normal_solver(tall)(b[:8]), np.linalg.solve(tall.T @ tall + np.eye(8), b[:8]), rtol=1e-9
    )


def test_wide_library_converges_to_a_sparse_optimum(planted):
    F, o, truth = planted(21, J=20, k=60, s=3)
    result = solve_one(F, o, SolverSettings(pi=1e-6))
    assert result.converged
    assert result.residual_norm <= 1e-6 * (1 + 1e-6)
    assert len(result.active_set) <= 20
    assert verify_optimality(F, o, result.coefficients, result.pi_effective).worst_violation <= 1e-4
    exact = solve_one(F, o, SolverSettings(pi=1e-6, method="conic"))
    assert result.objective == pytest.approx(exact.objective, rel=1e-5)
    assert result.objective <= float(np.abs(truth).sum()) * (1 + 1e-6)


def test_conic_method_matches_brute_force(planted, l1_oracle):
    F, o, _ = planted(22, J=30, k=8, s=2)
    result = solve_one(F, o, SolverSettings(pi=1e-6, method="conic"))
    best, _ = l1_oracle(F, o, 1e-6)
    assert result.method == "conic"
    assert result.converged
    assert result.objective == pytest.approx(best, rel=1e-5)


def test_uncertified_admm_falls_back_to_conic(planted, l1_oracle, event_log):
    F, o, _ = planted(23, J=30, k=8, s=2)
    settings = SolverSettings(pi=1e-6, max_iterations=3, polish=False)
    result = solve_one(F, o, settings)
    best, _ = l1_oracle(F, o, 1e-6)
    assert result.method == "conic"
    assert result.converged
    assert result.residual_norm <= 1e-6 * (1 + 1e-6)
    assert result.objective == pytest.approx(best, rel=1e-4)
    assert '"solve.fallback"' in event_log.read_text(encoding="utf-8")

    stuck = solve_one(F, o, settings.model_copy(update={"fallback": "none"}))
    assert stuck.method == "ball_constrained"
    assert not stuck.converged
