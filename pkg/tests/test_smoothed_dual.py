import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import otkit as ok
from helpers import small_random_instance


def finite_difference_gradient(psi, src, tgt, cost, lam, h=1e-6):
    """Central differences of the smoothed energy, the independent oracle for
    the analytic gradient."""
    psi = np.asarray(psi, dtype=float)
    grad = np.zeros_like(psi)
    for j in range(psi.size):
        bump = np.zeros_like(psi)
        bump[j] = h
        up = ok.smoothed_energy(psi + bump, src, tgt, cost, lam)
        dn = ok.smoothed_energy(psi - bump, src, tgt, cost, lam)
        grad[j] = (up - dn) / (2.0 * h)
    return grad


def finite_difference_hessian_apply(psi, src, tgt, cost, lam, direction, h=1e-6):
    up = ok.smoothed_gradient(psi + h * direction, src, tgt, cost, lam)
    dn = ok.smoothed_gradient(psi - h * direction, src, tgt, cost, lam)
    return (up - dn) / (2.0 * h)


def power_iteration_max_eigenvalue(src, tgt, cost, lam, psi, iters=300, seed=0):
    """Largest Hessian eigenvalue estimated from below on the zero-mean
    subspace (the all-ones null direction is projected out)."""
    rng = np.random.default_rng(seed)
    w = ok.project_H(rng.standard_normal(cost.shape[1]))
    w /= np.linalg.norm(w)
    for _ in range(iters):
        hw = ok.hessian_apply(psi, src, tgt, cost, lam, w)
        hw = ok.project_H(hw)
        norm = np.linalg.norm(hw)
        if norm == 0.0:
            return 0.0
        w = hw / norm
    hw = ok.hessian_apply(psi, src, tgt, cost, lam, w)
    return float(w @ hw)


class TestCTransform:
    def test_direct_max(self):
        cost = ok.CostMatrix.from_entries([[2.0, 1.0]])
        assert ok.c_transform(np.array([1.0, 3.0]), cost)[0] == 2.0
        assert ok.c_transform_argmax(np.array([1.0, 3.0]), cost)[0] == 1

    def test_zero_potential(self, rng):
        cost = ok.CostMatrix.from_entries(rng.uniform(0, 5, size=(6, 4)))
        np.testing.assert_array_equal(ok.c_transform(np.zeros(4), cost),
                                      -cost.entries.min(axis=1))

    def test_dominates_every_column(self, rng):
        cost = ok.CostMatrix.from_entries(rng.uniform(0, 5, size=(7, 5)))
        psi = rng.standard_normal(5)
        phi = ok.c_transform(psi, cost)
        assert (phi[:, None] >= psi[None, :] - cost.entries - 1e-15).all()

    def test_tie_breaks_to_lowest_index(self):
        cost = ok.CostMatrix.from_entries([[1.0, 1.0, 2.0]])
        assert ok.c_transform_argmax(np.array([0.0, 0.0, 1.0]), cost)[0] == 0


class TestSmoothedCTransform:
    def test_equal_arguments_collapse(self):
        cost = ok.CostMatrix.from_entries([[0.0, 0.0]])
        assert ok.smoothed_c_transform(np.zeros(2), cost, 1.0)[0] == 0.0

    def test_constant_argument_exact(self, rng):
        # psi_j - c_ij == a for every j must reproduce a exactly, not just
        # approximately: the row shift happens before dividing by lam.
        a = -1.73
        n = 7
        psi = rng.standard_normal(n)
        cost = ok.CostMatrix.from_entries((psi - a)[None, :])
        for lam in (3.0, 0.7, 0.01):
            assert ok.smoothed_c_transform(psi, cost, lam)[0] == a

    def test_sandwich_against_exact(self):
        cost = ok.CostMatrix.from_entries([[2.0, 1.0]])
        psi = np.array([1.0, 3.0])
        lam = 0.01
        smooth = ok.smoothed_c_transform(psi, cost, lam)[0]
        assert 2.0 - lam * math.log(2) <= smooth <= 2.0

    def test_tiny_lambda_finite(self, rng):
        cost = ok.CostMatrix.from_entries(rng.uniform(0, 1000, size=(5, 6)))
        vals = ok.smoothed_c_transform(rng.standard_normal(6), cost, 1e-9)
        assert np.isfinite(vals).all()


class TestEnergy:
    def test_zero_potential_zero_diag(self):
        src = ok.from_points([[0.0], [1.0]], [1.0, 1.0])
        tgt = ok.from_points([[0.0], [1.0]], [1.0, 1.0])
        cost = ok.CostMatrix.from_entries([[0.0, 1.0], [1.0, 0.0]])
        assert ok.energy(np.zeros(2), src, tgt, cost) == 0.0

    def test_shift_invariance(self, rng):
        src, tgt, cost = small_random_instance(rng, 6, 5)
        psi = rng.standard_normal(5)
        for k in (-3.0, 0.4, 11.0):
            assert ok.energy(psi + k, src, tgt, cost) == pytest.approx(
                ok.energy(psi, src, tgt, cost), abs=1e-12)

    def test_minimum_matches_exact_oracle(self, rng):
        src, tgt, cost = small_random_instance(rng, 5, 5)
        _, lp_cost = ok.exact_solve(src, tgt, cost)
        lam = cost.spread / 2000
        result = ok.fista_solve(src, tgt, cost, lam,
                                ok.FistaConfig(eta=20, max_iters=100000, stop_rel_tol=1e-13,
                                               trace_every=10**9))
        assert -ok.energy(result.potential, src, tgt, cost) == pytest.approx(lp_cost, abs=1e-3)


class TestSmoothedEnergy:
    def test_constant_cost_collapses(self):
        c = 2.5
        src = ok.from_points([[0.0], [1.0]], [0.4, 0.6])
        tgt = ok.from_points([[0.0], [1.0]], [0.5, 0.5])
        cost = ok.CostMatrix.from_entries(np.full((2, 2), c))
        for lam in (1.0, 0.2):
            assert ok.smoothed_energy(np.zeros(2), src, tgt, cost, lam) == pytest.approx(-c, abs=1e-14)

    def test_sandwich_on_random_triples(self, rng):
        for _ in range(100):
            m = int(rng.integers(2, 10))
            n = int(rng.integers(2, 10))
            src, tgt, cost = small_random_instance(rng, m, n, cost_scale=5.0)
            psi = rng.standard_normal(n) * 3.0
            lam = float(10 ** rng.uniform(-2, 1))
            e = ok.energy(psi, src, tgt, cost)
            e_lam = ok.smoothed_energy(psi, src, tgt, cost, lam)
            assert e_lam <= e + 1e-12
            assert e <= e_lam + lam * math.log(n) + 1e-12

    def test_converges_to_energy_as_lam_shrinks(self, rng):
        src, tgt, cost = small_random_instance(rng, 6, 6)
        psi = rng.standard_normal(6)
        e = ok.energy(psi, src, tgt, cost)
        gaps = [e - ok.smoothed_energy(psi, src, tgt, cost, lam) for lam in (1.0, 0.1, 0.01)]
        assert gaps[0] > gaps[1] > gaps[2] >= 0.0
        for lam, gap in zip((1.0, 0.1, 0.01), gaps):
            assert gap <= lam * math.log(6) + 1e-12

    def test_kernel_mode_matches_log_domain_when_safe(self, rng):
        src, tgt, cost = small_random_instance(rng, 5, 4)
        psi = rng.standard_normal(4)
        a = ok.smoothed_energy(psi, src, tgt, cost, 0.5)
        b = ok.smoothed_energy(psi, src, tgt, cost, 0.5, kernel_mode=True)
        assert a == pytest.approx(b, rel=1e-12)

    def test_kernel_mode_overflows_where_log_domain_survives(self, rng):
        src, tgt, cost = small_random_instance(rng, 4, 4, cost_scale=2000.0)
        psi = rng.standard_normal(4)
        lam = 1e-3
        assert math.isfinite(ok.smoothed_energy(psi, src, tgt, cost, lam))
        kernel = ok.smoothed_energy(psi, src, tgt, cost, lam, kernel_mode=True)
        assert not math.isfinite(kernel)


class TestSmoothedGradient:
    def test_zero_cost_closed_form(self):
        src = ok.from_points([[0.0], [1.0]], [0.5, 0.5])
        tgt = ok.from_points([[0.0], [1.0]], [0.3, 0.7])
        cost = ok.CostMatrix.from_entries(np.zeros((2, 2)))
        grad = ok.smoothed_gradient(np.zeros(2), src, tgt, cost, 1.0)
        np.testing.assert_allclose(grad, [0.2, -0.2], atol=1e-15)

    def test_entries_sum_to_zero(self, rng):
        for _ in range(20):
            src, tgt, cost = small_random_instance(rng, 7, 6)
            psi = rng.standard_normal(6)
            grad = ok.smoothed_gradient(psi, src, tgt, cost, 0.3)
            assert abs(grad.sum()) <= 1e-12

    @pytest.mark.parametrize("lam", [1.0, 0.5, 0.1])
    def test_matches_finite_differences(self, lam, rng):
        for _ in range(4):
            src, tgt, cost = small_random_instance(rng, 8, 6, cost_scale=3.0)
            psi = rng.standard_normal(6)
            grad = ok.smoothed_gradient(psi, src, tgt, cost, lam)
            fd = finite_difference_gradient(psi, src, tgt, cost, lam)
            err = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-30)
            assert err < 1e-6

    def test_shift_invariance(self, rng):
        src, tgt, cost = small_random_instance(rng, 6, 5)
        psi = rng.standard_normal(5)
        a = ok.smoothed_gradient(psi, src, tgt, cost, 0.2)
        b = ok.smoothed_gradient(psi + 5.5, src, tgt, cost, 0.2)
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestHessianApply:
    def test_annihilates_ones(self, rng):
        src, tgt, cost = small_random_instance(rng, 9, 7)
        psi = rng.standard_normal(7)
        hv = ok.hessian_apply(psi, src, tgt, cost, 0.4, np.ones(7))
        np.testing.assert_allclose(hv, 0.0, atol=1e-12)

    def test_matches_finite_differences(self, rng):
        src, tgt, cost = small_random_instance(rng, 6, 5, cost_scale=2.0)
        psi = rng.standard_normal(5)
        direction = rng.standard_normal(5)
        hv = ok.hessian_apply(psi, src, tgt, cost, 0.7, direction)
        fd = finite_difference_hessian_apply(psi, src, tgt, cost, 0.7, direction)
        err = np.linalg.norm(hv - fd) / max(np.linalg.norm(fd), 1e-30)
        assert err < 1e-5

    def test_spectral_bound(self, rng):
        for _ in range(3):
            src, tgt, cost = small_random_instance(rng, 5, 5, cost_scale=1.5)
            lam = float(10 ** rng.uniform(-1.5, 0.5))
            psi = rng.standard_normal(5)
            top = power_iteration_max_eigenvalue(src, tgt, cost, lam, psi)
            assert top <= 1.0 / lam + 1e-9

    def test_positive_semidefinite_directionally(self, rng):
        src, tgt, cost = small_random_instance(rng, 6, 6)
        psi = rng.standard_normal(6)
        for _ in range(10):
            w = rng.standard_normal(6)
            assert w @ ok.hessian_apply(psi, src, tgt, cost, 0.5, w) >= -1e-12


class TestProjectH:
    def test_subtract_mean(self):
        np.testing.assert_array_equal(ok.project_H([1.0, 2.0, 3.0]), [-1.0, 0.0, 1.0])

    def test_zero_mean_unchanged(self):
        z = np.array([-1.0, 0.0, 1.0])
        np.testing.assert_array_equal(ok.project_H(z), z)

    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=50))
    @settings(max_examples=100)
    def test_idempotent(self, values):
        once = ok.project_H(values)
        twice = ok.project_H(once)
        # rounding of the first mean is driven by the input scale
        scale = max(1.0, np.abs(np.asarray(values)).max())
        np.testing.assert_allclose(twice, once, rtol=0, atol=1e-14 * scale)


class TestRecoverPlan:
    def test_constant_cost_zero_potential(self):
        src = ok.from_points([[0.0], [1.0]], [0.3, 0.7])
        tgt = ok.from_points([[0.0], [1.0], [2.0]], [0.2, 0.3, 0.5])
        cost = ok.CostMatrix.from_entries(np.full((2, 3), 4.0))
        plan = ok.recover_plan(np.zeros(3), src, tgt, cost, 0.5)
        np.testing.assert_allclose(plan.entries, np.outer(src.weights, np.full(3, 1 / 3)),
                                   rtol=1e-15)

    def test_constant_cost_log_weights_gives_outer_product(self):
        src = ok.from_points([[0.0], [1.0]], [0.3, 0.7])
        tgt = ok.from_points([[0.0], [1.0], [2.0]], [0.2, 0.3, 0.5])
        cost = ok.CostMatrix.from_entries(np.full((2, 3), 4.0))
        lam = 0.7
        plan = ok.recover_plan(lam * np.log(tgt.weights), src, tgt, cost, lam)
        np.testing.assert_allclose(plan.entries, np.outer(src.weights, tgt.weights), rtol=1e-12)

    def test_row_sums_exact(self, rng):
        for _ in range(20):
            src, tgt, cost = small_random_instance(rng, 8, 5)
            psi = rng.standard_normal(5) * 2.0
            plan = ok.recover_plan(psi, src, tgt, cost, 0.05)
            np.testing.assert_allclose(plan.row_sums(), src.weights, rtol=0, atol=1e-12)

    def test_shift_invariance(self, rng):
        src, tgt, cost = small_random_instance(rng, 6, 6)
        psi = rng.standard_normal(6)
        a = ok.recover_plan(psi, src, tgt, cost, 0.2).entries
        b = ok.recover_plan(psi - 7.25, src, tgt, cost, 0.2).entries
        np.testing.assert_allclose(a, b, atol=1e-13)

    def test_column_sums_match_target_at_optimum(self, rng):
        src, tgt, cost = small_random_instance(rng, 10, 8)
        lam = cost.spread / 100
        result = ok.fista_solve(src, tgt, cost, lam,
                                ok.FistaConfig(eta=5, max_iters=200000, stop_rel_tol=1e-13,
                                               trace_every=10**9))
        assert result.trace.status == ok.CONVERGED
        np.testing.assert_allclose(result.plan.col_sums(), tgt.weights, atol=1e-7)


class TestPotentialAndParams:
    def test_normalized_flag_validated(self):
        with pytest.raises(ValueError, match="zero mean"):
            ok.Potential(np.array([1.0, 2.0]), normalized=True)
        ok.Potential(np.array([-0.5, 0.5]), normalized=True)

    def test_smoothing_from_divisor(self):
        cost = ok.CostMatrix.from_entries([[0.0, 4.0], [2.0, 2.0]])
        params = ok.SmoothingParams.from_divisor(cost, 500.0)
        assert params.lam == 4.0 / 500.0
        assert params.T == 500.0

    def test_lambda_positive_required(self):
        with pytest.raises(ValueError):
            ok.SmoothingParams(0.0)


class TestPlanExport:
    def test_text_format(self, tmp_path):
        plan = ok.TransportPlan(np.array([[0.25, 0.25], [0.0, 0.5]]))
        path = tmp_path / "plan.txt"
        plan.save_text(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "2 2"
        assert len(lines) == 3

    def test_csv_triples_threshold(self, tmp_path):
        plan = ok.TransportPlan(np.array([[0.25, 1e-9], [0.0, 0.75]]))
        path = tmp_path / "plan.csv"
        plan.save_csv_triples(path, threshold=1e-6)
        lines = path.read_text().splitlines()
        assert lines[0] == "i,j,p"
        assert lines[1:] == ["0,0,0.25", "1,1,0.75"]
