import numpy as np
import pytest

from specclip.errors import DimensionMismatch, RiccatiNoConverge, TooShort
from specclip.simeval import (BenchRecord, ErrorCurve, bench_clip, figure_eight_reference, format_bench, is_moving,
                              lqr_gain, loglog_slope, mean_error_curve, moving_ratio, open_loop_tracking_error,
                              reconstruction_error, rollout, rollout_controlled, track_reference)


class TestRollout:
    def test_doubling_hits_bound(self):
        res = rollout([[2.0]], [1.0], 10, bound=10.0)
        np.testing.assert_array_equal(res.states[:, 0], [1, 2, 4, 8, 16])
        assert res.diverged_at == 4 and res.max_norm == 16.0

    def test_stable_runs_full_horizon(self):
        res = rollout(0.5 * np.eye(2), [1.0, 0.0], 5)
        assert res.states.shape == (6, 2) and not res.diverged
        assert res.states[-1, 0] == pytest.approx(0.5 ** 5)

    def test_controlled_by_hand(self):
        res = rollout_controlled([[1.0]], [[2.0]], [0.0], [[1.0], [-0.5]])
        np.testing.assert_array_equal(res.states[:, 0], [0.0, 2.0, 1.0])

    def test_x0_dimension(self):
        with pytest.raises(DimensionMismatch):
            rollout(np.eye(2), [1.0, 2.0, 3.0], 3)


class TestMetrics:
    def test_mae_and_mse(self):
        pred = np.array([[1.0, 2.0], [0.0, 0.0]])
        truth = np.array([[0.0, 0.0], [3.0, -1.0]])
        np.testing.assert_allclose(reconstruction_error(pred, truth, "mae").per_step, [1.5, 2.0])
        curve = reconstruction_error(pred, truth, "mse")
        np.testing.assert_allclose(curve.per_step, [2.5, 5.0])
        assert curve.summary_mean == pytest.approx(3.75)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            reconstruction_error(np.zeros((3, 2)), np.zeros((2, 2)))

    def test_mean_curve(self):
        c = mean_error_curve([ErrorCurve.from_steps([1, 2]), ErrorCurve.from_steps([3, 4])])
        np.testing.assert_allclose(c.per_step, [2, 3])

    @pytest.mark.parametrize("last, expected", [(10.0, True), (9.0, False), (-0.5, True)])
    def test_is_moving_strict_threshold(self, last, expected):
        # L1 distance from the last frame to the one two steps earlier, which is 0.5
        assert is_moving([[0.5], [100.0], [last]]) is (abs(last - 0.5) > 9)

    def test_is_moving_sums_over_pixels(self):
        frames = np.zeros((3, 2, 2))
        frames[-1] = 2.5  # L1 gap 10
        assert is_moving(frames)

    def test_moving_ratio(self):
        seqs = [np.zeros((3, 1)), np.array([[0.0], [0.0], [20.0]])]
        assert moving_ratio(seqs) == 0.5

    def test_too_short(self):
        with pytest.raises(TooShort):
            is_moving(np.zeros((2, 1)))


def scalar_dare(a, b, q, r):
    # positive root of b^2 P^2 + (r - q b^2 - a^2 r) P - q r = 0
    c1 = r - q * b * b - a * a * r
    P = (-c1 + np.sqrt(c1 * c1 + 4 * b * b * q * r)) / (2 * b * b)
    return b * P * a / (r + b * b * P)


class TestLqr:
    @pytest.mark.parametrize("a, b, q, r", [(1.2, 1.0, 1.0, 1.0), (0.5, 2.0, 3.0, 0.1), (-2.0, 0.5, 1.0, 4.0)])
    def test_scalar_closed_form(self, a, b, q, r):
        G = lqr_gain([[a]], [[b]], [[q]], [[r]])
        assert G[0, 0] == pytest.approx(scalar_dare(a, b, q, r), rel=1e-8)

    def test_matches_scipy(self, rng):
        linalg = pytest.importorskip("scipy.linalg")
        A, B = rng.standard_normal((4, 4)), rng.standard_normal((4, 2))
        Q, R = np.eye(4), np.eye(2)
        P = linalg.solve_discrete_are(A, B, Q, R)
        G_ref = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        np.testing.assert_allclose(lqr_gain(A, B, Q, R), G_ref, rtol=1e-6, atol=1e-8)

    def test_closed_loop_stable(self, rng):
        A, B = 1.5 * rng.standard_normal((3, 3)), rng.standard_normal((3, 1))
        G = lqr_gain(A, B, np.eye(3), np.eye(1))
        assert np.max(np.abs(np.linalg.eigvals(A - B @ G))) < 1

    def test_zero_dynamics_zero_gain(self):
        np.testing.assert_array_equal(lqr_gain(np.zeros((2, 2)), np.ones((2, 1)), np.eye(2), np.eye(1)), 0)

    @pytest.mark.parametrize("a", [1.5, 2.0])
    def test_unstabilizable_pair_is_flagged(self, a):
        A, B = np.diag([a, 0.5]), np.array([[0.0], [1.0]])
        try:
            G = lqr_gain(A, B, np.eye(2), np.eye(1))
        except RiccatiNoConverge:
            return
        assert np.max(np.abs(np.linalg.eigvals(A - B @ G))) >= 1

    def test_scalar_bisection_oracle(self):
        # fixed point of p = q + a^2 p - (a b p)^2 / (r + b^2 p), found by bisection
        a, b, q, r = 1.2, 1.0, 1.0, 1.0
        f = lambda p: q + a * a * p - (a * b * p) ** 2 / (r + b * b * p) - p
        lo, hi = 0.0, 1e3
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if f(mid) > 0 else (lo, mid)
        g = b * lo * a / (r + b * b * lo)
        G = lqr_gain([[a]], [[b]], [[q]], [[r]])
        assert G[0, 0] == pytest.approx(g, rel=1e-8)
        assert abs(a - b * G[0, 0]) < 1

    def test_iteration_budget(self):
        with pytest.raises(RiccatiNoConverge):
            lqr_gain([[0.999]], [[0.001]], [[1.0]], [[1.0]], iters=3)

    def test_shapes(self):
        with pytest.raises(DimensionMismatch):
            lqr_gain(np.eye(2), np.ones((2, 1)), np.eye(3), np.eye(1))


class TestTracking:
    def test_figure_eight_values(self):
        ref = figure_eight_reference(3, 4, dt=0.5)
        t = np.array([0.0, 0.5, 1.0, 1.5])
        np.testing.assert_allclose(ref[:, 0], np.sin(t))
        np.testing.assert_allclose(ref[:, 1], np.sin(2 * t))
        np.testing.assert_array_equal(ref[:, 2], 0)

    def test_needs_two_coordinates(self):
        with pytest.raises(DimensionMismatch):
            figure_eight_reference(1, 5)

    def test_fully_actuated_tracking_beats_open_loop(self):
        A, B = 0.9 * np.eye(2), np.eye(2)
        ref = figure_eight_reference(2, 200)
        err = track_reference(A, B, A, B, ref, np.eye(2), 1e-6 * np.eye(2)).summary_mean
        assert err < 0.2 * open_loop_tracking_error(A, ref).summary_mean

    def test_deadbeat_by_hand(self):
        # A = a I, B = I, R -> 0 gives G -> a I, so x_{t+1} = a r_t
        a = 0.9
        ref = figure_eight_reference(2, 50)
        A = a * np.eye(2)
        curve = track_reference(A, np.eye(2), A, np.eye(2), ref, np.eye(2), 1e-12 * np.eye(2))
        expected = np.abs(a * ref[:-1] - ref[1:]).mean(axis=1)
        np.testing.assert_allclose(curve.per_step[1:], expected, atol=1e-9)

    def test_constant_equilibrium_reference(self):
        A, B = np.array([[0.5, 0.2], [0.0, 0.8]]), np.array([[1.0], [0.5]])
        curve = track_reference(A, B, A, B, np.zeros((30, 2)), np.eye(2), np.eye(1), x0=[1.0, -1.0])
        assert curve.per_step[-1] < 1e-4 * curve.per_step[0]


class TestBench:
    def test_slope_of_power_law(self):
        dims = [10, 20, 40, 80]
        assert loglog_slope(dims, [d ** 3 * 1e-9 for d in dims]) == pytest.approx(3.0)

    def test_single_dim_has_no_slope(self):
        assert loglog_slope([10], [1.0]) is None

    def test_bench_small(self):
        records, slope = bench_clip([8, 16], repeats=1, measure_memory=True)
        assert [r.n for r in records] == [8, 16]
        assert all(r.wall_time_seconds > 0 and r.peak_extra_bytes > 0 for r in records)
        assert slope is not None

    def test_bench_rejects_unsorted(self):
        with pytest.raises(ValueError):
            bench_clip([16, 8])

    def test_format(self):
        text = format_bench([BenchRecord(10, 1e-3), BenchRecord(20, 8e-3)], 3.0)
        lines = text.strip().splitlines()
        assert lines[0] == "10,1.000000e-03,"
        assert lines[1] == "20,8.000000e-03,3.0000"
        assert lines[-1] == "slope,3.0000"
