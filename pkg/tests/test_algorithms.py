"""Driver behaviour: steps, sweeps, runs, stopping, tracing, determinism."""

import numpy as np
import pytest

from stochshift.algorithms import (
    AlgoConfig,
    RandomIndexStream,
    bms_run,
    bms_sweep,
    ms_run,
    run,
    sms_run,
    sms_step,
)
from stochshift.core import mean_shift_operator, objective_value, partial_gradient
from stochshift.kernels import EPANECHNIKOV, Profile
from stochshift.synthdata import generate, preset

P2 = Profile(2)


def seed_with_first_draw(n, want, limit=200):
    for seed in range(limit):
        if RandomIndexStream(seed).draw(n) == want:
            return seed
    raise AssertionError("no seed found")


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            AlgoConfig(algorithm="kmeans")
        with pytest.raises(ValueError):
            AlgoConfig(h=0.0)
        with pytest.raises(ValueError):
            AlgoConfig(move_tolerance=-1.0)
        with pytest.raises(ValueError):
            AlgoConfig(sms_stop_fraction=0.0)

    def test_budget_below_n_rejected(self):
        cfg = AlgoConfig(max_updates=2)
        with pytest.raises(ValueError, match="max_updates"):
            sms_run(np.zeros((5, 1)), cfg)


class TestRandomIndexStream:
    def test_identical_seed_identical_sequence(self):
        a = RandomIndexStream(42)
        b = RandomIndexStream(42)
        assert [a.draw(10) for _ in range(50)] == [b.draw(10) for _ in range(50)]

    def test_range(self):
        s = RandomIndexStream(1)
        assert all(0 <= s.draw(7) < 7 for _ in range(200))


class TestSmsStep:
    def test_two_point_epanechnikov(self):
        pts = np.array([[0.0], [0.5]])
        cfg = AlgoConfig(profile=EPANECHNIKOV, h=1.0)
        seed = seed_with_first_draw(2, 0)
        new, i, shift = sms_step(pts, cfg, RandomIndexStream(seed))
        assert i == 0
        np.testing.assert_allclose(new, [[0.25], [0.5]])
        assert shift == pytest.approx(0.25)

    def test_touches_exactly_one_point(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(20, 3))
        cfg = AlgoConfig(profile=P2, h=1.0)
        new, i, _ = sms_step(pts, cfg, RandomIndexStream(5))
        others = np.delete(np.arange(20), i)
        np.testing.assert_array_equal(new[others], pts[others])

    def test_coincident_fixed_point(self):
        pts = np.tile([[1.0, 1.0]], (4, 1))
        new, _, shift = sms_step(pts, AlgoConfig(profile=P2), RandomIndexStream(0))
        np.testing.assert_array_equal(new, pts)
        assert shift == 0.0

    def test_separated_fixed_point(self):
        pts = np.array([[0.0], [5.0]])
        new, _, shift = sms_step(pts, AlgoConfig(profile=P2), RandomIndexStream(0))
        np.testing.assert_array_equal(new, pts)
        assert shift == 0.0

    def test_matches_operator_and_gradient_form(self):
        # x_new = S_h(x_i) = x_i + (h^2 / 2) grad_i / sum_j G_ij
        rng = np.random.default_rng(9)
        pts = rng.uniform(-1, 1, size=(9, 2))
        h = 0.8
        cfg = AlgoConfig(profile=P2, h=h)
        seed = seed_with_first_draw(9, 4)
        new, i, _ = sms_step(pts, cfg, RandomIndexStream(seed))
        assert i == 4
        op = mean_shift_operator(pts[4], pts, h, P2)
        np.testing.assert_allclose(new[4], op, atol=1e-12)
        diff = pts - pts[4]
        t = np.einsum("ij,ij->i", diff, diff) / (h * h)
        total = (2.0 * np.clip(1.0 - t, 0.0, None)).sum()
        grad_form = pts[4] + (h * h / 2.0) / total * partial_gradient(pts, h, P2, 4)
        np.testing.assert_allclose(new[4], grad_form, atol=1e-12)


class TestBmsSweep:
    def test_two_point_collapse(self):
        pts = np.array([[0.0], [0.5]])
        new, max_shift = bms_sweep(pts, AlgoConfig(profile=EPANECHNIKOV, h=1.0))
        np.testing.assert_allclose(new, [[0.25], [0.25]])
        assert max_shift == pytest.approx(0.25)

    def test_critical_state_unchanged(self):
        pts = np.array([[0.0, 0.0], [3.0, 0.0]])
        new, max_shift = bms_sweep(pts, AlgoConfig(profile=P2, h=1.0))
        np.testing.assert_array_equal(new, pts)
        assert max_shift == 0.0

    def test_collinear_strict_neighbors(self):
        pts = np.array([[0.0], [0.4], [0.8]])
        new, _ = bms_sweep(pts, AlgoConfig(profile=EPANECHNIKOV, h=0.5))
        np.testing.assert_allclose(new, [[0.2], [0.4], [0.6]])

    def test_synchronous_update_uses_input_state(self):
        # sequential updating would give a different second coordinate
        pts = np.array([[0.0], [0.4], [0.8]])
        new, _ = bms_sweep(pts, AlgoConfig(profile=EPANECHNIKOV, h=0.5))
        sequential = pts.copy()
        for i in range(3):
            sequential[i] = mean_shift_operator(sequential[i], sequential, 0.5, EPANECHNIKOV)
        assert not np.allclose(new, sequential)


class TestMsRun:
    def test_single_point(self):
        modes, trace = ms_run(np.array([[2.0, 3.0]]), AlgoConfig(algorithm="ms"))
        np.testing.assert_array_equal(modes, [[2.0, 3.0]])
        assert trace.stop_reason == "converged"

    def test_two_points_within_h(self):
        modes, _ = ms_run(np.array([[0.0], [0.5]]), AlgoConfig(algorithm="ms", profile=EPANECHNIKOV))
        np.testing.assert_allclose(modes, [[0.25], [0.25]])

    def test_two_points_apart(self):
        pts = np.array([[0.0], [5.0]])
        modes, _ = ms_run(pts, AlgoConfig(algorithm="ms", profile=P2))
        np.testing.assert_array_equal(modes, pts)

    def test_modes_in_input_order(self):
        data = generate(preset("set2", seed=0))
        modes, trace = ms_run(data.points, AlgoConfig(algorithm="ms", profile=EPANECHNIKOV))
        assert modes.shape == data.points.shape
        assert trace.total_updates >= data.n


class TestSmsRun:
    def test_critical_start_stops_after_coverage(self):
        pts = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
        cfg = AlgoConfig(profile=P2, seed=1)
        final, trace = sms_run(pts, cfg)
        np.testing.assert_array_equal(final, pts)
        assert trace.stop_reason == "converged"
        assert np.all(trace.shift == 0.0)
        # every index drawn at least once
        assert set(trace.moved_index.tolist()) == {0, 1, 2}

    def test_two_point_common_limit(self):
        pts = np.array([[0.0], [0.5]])
        final, trace = sms_run(pts, AlgoConfig(profile=EPANECHNIKOV, h=1.0, seed=7))
        assert trace.stop_reason == "converged"
        assert abs(final[0, 0] - final[1, 0]) < 1e-5
        assert 0.0 <= final[0, 0] <= 0.5

    def test_small_diameter_collapses(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(-0.2, 0.2, size=(12, 2))
        final, trace = sms_run(pts, AlgoConfig(profile=P2, h=1.0, seed=3))
        diff = final[:, None, :] - final[None, :, :]
        assert np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).max() < 1e-4

    def test_budget_exhaustion_reported(self):
        data = generate(preset("set2", seed=1))
        cfg = AlgoConfig(profile=EPANECHNIKOV, max_updates=data.n, seed=0)
        _, trace = sms_run(data.points, cfg)
        assert trace.stop_reason == "max_updates"
        assert trace.total_updates == data.n

    def test_prefix_matches_functional_steps(self):
        data = generate(preset("set2", seed=2))
        cfg = AlgoConfig(profile=EPANECHNIKOV, h=1.0, seed=11, max_updates=data.n)
        _, trace = sms_run(data.points, cfg)
        pts = data.points.copy()
        stream = RandomIndexStream(11)
        for j in range(25):
            pts, i, shift = sms_step(pts, cfg, stream)
            assert i == trace.moved_index[j]
            assert shift == pytest.approx(trace.shift[j], abs=1e-12)

    def test_ascent_with_explicit_constant(self):
        data = generate(preset("set2", seed=3))
        cfg = AlgoConfig(profile=P2, h=1.0, seed=5, trace_objective=True)
        _, trace = sms_run(data.points, cfg)
        values = np.concatenate(([trace.initial_objective], trace.objective))
        deltas = np.diff(values)
        c = 2.0 * P2.weight_at_zero / 1.0
        tol = 1e-9 * max(1.0, trace.initial_objective)
        assert np.all(deltas >= c * trace.shift**2 - tol)

    def test_traced_objective_matches_recomputation(self):
        data = generate(preset("set2", seed=4))
        cfg = AlgoConfig(profile=P2, h=1.0, seed=6, max_updates=400, trace_objective=True)
        final, trace = sms_run(data.points, cfg)
        recomputed = objective_value(final, 1.0, P2)
        assert trace.objective[-1] == pytest.approx(recomputed, rel=1e-9)

    def test_snapshots_and_counts(self):
        data = generate(preset("set2", seed=5))
        cfg = AlgoConfig(profile=EPANECHNIKOV, seed=8, max_updates=300, snapshot_every=100)
        _, trace = sms_run(data.points, cfg)
        ks = [k for k, _ in trace.snapshots]
        assert ks[0] == 0 and ks[-1] == trace.total_updates
        assert trace.updates_per_point == pytest.approx(trace.total_updates / data.n)


class TestHullShrinkage:
    @pytest.mark.parametrize("algo", ["sms", "bms"])
    def test_projection_widths_monotone(self, algo):
        rng = np.random.default_rng(13)
        pts = rng.normal(size=(40, 2))
        cfg = AlgoConfig(
            algorithm=algo, profile=EPANECHNIKOV, h=1.0, seed=2,
            max_updates=4000, snapshot_every=40,
        )
        _, trace = run(pts, cfg)
        dirs = np.vstack([np.eye(2), rng.normal(size=(4, 2))])
        dirs /= np.sqrt(np.einsum("ij,ij->i", dirs, dirs))[:, None]
        prev = None
        for _, snap in trace.snapshots:
            proj = snap @ dirs.T
            width_hi, width_lo = proj.max(axis=0), proj.min(axis=0)
            if prev is not None:
                assert np.all(width_hi <= prev[0] + 1e-9)
                assert np.all(width_lo >= prev[1] - 1e-9)
            prev = (width_hi, width_lo)


class TestDeterminism:
    @pytest.mark.parametrize("algo", ["ms", "bms", "sms"])
    def test_repeat_run_bit_identical(self, algo):
        data = generate(preset("set2", seed=6))
        cfg = AlgoConfig(
            algorithm=algo, profile=EPANECHNIKOV, h=1.0, seed=21,
            max_updates=20000, trace_objective=(algo != "ms"),
        )
        out1, tr1 = run(data.points, cfg)
        out2, tr2 = run(data.points, cfg)
        np.testing.assert_array_equal(out1, out2)
        np.testing.assert_array_equal(tr1.moved_index, tr2.moved_index)
        np.testing.assert_array_equal(tr1.shift, tr2.shift)
        if tr1.objective is not None:
            np.testing.assert_array_equal(tr1.objective, tr2.objective)
        assert tr1.total_updates == tr2.total_updates
        assert tr1.stop_reason == tr2.stop_reason


class TestBmsRun:
    def test_critical_start_single_sweep(self):
        pts = np.array([[0.0], [3.0]])
        final, trace = bms_run(pts, AlgoConfig(algorithm="bms", profile=P2))
        np.testing.assert_array_equal(final, pts)
        assert trace.n_events == 1
        assert trace.total_updates == 2

    def test_two_points_one_sweep_to_coincide(self):
        final, trace = bms_run(
            np.array([[0.0], [0.5]]), AlgoConfig(algorithm="bms", profile=EPANECHNIKOV)
        )
        np.testing.assert_allclose(final, [[0.25], [0.25]])
        assert trace.stop_reason == "converged"

    def test_objective_non_decreasing_on_preset(self):
        data = generate(preset("set2", seed=7))
        cfg = AlgoConfig(algorithm="bms", profile=EPANECHNIKOV, trace_objective=True)
        _, trace = bms_run(data.points, cfg)
        values = np.concatenate(([trace.initial_objective], trace.objective))
        assert np.all(np.diff(values) >= -1e-9 * max(1.0, values[0]))
        assert trace.total_updates == data.n * trace.n_events
