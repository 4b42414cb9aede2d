import math

import numpy as np
import pytest

from elastic_flow import ConfigError, WindowMismatch, make_initial_curve
from elastic_flow.convergence import (
    SweepConfig,
    ck_distance,
    run_sweep,
    singularity_time_estimate,
)
from elastic_flow.flow import FlowConfig, run


def short_run(n=64, eps=0.1, dt=1e-4, t_end=0.01, family="flattened_sine", **kw):
    curve = make_initial_curve(family, n, **kw)
    cfg = FlowConfig(epsilon=eps, n=n, dt=dt, t_end=t_end)
    return run(curve, cfg, snapshot_stride=10)


class TestSweepConfig:
    def test_epsilons_must_decrease(self):
        base = FlowConfig(epsilon=0.1, n=64, dt=1e-4, t_end=0.01)
        with pytest.raises(ConfigError):
            SweepConfig(epsilons=(0.05, 0.1), base=base)

    def test_epsilons_in_range(self):
        base = FlowConfig(epsilon=0.1, n=64, dt=1e-4, t_end=0.01)
        with pytest.raises(ConfigError):
            SweepConfig(epsilons=(1.5, 0.1), base=base)

    def test_delta_below_t_end(self):
        base = FlowConfig(epsilon=0.1, n=64, dt=1e-4, t_end=0.01)
        with pytest.raises(ConfigError):
            SweepConfig(epsilons=(0.1,), base=base, delta=0.02)

    def test_snapshot_times_on_dt_grid(self):
        base = FlowConfig(epsilon=0.1, n=64, dt=1e-4, t_end=0.01)
        with pytest.raises(ConfigError):
            SweepConfig(epsilons=(0.1,), base=base, snapshot_times=(0.00033,))

    def test_k_max_capped_at_three(self):
        base = FlowConfig(epsilon=0.1, n=64, dt=1e-4, t_end=0.01)
        with pytest.raises(ConfigError):
            SweepConfig(epsilons=(0.1,), base=base, k_max=4)


class TestCkDistance:
    def test_identical_trajectories(self):
        traj = short_run()
        assert ck_distance(traj, traj, 1, (0.005, 0.01)) == 0.0

    def test_different_node_counts_resample_floor(self):
        a = short_run(n=64, family="segment")
        b = short_run(n=96, family="segment")
        d = ck_distance(a, b, 0, (0.005, 0.01))
        assert d <= (1.0 / 64) ** 2

    def test_monotone_in_k(self):
        a = short_run(eps=0.1)
        b = short_run(eps=0.05)
        window = (0.005, 0.01)
        dists = [ck_distance(a, b, k, window) for k in range(3)]
        assert dists[0] <= dists[1] <= dists[2]

    def test_window_mismatch_raises(self):
        a = short_run(t_end=0.01)
        b = short_run(t_end=0.005)
        with pytest.raises(WindowMismatch):
            ck_distance(a, b, 0, (0.004, 0.01))


class TestRunSweep:
    def test_segment_sweep_all_zero(self):
        base = FlowConfig(epsilon=0.1, n=64, dt=1e-3, t_end=0.01)
        cfg = SweepConfig(epsilons=(0.2, 0.1), base=base, delta=0.0, k_max=1)
        rep = run_sweep(make_initial_curve("segment", 64), cfg)
        assert np.all(rep.distances <= 1e-10)
        assert rep.fitted_order == [None, None]

    def test_distances_shrink_along_ladder(self):
        base = FlowConfig(epsilon=0.1, n=64, dt=2e-4, t_end=0.04)
        cfg = SweepConfig(
            epsilons=(0.2, 0.1, 0.05), base=base, delta=0.004, k_max=1
        )
        rep = run_sweep(
            make_initial_curve("flattened_sine", 64, amplitude=0.05), cfg
        )
        assert rep.failed_rows == []
        assert rep.monotone == [True, True]
        assert all(np.diff(rep.distances[:, 0]) < 0.0)
        assert np.all(rep.distances[:, 1] >= rep.distances[:, 0])
        assert rep.fitted_order[0] is not None and rep.fitted_order[0] > 0.0

    def test_initial_snapshot_shared_when_delta_zero(self):
        # all flows start from the same curve, so the t = dt distance is tiny
        base = FlowConfig(epsilon=0.1, n=64, dt=1e-3, t_end=0.01)
        cfg = SweepConfig(
            epsilons=(0.2, 0.1),
            base=base,
            delta=0.0,
            k_max=0,
            snapshot_times=(1e-3, 0.01),
        )
        rep = run_sweep(make_initial_curve("flattened_sine", 64, amplitude=0.02), cfg)
        assert np.all(rep.distances[:, 0] < 0.05)


class TestSingularityEstimate:
    def test_none_for_completed_run(self):
        traj = short_run(family="segment")
        assert singularity_time_estimate(traj) is None

    def test_estimate_for_loop_collapse(self):
        loop = make_initial_curve("arc_with_flat_ends", 128, turn_angle=2.6 * math.pi)
        cfg = FlowConfig(
            epsilon=0.0, n=128, dt=2.5e-5, t_end=0.02, kappa_blowup_threshold=40.0
        )
        traj = run(loop, cfg, snapshot_stride=10**9)
        t_sing = singularity_time_estimate(traj)
        assert t_sing is not None and 0.0 < t_sing < 0.02

    def test_estimate_stable_under_refinement(self):
        t_by_n = {}
        for n, dt in ((128, 2.5e-5), (256, 2.5e-5)):
            loop = make_initial_curve(
                "arc_with_flat_ends", n, turn_angle=2.6 * math.pi
            )
            cfg = FlowConfig(
                epsilon=0.0, n=n, dt=dt, t_end=0.02, kappa_blowup_threshold=40.0
            )
            traj = run(loop, cfg, snapshot_stride=10**9)
            t_by_n[n] = singularity_time_estimate(traj)
        assert t_by_n[128] is not None and t_by_n[256] is not None
        assert abs(t_by_n[128] - t_by_n[256]) <= 0.1 * t_by_n[128]


class TestSweepInfrastructure:
    def test_rows_share_the_identical_initial_state(self):
        # every flow starts from one curve: the t = 0 snapshots coincide
        curve = make_initial_curve("flattened_sine", 64, amplitude=0.05)
        states = []
        for eps in (0.2, 0.1):
            cfg = FlowConfig(epsilon=eps, n=64, dt=1e-3, t_end=0.005)
            states.append(run(curve, cfg).states[0])
        assert np.max(np.abs(states[0].curve.nodes - states[1].curve.nodes)) <= 1e-12

    def test_thread_cap_env_var(self, monkeypatch):
        base = FlowConfig(epsilon=0.1, n=64, dt=1e-3, t_end=0.005)
        cfg = SweepConfig(epsilons=(0.2, 0.1), base=base, delta=0.0, k_max=0)
        curve = make_initial_curve("flattened_sine", 64, amplitude=0.05)
        monkeypatch.setenv("ELASTIC_FLOW_THREADS", "1")
        rep_serial = run_sweep(curve, cfg)
        monkeypatch.setenv("ELASTIC_FLOW_THREADS", "3")
        rep_pool = run_sweep(curve, cfg)
        assert np.array_equal(rep_serial.distances, rep_pool.distances)


def test_ck_distance_between_regularized_and_limit_flow():
    # no closed form exists; the measurement must be positive and finite
    curve = make_initial_curve("flattened_sine", 64, amplitude=0.05)
    runs = {}
    for eps in (0.1, 0.0):
        cfg = FlowConfig(epsilon=eps, n=64, dt=2e-4, t_end=0.04)
        runs[eps] = run(curve, cfg, snapshot_times=[0.02, 0.03, 0.04])
    d = ck_distance(runs[0.1], runs[0.0], 0, (0.02, 0.04))
    assert math.isfinite(d) and d > 0.0
