import math

import numpy as np
import pytest

from elastic_flow import BadExponent, DiscreteCurve, compute_geometry, make_initial_curve
from elastic_flow.estimates import (
    boundary_residuals,
    calibrate_comparison_constant,
    calibrate_gn_general,
    calibrate_gn_specialized,
    comparison_check,
    curvature_growth_rate,
    dissipation_residual,
    energy,
    gn_check,
    gn_corpus,
    gn_specialized_u4,
    gn_specialized_u6,
    random_curve,
    random_field,
)
from elastic_flow.flow import FlowConfig, FlowState, run
from elastic_flow.gronwall import GronwallSetup


def closed_circle_state(n, r, eps):
    th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    curve = DiscreteCurve(np.column_stack([r * np.cos(th), r * np.sin(th)]), closed=True)
    return FlowState.from_curve(curve, eps)


def unit_speed_cache(length=1.0, n=128):
    s = np.linspace(0.0, length, n + 1)
    return compute_geometry(DiscreteCurve(np.column_stack([s, np.zeros_like(s)])))


class TestEnergy:
    def test_segment_energy_equals_length(self):
        st = FlowState.from_curve(make_initial_curve("segment", 64), 0.7)
        assert energy(st) == pytest.approx(1.0, abs=1e-15)

    def test_circle_energy_value(self):
        # 2 pi r + eps (1/r^2)(2 pi r) with r = 2, eps = 1/4
        st = closed_circle_state(256, 2.0, 0.25)
        expected = 4.0 * math.pi + 0.25 * math.pi
        h = 4.0 * math.pi / 256
        assert energy(st) == pytest.approx(expected, abs=h**2)

    def test_eps_zero_energy_is_length(self):
        st = FlowState.from_curve(
            make_initial_curve("flattened_sine", 64, amplitude=0.2), 0.0
        )
        assert energy(st) == pytest.approx(st.cache.total_length, abs=1e-12)


class TestDissipation:
    def test_stationary_segment_residual_vanishes(self):
        traj = run(
            make_initial_curve("segment", 64),
            FlowConfig(epsilon=0.1, n=64, dt=1e-3, t_end=5e-3),
        )
        assert dissipation_residual(traj, 2) < 1e-12

    def test_residual_refines_with_dt(self):
        fs = make_initial_curve("flattened_sine", 128, amplitude=0.05)
        t_star = 0.05
        res = []
        for dt in (1e-4, 5e-5):
            traj = run(fs, FlowConfig(epsilon=0.1, n=128, dt=dt, t_end=t_star + 2 * dt))
            res.append(dissipation_residual(traj, round(t_star / dt)))
        assert math.log2(res[0] / res[1]) >= 0.9

    def test_eps_zero_length_dissipation(self):
        # d(length)/dt = -int kappa^2 when eps = 0
        fs = make_initial_curve("flattened_sine", 128, amplitude=0.05)
        traj = run(fs, FlowConfig(epsilon=0.0, n=128, dt=1e-4, t_end=0.02))
        k = 100
        recs = traj.diagnostics
        dldt = (recs[k + 1].length - recs[k - 1].length) / (2e-4)
        assert abs(dldt + recs[k].kappa_l2_sq[0]) < 1e-4


class TestBoundaryResiduals:
    def test_compatible_initial_data_j0(self):
        cache = compute_geometry(make_initial_curve("flattened_sine", 128, amplitude=0.1))
        res = boundary_residuals(cache)
        assert res[0].max() <= 1e-8

    def test_j2_refines_under_doubling(self):
        vals = {}
        for n, dt in ((128, 1e-4), (256, 2.5e-5)):
            fs = make_initial_curve("flattened_sine", n, amplitude=0.05)
            traj = run(fs, FlowConfig(epsilon=0.1, n=n, dt=dt, t_end=0.05))
            vals[n] = boundary_residuals(traj.states[-1])
        ratios = vals[128][1] / vals[256][1]
        assert np.all(ratios >= 3.0)

    def test_j4_stays_bounded_under_doubling(self):
        vals = {}
        for n, dt in ((128, 1e-4), (256, 2.5e-5)):
            fs = make_initial_curve("flattened_sine", n, amplitude=0.05)
            traj = run(fs, FlowConfig(epsilon=0.1, n=n, dt=dt, t_end=0.05))
            vals[n] = boundary_residuals(traj.states[-1])
        assert np.all(vals[256][2] <= vals[128][2])


class TestGNInequalities:
    def test_zero_field_slack_zero(self):
        cache = unit_speed_cache()
        u = np.zeros(129)
        assert gn_check(cache, u, 0, 1, 4, 1.0, 1.0) == 0.0
        assert gn_specialized_u4(cache, u, 1.0) == 0.0
        assert gn_specialized_u6(cache, u, 1.0) == 0.0

    def test_constant_field_needs_b_at_least_one(self):
        # L = 1, u = 1: LHS = 1 and only the B-term survives
        cache = unit_speed_cache(length=1.0)
        u = np.ones(129)
        assert gn_check(cache, u, 0, 1, 4, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)
        assert gn_check(cache, u, 0, 1, 4, 1.0, 1.2) > 0.0
        assert gn_check(cache, u, 0, 1, 4, 1.0, 0.8) < 0.0

    def test_constant_field_u4_holds_for_c_at_least_one(self):
        cache = unit_speed_cache(length=1.0)
        for c in (0.5, 1.5, 3.0):
            u = np.full(129, c)
            # int u^4 = c^4 vs C (c^6 + c^4): C = 1 suffices
            assert gn_specialized_u4(cache, u, 1.0) >= -1e-12

    def test_sine_u6_with_unit_constant(self):
        cache = unit_speed_cache(length=1.0)
        u = np.sin(2.0 * np.pi * cache.s)
        # the second-derivative term alone dominates int u^6
        assert gn_specialized_u6(cache, u, 1.0) > 0.0

    def test_bad_exponent(self):
        cache = unit_speed_cache()
        u = np.ones(129)
        with pytest.raises(BadExponent):
            gn_check(cache, u, 1, 1, 4, 1.0, 1.0)
        with pytest.raises(BadExponent):
            gn_check(cache, u, 0, 1, 1.5, 1.0, 1.0)

    def test_calibrated_constants_hold_on_fresh_samples(self):
        corpus = gn_corpus(seed=11, count=200)
        c4 = 2.0 * calibrate_gn_specialized(corpus, "u4")
        c6 = 2.0 * calibrate_gn_specialized(corpus, "u6")
        cg = 2.0 * calibrate_gn_general(corpus, 0, 1, 4)
        rng = np.random.default_rng(12)
        for _ in range(300):
            cache = compute_geometry(random_curve(rng, 96))
            u = random_field(rng, 96)
            assert gn_specialized_u4(cache, u, c4) >= 0.0
            assert gn_specialized_u6(cache, u, c6) >= 0.0
            assert gn_check(cache, u, 0, 1, 4, cg, cg) >= 0.0

    def test_evolved_curvature_satisfies_u4(self):
        corpus = gn_corpus(seed=11, count=200)
        c4 = 2.0 * calibrate_gn_specialized(corpus, "u4")
        fs = make_initial_curve("flattened_sine", 128, amplitude=0.05)
        traj = run(fs, FlowConfig(epsilon=0.1, n=128, dt=1e-4, t_end=0.02))
        st = traj.states[-1]
        assert gn_specialized_u4(st.cache, st.cache.kappa, c4) >= 0.0


class TestComparison:
    def test_stationary_segment_always_below_majorant(self):
        traj = run(
            make_initial_curve("segment", 64),
            FlowConfig(epsilon=0.1, n=64, dt=1e-3, t_end=0.01),
        )
        setup = GronwallSetup(g0=1e-6, coeff_C=1.0, t_max_query=0.01)
        ok, margin = comparison_check(traj, setup)
        assert ok and margin >= 0.0

    def test_benchmark_run_with_calibrated_constant(self):
        coeff = 2.0 * calibrate_comparison_constant(seed=5, count=200)
        fs = make_initial_curve("flattened_sine", 128, amplitude=0.05)
        traj = run(fs, FlowConfig(epsilon=0.1, n=128, dt=1e-4, t_end=0.05))
        g0 = traj.diagnostics[0].kappa_l2_sq[0]
        setup = GronwallSetup(g0=g0, coeff_C=coeff, t_max_query=0.05)
        ok, margin = comparison_check(traj, setup)
        assert ok and margin > 0.0

    def test_flat_majorant_fails_when_curvature_grows(self):
        # strong hook: int kappa^4 beats the gradient term initially, so
        # int kappa^2 grows and a constant majorant must be violated
        hook = make_initial_curve("arc_with_flat_ends", 128, turn_angle=2.2 * math.pi)
        traj = run(
            hook,
            FlowConfig(
                epsilon=0.0, n=128, dt=2.5e-5, t_end=2.5e-3, kappa_blowup_threshold=1e9
            ),
        )
        g0 = traj.diagnostics[0].kappa_l2_sq[0]
        measured = np.array([r.kappa_l2_sq[0] for r in traj.diagnostics])
        assert measured.max() > g0  # the premise of the negative control
        setup = GronwallSetup(g0=g0, coeff_C=0.0, t_max_query=2.5e-3)
        ok, margin = comparison_check(traj, setup)
        assert not ok and margin < 0.0

    def test_growth_rate_matches_finite_difference(self):
        # oracle: difference the measured int kappa^2 along a short run
        dt = 5e-5
        fs = make_initial_curve("flattened_sine", 128, amplitude=0.05)
        traj = run(
            fs,
            FlowConfig(epsilon=0.1, n=128, dt=dt, t_end=0.02),
            snapshot_times=[0.01],
        )
        k = round(0.01 / dt)
        recs = traj.diagnostics
        measured = (recs[k + 1].kappa_l2_sq[0] - recs[k - 1].kappa_l2_sq[0]) / (2 * dt)
        predicted = curvature_growth_rate(traj.state_at(0.01).cache, 0.1)
        assert abs(measured - predicted) <= 5e-3 * max(1.0, abs(predicted))


class TestUniformVelocityBounds:
    def test_common_bound_across_epsilon_ladder(self):
        fs = make_initial_curve("flattened_sine", 64, amplitude=0.05)
        sups_E, sups_lam = [], []
        for eps in (0.1, 0.05, 0.025, 0.0125):
            traj = run(fs, FlowConfig(epsilon=eps, n=64, dt=1e-4, t_end=0.02))
            sups_E.append(max(r.max_abs_E for r in traj.diagnostics))
            sups_lam.append(max(r.max_abs_lambda for r in traj.diagnostics))
        assert max(sups_E) <= 10.0 * max(sups_E[0], 1e-6)
        assert max(sups_lam) <= 10.0 * max(sups_lam[0], 1e-6)
