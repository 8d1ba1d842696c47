import numpy as np
import pytest

from bellselftest import hardy
from bellselftest.hardy import (
    TiltedHardyTest,
    canonical_realization,
    check_conditions,
    q_of_w,
    target_state,
    theta_of_w,
    w_of_theta,
)
from bellselftest.qmath import schmidt
from bellselftest.scenario import CHSH_SHAPE, behavior_of, observed, source_independent


class TestClosedForms:
    def test_q_endpoints(self):
        assert q_of_w(-0.25) == 0.0
        assert q_of_w(1.0) == 1.0

    def test_q_at_zero(self):
        assert q_of_w(0.0) == pytest.approx((5 * np.sqrt(5) - 11) / 2, abs=1e-15)

    def test_q_range(self):
        for w in np.linspace(-0.25, 1.0, 101):
            assert -1e-12 <= q_of_w(w) <= 1.0 + 1e-12

    def test_q_domain(self):
        with pytest.raises(ValueError):
            q_of_w(-0.3)
        with pytest.raises(ValueError):
            q_of_w(1.1)

    def test_theta_endpoints(self):
        assert theta_of_w(-0.25) == pytest.approx(np.pi / 4, abs=1e-12)
        assert theta_of_w(1.0) == pytest.approx(0.0, abs=1e-12)

    def test_theta_at_zero(self):
        th = theta_of_w(0.0)
        assert th == pytest.approx(0.4346923437, abs=1e-9)
        assert np.sin(2 * th) == pytest.approx(3 - np.sqrt(5), abs=1e-12)

    def test_w_of_theta_endpoints(self):
        assert w_of_theta(np.pi / 4) == pytest.approx(-0.25, abs=1e-12)
        assert w_of_theta(0.0) == pytest.approx(1.0, abs=1e-12)

    def test_round_trip_grid(self):
        for w in np.linspace(-0.25, 1.0, 1000):
            assert w_of_theta(theta_of_w(w)) == pytest.approx(w, abs=1e-12)

    def test_defining_relation(self):
        for w in np.linspace(-0.24, 0.99, 50):
            th = theta_of_w(w)
            assert (np.sin(2 * th) - 3) ** 2 == pytest.approx(4 * w + 5, abs=1e-12)


class TestTargetState:
    def test_near_maximal_limit(self):
        st = target_state(-0.2499999)
        assert np.allclose(np.abs(st.amplitudes[[0, 3]]), 1 / np.sqrt(2), atol=1e-3)

    def test_near_product_limit(self):
        st = target_state(0.9999999)
        assert abs(st.amplitudes[0]) == pytest.approx(1.0, abs=1e-3)

    def test_schmidt_coefficients(self):
        st = target_state(0.0)
        th = theta_of_w(0.0)
        dec = schmidt(st)
        assert np.allclose(dec.coefficients, [np.cos(th), np.sin(th)], atol=1e-12)


class TestTiltedHardyTest:
    def test_invariants(self):
        t = TiltedHardyTest.for_w(0.3)
        assert (np.sin(2 * t.theta) - 3) ** 2 == pytest.approx(4 * t.w + 5, abs=1e-12)
        assert t.q_value == pytest.approx(q_of_w(0.3), abs=1e-15)

    def test_domain(self):
        with pytest.raises(ValueError):
            TiltedHardyTest.for_w(-0.25)  # open interval for tests


class TestCanonicalRealization:
    @pytest.mark.parametrize("w", [0.0, 0.5])
    def test_zeros_and_value(self, w):
        r = canonical_realization(w)
        beh = behavior_of(r)
        for (a, b, x, y) in hardy.ZERO_TRIPLES:
            assert abs(beh.tensor[0, 0, a, b, x, y]) < 1e-9
        value = beh.tensor[0, 0, 0, 0, 0, 0] + w * beh.tensor[0, 0, 1, 1, 0, 0]
        assert value == pytest.approx(q_of_w(w), abs=1e-7)

    @pytest.mark.parametrize("w", [-0.2, 0.1, 0.75])
    def test_schmidt_angle_matches(self, w):
        r = canonical_realization(w)
        rho = r.cq.states[(0, 0)]
        vals, vecs = np.linalg.eigh(rho)
        psi = vecs[:, -1]
        sv = np.linalg.svd(psi.reshape(2, 2), compute_uv=False)
        assert np.arctan2(sv[1], sv[0]) == pytest.approx(theta_of_w(w), abs=1e-6)

    def test_domain(self):
        with pytest.raises(ValueError):
            canonical_realization(1.0)


class TestCheckConditions:
    def test_pass_on_source_independent_lift(self):
        can = canonical_realization(0.0)
        lifted = source_independent(CHSH_SHAPE, (2, 2), can.cq.states[(0, 0)],
                                    can.alice, can.bob)
        obs = observed(behavior_of(lifted))
        rep = check_conditions(obs, (0, 0), TiltedHardyTest.for_w(0.0), tol=1e-7)
        assert rep.passed
        assert max(rep.zero_residuals) < 1e-9

    def test_fail_on_zero_perturbation(self):
        can = canonical_realization(0.0)
        lifted = source_independent(CHSH_SHAPE, (2, 2), can.cq.states[(0, 0)],
                                    can.alice, can.bob)
        obs = observed(behavior_of(lifted))
        table = obs.table.copy()
        table[0, 1, 0, 1] = 0.01  # p(0101|01) must vanish
        from bellselftest.scenario import ObservedBehavior
        rep = check_conditions(ObservedBehavior(shape=obs.shape, table=table),
                               (0, 0), TiltedHardyTest.for_w(0.0), tol=1e-7)
        assert not rep.passed
        assert rep.zero_residuals[0] == pytest.approx(0.01, abs=1e-12)

    def test_fail_on_deflated_violation(self):
        can = canonical_realization(0.0)
        lifted = source_independent(CHSH_SHAPE, (2, 2), can.cq.states[(0, 0)],
                                    can.alice, can.bob)
        obs = observed(behavior_of(lifted))
        table = obs.table.copy()
        table[0, 0, 0, 0] *= 0.9
        from bellselftest.scenario import ObservedBehavior
        rep = check_conditions(ObservedBehavior(shape=obs.shape, table=table),
                               (0, 0), TiltedHardyTest.for_w(0.0), tol=1e-7)
        assert not rep.passed
        assert rep.violation_residual > 1e-4

    def test_single_source_behavior_input(self):
        r = canonical_realization(0.25)
        rep = check_conditions(behavior_of(r), (0, 0), TiltedHardyTest.for_w(0.25),
                               tol=1e-7)
        assert rep.passed

    def test_report_json(self):
        r = canonical_realization(0.5)
        rep = check_conditions(behavior_of(r), (0, 0), TiltedHardyTest.for_w(0.5))
        obj = rep.to_json()
        assert set(obj) == {"w", "qValue", "zeroResiduals", "violationResidual", "pass"}


class TestSandwich:
    def test_canonical_value_between_formula_and_level2(self):
        from bellselftest.npa import moments
        from bellselftest.scenario import SINGLE_SOURCE_CHSH_SHAPE
        rng = np.random.default_rng(3)
        grid = np.linspace(-0.23, 0.97, 20)
        for w in grid:
            val, theta, t1 = hardy.maximize_tilted(w, restarts=12, seed=5)
            assert val >= q_of_w(w) - 1e-6
        # level-2 upper bound dominates the achieved value on a subgrid
        for w in [grid[2], grid[10], grid[17]]:
            basis = moments.MomentBasis(SINGLE_SOURCE_CHSH_SHAPE, 2)
            bound, _ = moments.max_value(
                SINGLE_SOURCE_CHSH_SHAPE, 2,
                moments.tilted_hardy_objective(basis, w),
                zeros=moments.hardy_zero_events(SINGLE_SOURCE_CHSH_SHAPE),
                weights={(0, 0): 1.0})
            val, _, _ = hardy.maximize_tilted(w, restarts=8, seed=5)
            assert val <= bound + 1e-6
