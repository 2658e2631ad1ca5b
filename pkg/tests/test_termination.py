"""Tests for the rho accumulator and both termination criteria."""

import math

import numpy as np
import pytest

from geonuts.harmonic import eigenfrequencies
from geonuts.integrators import IntegratorConfig, integrate_trajectory
from geonuts.metrics import EuclideanMetric, MetricAt
from geonuts.phase import PhasePoint
from geonuts.targets import GaussianTarget
from geonuts.termination import (
    CriterionReport,
    RhoAccumulator,
    check_subtree_merge,
    classic_value,
    generalized_value,
    transient_guard,
)

SHO = GaussianTarget(np.array([[1.0]]))
M1 = EuclideanMetric.identity(1)


class TestRhoAccumulator:
    def test_single_sample(self):
        acc = RhoAccumulator.empty(2).accumulate([1.0, 2.0], 0.1)
        assert np.allclose(acc.momentum_sum, [1.0, 2.0])
        assert acc.elapsed == pytest.approx(0.1)
        assert acc.count == 1

    def test_cancellation(self):
        acc = RhoAccumulator.empty(2)
        acc = acc.accumulate([1.0, -3.0], 0.1).accumulate([-1.0, 3.0], 0.1)
        assert np.allclose(acc.momentum_sum, 0.0)
        assert acc.count == 2

    def test_uniform_dt_enforced(self):
        acc = RhoAccumulator.empty(1).accumulate([1.0], 0.1)
        with pytest.raises(ValueError):
            acc.accumulate([1.0], 0.2)
        with pytest.raises(ValueError):
            RhoAccumulator.empty(1).accumulate([1.0], 0.0)

    def test_merge_adds_and_checks_dt(self):
        a = RhoAccumulator.empty(1).accumulate([1.0], 0.1)
        b = RhoAccumulator.empty(1).accumulate([2.0], 0.1).accumulate([3.0], 0.1)
        merged = a.merge(b)
        assert merged.count == 3
        assert merged.momentum_sum[0] == pytest.approx(6.0)
        assert merged.elapsed == pytest.approx(0.3)
        c = RhoAccumulator.empty(1).accumulate([1.0], 0.5)
        with pytest.raises(ValueError):
            a.merge(c)
        assert RhoAccumulator.empty(1).merge(a).count == 1

    def test_mean_of_empty_errors(self):
        with pytest.raises(ValueError):
            RhoAccumulator.empty(2).mean_momentum()

    def test_sho_average_matches_closed_form_integral(self):
        # p(t) = -sin t from (1, 0); the time average is (cos t - 1)/t
        dt = 0.001
        acc = RhoAccumulator.empty(1)
        n = math.ceil(math.pi / dt)
        for k in range(1, n + 1):
            acc = acc.accumulate([-math.sin(k * dt)], dt)
        t = n * dt
        assert abs(acc.mean_momentum()[0] - (math.cos(t) - 1.0) / t) < 1e-3


class TestClassicValue:
    def test_zero_displacement(self):
        assert classic_value([3.0, -1.0], [2.0, 2.0], [2.0, 2.0]) == 0.0

    def test_sho_quarter_period(self):
        # q(t) = cos t, p(t) = -sin t from (1, 0); at t = pi/2 the value is
        # (-1) * (0 - 1) = 1
        assert classic_value([-1.0], [0.0], [1.0]) == pytest.approx(1.0)

    def test_sho_first_sign_change_at_half_period(self):
        ts = np.linspace(1e-3, 2 * math.pi, 20_000)
        values = np.array([classic_value([-math.sin(t)], [math.cos(t)], [1.0]) for t in ts])
        first = ts[np.argmax(values < 0)]
        assert first == pytest.approx(math.pi, abs=1e-3)


class TestGeneralizedValue:
    def test_sho_quarter_period_value(self):
        # exact rho at t = pi/2 is -2/pi, so the value is (-1) * (-2/pi)
        dt = 0.001
        acc = RhoAccumulator.empty(1)
        n = math.ceil((math.pi / 2) / dt)
        for k in range(1, n + 1):
            acc = acc.accumulate([-math.sin(k * dt)], dt)
        m_at = M1.at([0.0])
        assert generalized_value([-1.0], acc, m_at) == pytest.approx(2.0 / math.pi, abs=1e-3)

    def test_rho_parallel_to_p_is_positive(self):
        rng = np.random.default_rng(0)
        m_at = EuclideanMetric(GaussianTarget.from_correlation(0.95).precision).at([0.0, 0.0])
        for _ in range(20):
            p = rng.normal(size=2)
            acc = RhoAccumulator.empty(2).accumulate(p, 0.1).accumulate(2.0 * p, 0.1)
            assert generalized_value(p, acc, m_at) > 0.0

    def test_empty_accumulator_errors(self):
        with pytest.raises(ValueError):
            generalized_value([1.0], RhoAccumulator.empty(1), M1.at([0.0]))

    def test_metric_scale_equivariance(self):
        base = M1.at([0.0])
        scaled = MetricAt(
            q=base.q,
            eigenvalues=base.eigenvalues,
            eigenvectors=base.eigenvectors,
            metric_eigenvalues=base.metric_eigenvalues / 3.0,
            inverse_metric=3.0 * base.inverse_metric,
            log_det_inverse_metric=base.log_det_inverse_metric + math.log(3.0),
            includes_log_det=base.includes_log_det,
        )
        acc = RhoAccumulator.empty(1).accumulate([-0.4], 0.1)
        v1 = generalized_value([2.0], acc, base)
        v3 = generalized_value([2.0], acc, scaled)
        assert v3 == pytest.approx(3.0 * v1, rel=1e-14)
        assert (v1 < 0) == (v3 < 0)


class TestTrajectoryLevelBehavior:
    def test_positive_at_first_recorded_step(self):
        cfg = IntegratorConfig(step_size=0.01)
        rng = np.random.default_rng(4)
        for _ in range(5):
            p0 = rng.normal(size=1)
            tr = integrate_trajectory(PhasePoint([1.0], p0), 3, SHO, M1, cfg)
            assert tr.entries[1].criterion_generalized > 0.0

    @pytest.mark.parametrize("eps", [0.01, 0.001])
    def test_first_zero_in_interval_containing_pi(self, eps):
        cfg = IntegratorConfig(step_size=eps)
        n = int(4.0 / eps)
        tr = integrate_trajectory(PhasePoint([1.0], [0.0]), n, SHO, M1, cfg)
        k = tr.first_fired_step("generalized", 0)
        assert k is not None
        assert (k - 1) * eps <= math.pi <= k * eps

    def test_euclidean_reduction_identity_mass(self):
        # Launch with mode-orthogonal displacement components (slow mode from
        # rest, fast mode through center) in a window short of the first
        # phase-space recurrence; see test_acceptance for the full version.
        gt = GaussianTarget.from_correlation(0.95)
        metric = EuclideanMetric.identity(2)
        modes = eigenfrequencies(np.eye(2), gt.precision)
        q0 = modes.mode_matrix_contra[:, 0]
        p0 = 0.3 * modes.mode_matrix[:, 1]
        self._assert_reduction(gt, metric, q0, p0, eps=0.0025, n=1000)

    def test_euclidean_reduction_precision_mass(self):
        gt = GaussianTarget.from_correlation(0.95)
        metric = EuclideanMetric(gt.precision)
        rng = np.random.default_rng(7)
        from geonuts.metrics import sample_momentum

        q0 = np.array([1.0, 1.0])
        p0 = sample_momentum(metric.at(q0), rng)
        self._assert_reduction(gt, metric, q0, p0, eps=0.1, n=1000)

    @staticmethod
    def _assert_reduction(target, metric, q0, p0, eps, n):
        cfg = IntegratorConfig(step_size=eps)
        tr = integrate_trajectory(PhasePoint(q0, p0), n, target, metric, cfg)
        running = np.zeros_like(q0)
        for k in range(1, len(tr.entries)):
            e = tr.entries[k]
            running = running + e.state.p
            rho = running / k
            diff = abs(e.criterion_generalized - e.criterion_classic / (k * eps))
            bound = 5.0 * eps * np.linalg.norm(e.state.p) * np.linalg.norm(rho)
            assert diff <= bound, f"reduction mismatch at step {k}: {diff} > {bound}"

    def test_coherent_phase_prediction(self):
        # From rest along each eigenvector, the classic criterion's first zero
        # sits at the mode's half period pi/omega.
        gt = GaussianTarget.from_correlation(0.95)
        metric = EuclideanMetric.identity(2)
        modes = eigenfrequencies(np.eye(2), gt.precision)
        eps = 1e-3
        cfg = IntegratorConfig(step_size=eps)
        for j in range(2):
            omega = modes.omega[j]
            predicted = math.pi / omega
            n = int(1.3 * predicted / eps)
            tr = integrate_trajectory(
                PhasePoint(modes.mode_matrix_contra[:, j], [0.0, 0.0]), n, gt, metric, cfg
            )
            k = tr.first_fired_step("classic", 0)
            assert k is not None
            assert abs(k * eps - predicted) / predicted < 0.02


class TestCheckSubtreeMerge:
    def _ends(self, t):
        # closed-form SHO states from (1, 0): q = cos t, p = -sin t
        state = PhasePoint([math.cos(t)], [-math.sin(t)])
        return (state, M1.at(state.q))

    def test_straddling_span_does_not_fire(self):
        t1, t2 = math.pi / 2 - 0.3, math.pi / 2 + 0.3
        acc = RhoAccumulator.empty(1)
        acc = acc.accumulate([-math.sin(t1)], 0.1).accumulate([-math.sin(t2)], 0.1)
        assert not check_subtree_merge(self._ends(t2), self._ends(t1), acc, expected_count=2)

    def test_span_past_half_period_fires(self):
        # rho stays slightly positive but the earliest momentum opposes it
        t1, t2 = 0.2, 3.4
        acc = RhoAccumulator.empty(1)
        acc = acc.accumulate([-math.sin(t1)], 0.1).accumulate([-math.sin(t2)], 0.1)
        assert check_subtree_merge(self._ends(t2), self._ends(t1), acc, expected_count=2)

    def test_single_leaf_never_fires(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            p = rng.normal(size=1)
            if not np.any(p):
                continue
            state = PhasePoint([0.7], p)
            acc = RhoAccumulator.empty(1).accumulate(p, 0.1)
            assert not check_subtree_merge((state, M1.at(state.q)), (state, M1.at(state.q)), acc, 1)

    def test_count_mismatch_errors(self):
        acc = RhoAccumulator.empty(1).accumulate([1.0], 0.1)
        with pytest.raises(ValueError):
            check_subtree_merge(self._ends(0.1), self._ends(0.0), acc, expected_count=2)


def test_transient_guard_formula():
    assert transient_guard(10) == 3
    assert transient_guard(100) == 5
    assert transient_guard(2000) == 100
    assert transient_guard(100, floor=20) == 20


def test_criterion_report_strict_sign():
    r = CriterionReport.from_values(0.0, -1e-300)
    assert not r.fired_classic
    assert r.fired_generalized
