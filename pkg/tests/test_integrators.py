"""Tests for the explicit and implicit leapfrog integrators."""

import numpy as np
import pytest

from geonuts.integrators import (
    DivergenceError,
    IntegratorConfig,
    generalized_leapfrog_step,
    hamiltonian,
    integrate_trajectory,
    leapfrog_step,
    step_with_metric,
)
from geonuts.metrics import EuclideanMetric, SoftAbsMetric
from geonuts.phase import PhasePoint
from geonuts.targets import BananaTarget, GaussianTarget
from helpers import FreeParticle, measure_period

SHO = GaussianTarget(np.array([[1.0]]))
M1 = EuclideanMetric.identity(1)


def _run(state, n, step_fn):
    for _ in range(n):
        state = step_fn(state)
    return state


class TestLeapfrogStep:
    def test_hand_arithmetic_on_sho(self):
        # p_half = -0.05, q' = 1 + 0.1 * (-0.05), p' = p_half - 0.05 * q'
        out = leapfrog_step(PhasePoint([1.0], [0.0]), SHO, M1, 0.1)
        assert out.q[0] == pytest.approx(0.995, abs=0.0)
        assert out.p[0] == pytest.approx(-0.09975, abs=0.0)

    def test_free_particle_drifts(self):
        fp = FreeParticle(2)
        m = EuclideanMetric(np.diag([2.0, 0.5]))
        state = PhasePoint([0.0, 1.0], [2.0, -1.0])
        out = leapfrog_step(state, fp, m, 0.3)
        assert np.allclose(out.q, state.q + 0.3 * m.mass_inv @ state.p)
        assert np.allclose(out.p, state.p)

    def test_reversibility(self):
        gt = GaussianTarget.from_correlation(0.95)
        m = EuclideanMetric.identity(2)
        start = PhasePoint([1.0, -0.5], [0.3, 0.8])
        fwd = _run(start, 100, lambda s: leapfrog_step(s, gt, m, 0.1))
        back = _run(fwd.negate_momentum(), 100, lambda s: leapfrog_step(s, gt, m, 0.1))
        back = back.negate_momentum()
        assert np.abs(back.q - start.q).max() < 1e-10
        assert np.abs(back.p - start.p).max() < 1e-10

    def test_one_step_map_has_unit_determinant(self):
        # the SHO step is linear, so columns of the map are steps of basis states
        eps = 0.17
        cols = []
        for q0, p0 in [(1.0, 0.0), (0.0, 1.0)]:
            out = leapfrog_step(PhasePoint([q0], [p0]), SHO, M1, eps)
            cols.append([out.q[0], out.p[0]])
        jac = np.array(cols).T
        assert abs(np.linalg.det(jac) - 1.0) < 1e-12

    def test_divergence_on_nonfinite(self):
        with np.errstate(over="ignore"), pytest.raises(DivergenceError):
            leapfrog_step(PhasePoint([1.0], [1e308]), SHO, M1, 1e300)


class TestGeneralizedLeapfrogStep:
    def test_constant_metric_matches_explicit(self):
        # Gaussian Hessian is constant, so Lambda is constant and the implicit
        # equations collapse onto explicit leapfrog with M = Lambda^{-1}.
        gt = GaussianTarget.from_correlation(0.95)
        soft = SoftAbsMetric(gt, alpha=1.0)
        mass = np.linalg.inv(soft.at(np.zeros(2)).inverse_metric)
        explicit_metric = EuclideanMetric(mass)
        cfg = IntegratorConfig(step_size=0.05)
        state = PhasePoint([1.0, 0.5], [0.3, -0.8])
        for _ in range(20):
            a = generalized_leapfrog_step(state, gt, soft, cfg)
            b = leapfrog_step(state, gt, explicit_metric, 0.05)
            assert np.abs(a.q - b.q).max() < 1e-12
            assert np.abs(a.p - b.p).max() < 1e-12
            state = a

    def test_reversibility_on_banana(self):
        b = BananaTarget()
        soft = SoftAbsMetric(b, alpha=1.0)
        cfg = IntegratorConfig(step_size=0.01, fixed_point_tol=1e-10)
        rng = np.random.default_rng(2)
        from geonuts.metrics import sample_momentum

        start = PhasePoint([0.0, 3.0], sample_momentum(soft.at([0.0, 3.0]), rng))
        fwd = _run(start, 100, lambda s: generalized_leapfrog_step(s, b, soft, cfg))
        back = _run(fwd.negate_momentum(), 100, lambda s: generalized_leapfrog_step(s, b, soft, cfg))
        back = back.negate_momentum()
        assert np.abs(back.q - start.q).max() < 1e-8
        assert np.abs(back.p - start.p).max() < 1e-8

    def test_nonconvergent_solve_raises(self):
        b = BananaTarget()
        soft = SoftAbsMetric(b, alpha=1.0)
        cfg = IntegratorConfig(step_size=5.0, fixed_point_tol=1e-16, fixed_point_max_iters=2)
        state = PhasePoint([0.0, 3.0], [50.0, 1.0])
        with pytest.raises(DivergenceError):
            generalized_leapfrog_step(state, b, soft, cfg)


@pytest.mark.parametrize("eps", [0.1, 0.05])
def test_energy_drift_is_second_order_euclidean(eps):
    # max|dH| over a fixed time span should drop ~4x when eps halves
    gt = GaussianTarget.from_correlation(0.95)
    m = EuclideanMetric.identity(2)
    span = 40.0
    start = PhasePoint([1.0, -0.5], [0.4, 0.7])

    def max_dh(step):
        n = int(round(span / step))
        h0 = hamiltonian(gt, m, start)
        state = start
        worst = 0.0
        for _ in range(n):
            state = leapfrog_step(state, gt, m, step)
            worst = max(worst, abs(hamiltonian(gt, m, state) - h0))
        return worst

    ratio = max_dh(eps) / max_dh(eps / 2)
    assert 3.5 <= ratio <= 4.5


def test_energy_drift_is_second_order_softabs():
    b = BananaTarget()
    soft = SoftAbsMetric(b, alpha=1.0)
    rng = np.random.default_rng(5)
    from geonuts.metrics import kinetic_energy, sample_momentum

    q0 = np.array([0.0, 3.0])
    p0 = sample_momentum(soft.at(q0), rng)
    start = PhasePoint(q0, p0)

    def max_dh(step):
        cfg = IntegratorConfig(step_size=step, fixed_point_tol=1e-12)
        h0 = b.potential(start.q) + kinetic_energy(soft.at(start.q), start.p)
        state, geom, worst = start, None, 0.0
        for _ in range(int(round(10.0 / step))):
            state, m_at, geom = step_with_metric(state, b, soft, cfg, step, geom)
            worst = max(worst, abs(b.potential(state.q) + kinetic_energy(m_at, state.p) - h0))
        return worst

    ratio = max_dh(0.02) / max_dh(0.01)
    assert 3.5 <= ratio <= 4.5


class TestIntegrateTrajectory:
    def test_zero_steps_gives_single_entry(self):
        cfg = IntegratorConfig(step_size=0.1)
        tr = integrate_trajectory(PhasePoint([1.0], [0.0]), 0, SHO, M1, cfg)
        assert len(tr) == 1
        assert tr.entries[0].t == 0.0
        assert tr.terminated_at is None

    def test_sho_period_via_zero_crossings(self):
        cfg = IntegratorConfig(step_size=0.001)
        tr = integrate_trajectory(PhasePoint([1.0], [0.0]), 10_000, SHO, M1, cfg)
        period = measure_period(tr.times(), tr.momenta()[:, 0])
        assert period == pytest.approx(2 * np.pi, rel=0.01)

    def test_degenerate_gaussian_period(self):
        # M = Sigma^{-1} makes every mode oscillate with omega = 1
        gt = GaussianTarget.from_correlation(0.95)
        m = EuclideanMetric(gt.precision)
        cfg = IntegratorConfig(step_size=0.001)
        rng = np.random.default_rng(3)
        from geonuts.metrics import sample_momentum

        p0 = sample_momentum(m.at([1.0, 1.0]), rng)
        tr = integrate_trajectory(PhasePoint([1.0, 1.0], p0), 14_000, gt, m, cfg)
        period = measure_period(tr.times(), tr.momenta()[:, 0])
        assert period == pytest.approx(2 * np.pi, rel=0.01)

    def test_hamiltonian_recorded_and_conserved(self):
        cfg = IntegratorConfig(step_size=0.01)
        tr = integrate_trajectory(PhasePoint([1.0], [0.0]), 1000, SHO, M1, cfg)
        hs = np.array([e.hamiltonian for e in tr.entries])
        assert np.abs(hs - hs[0]).max() < 1e-4

    def test_divergence_carries_partial_trace(self):
        cfg = IntegratorConfig(step_size=2.5)  # far beyond the SHO stability limit
        with pytest.raises(DivergenceError) as excinfo:
            integrate_trajectory(PhasePoint([1.0], [1.0]), 400, SHO, M1, cfg)
        trace = excinfo.value.trace
        assert trace is not None
        assert 1 <= len(trace) < 401

    def test_rejects_bad_arguments(self):
        cfg = IntegratorConfig(step_size=0.1)
        with pytest.raises(ValueError):
            integrate_trajectory(PhasePoint([1.0], [0.0]), -1, SHO, M1, cfg)
        with pytest.raises(ValueError):
            integrate_trajectory(PhasePoint([1.0], [0.0]), 1, SHO, M1, cfg, active_criterion="nope")


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(step_size=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(step_size=0.1, fixed_point_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(step_size=0.1, fixed_point_max_iters=0)
