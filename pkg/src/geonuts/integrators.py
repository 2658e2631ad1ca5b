"""Symplectic integration of the Hamiltonian flow.

Explicit leapfrog covers constant-mass (Euclidean) kinetic energies.  For the
SoftAbs metric the Hamiltonian is non-separable, so steps use the implicit
generalized leapfrog: an implicit momentum half-step, an implicit position
update averaging the inverse metric at both endpoints, and an explicit
momentum half-step.  Both integrators are reversible and second order; the
implicit solves are plain fixed-point iterations with convergence measured in
the max-norm of successive iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import (
    EuclideanMetric,
    Metric,
    MetricAt,
    SoftAbsGeometry,
    SoftAbsMetric,
    kinetic_energy,
    softabs_dh_dq,
)
from .phase import PhasePoint, TraceEntry, TrajectoryTrace, weighted_inner
from .targets import TargetModel
from .termination import RhoAccumulator, classic_value, generalized_value, transient_guard

DEFAULT_DIVERGENCE_THRESHOLD = 1000.0


class DivergenceError(RuntimeError):
    """Integration failed: non-finite values, runaway energy, or a solve that stalled.

    When raised from trajectory integration, ``trace`` holds the partial
    record up to the failing step.
    """

    def __init__(self, message: str, trace: TrajectoryTrace | None = None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class IntegratorConfig:
    step_size: float = 0.1
    fixed_point_tol: float = 1e-10
    fixed_point_max_iters: int = 100

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if not self.fixed_point_tol > 0:
            raise ValueError(f"fixed_point_tol must be positive, got {self.fixed_point_tol}")
        if self.fixed_point_max_iters < 1:
            raise ValueError(f"fixed_point_max_iters must be >= 1, got {self.fixed_point_max_iters}")


def hamiltonian(target: TargetModel, metric: Metric, state: PhasePoint) -> float:
    m_at = metric.at(state.q)
    return target.potential(state.q) + kinetic_energy(m_at, state.p)


def leapfrog_step(
    state: PhasePoint, target: TargetModel, metric: EuclideanMetric, step_size: float
) -> PhasePoint:
    """One kick-drift-kick step; ``step_size`` may be negative for reverse time."""
    eps = float(step_size)
    p_half = state.p - 0.5 * eps * target.gradient(state.q)
    q_new = state.q + eps * (metric.mass_inv @ p_half)
    if not np.all(np.isfinite(q_new)):
        raise DivergenceError("non-finite position after leapfrog drift")
    p_new = p_half - 0.5 * eps * target.gradient(q_new)
    new = PhasePoint(q_new, p_new)
    if not new.is_finite():
        raise DivergenceError("non-finite state after leapfrog step")
    return new


def _fixed_point(update, x0: np.ndarray, tol: float, max_iters: int, label: str) -> np.ndarray:
    x = x0
    for _ in range(max_iters):
        x_new = update(x)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"non-finite iterate in {label}")
        if float(np.max(np.abs(x_new - x))) < tol:
            return x_new
        x = x_new
    raise DivergenceError(f"{label} did not converge within {max_iters} iterations")


def _generalized_step(
    state: PhasePoint,
    target: TargetModel,
    metric: SoftAbsMetric,
    config: IntegratorConfig,
    step_size: float,
    start_geometry: SoftAbsGeometry | None = None,
) -> tuple[PhasePoint, SoftAbsGeometry]:
    """Implicit generalized-leapfrog step; returns the end state and its geometry.

    The end geometry is the next step's start geometry, so loops avoid
    re-decomposing the Hessian at shared points.
    """
    eps = float(step_size)
    geom = start_geometry if start_geometry is not None else metric.geometry(state.q)
    grad0 = target.gradient(state.q)

    p_half = _fixed_point(
        lambda x: state.p - 0.5 * eps * softabs_dh_dq(geom, grad0, x),
        state.p,
        config.fixed_point_tol,
        config.fixed_point_max_iters,
        "implicit momentum half-step",
    )

    drift0 = geom.metric_at.inverse_metric @ p_half
    q_new = _fixed_point(
        lambda y: state.q + 0.5 * eps * (drift0 + metric.at(y).inverse_metric @ p_half),
        state.q,
        config.fixed_point_tol,
        config.fixed_point_max_iters,
        "implicit position update",
    )

    end_geom = metric.geometry(q_new)
    p_new = p_half - 0.5 * eps * softabs_dh_dq(end_geom, target.gradient(q_new), p_half)
    new = PhasePoint(q_new, p_new)
    if not new.is_finite():
        raise DivergenceError("non-finite state after generalized leapfrog step")
    return new, end_geom


def generalized_leapfrog_step(
    state: PhasePoint,
    target: TargetModel,
    metric: SoftAbsMetric,
    config: IntegratorConfig,
    step_size: float | None = None,
) -> PhasePoint:
    """One implicit generalized-leapfrog step of size ``step_size`` (default from config)."""
    eps = config.step_size if step_size is None else step_size
    new, _ = _generalized_step(state, target, metric, config, eps)
    return new


def step_with_metric(
    state: PhasePoint,
    target: TargetModel,
    metric: Metric,
    config: IntegratorConfig,
    step_size: float,
    geometry: SoftAbsGeometry | None = None,
) -> tuple[PhasePoint, MetricAt, SoftAbsGeometry | None]:
    """Dispatch one step and hand back the end state's metric data."""
    if isinstance(metric, SoftAbsMetric):
        new, geom = _generalized_step(state, target, metric, config, step_size, geometry)
        return new, geom.metric_at, geom
    new = leapfrog_step(state, target, metric, step_size)
    return new, metric.at(new.q), None


def integrate_trajectory(
    start: PhasePoint,
    n_steps: int,
    target: TargetModel,
    metric: Metric,
    config: IntegratorConfig,
    *,
    active_criterion: str = "generalized",
    transient_guard_floor: int = 3,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
) -> TrajectoryTrace:
    """Integrate ``n_steps`` steps, recording energy and both criterion values throughout.

    ``terminated_at`` is set to the time of the first step past the transient
    guard at which the active criterion's value goes negative, but the
    integration always runs to ``n_steps`` so the record shows what happens
    after the turning point.  Raises :class:`DivergenceError` (with the
    partial trace attached) if the energy error exceeds
    ``divergence_threshold`` or any value goes non-finite.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    if active_criterion not in ("classic", "generalized"):
        raise ValueError(f"unknown criterion kind: {active_criterion!r}")
    eps = config.step_size

    m_at0 = metric.at(start.q)
    h0 = target.potential(start.q) + kinetic_energy(m_at0, start.p)
    trace = TrajectoryTrace(step_size=eps)
    # At t=0 the running average of momenta is the t->0 limit rho = p(0), so
    # the recorded generalized value is <p0, p0>_Lambda(q0).
    trace.append(
        TraceEntry(
            t=0.0,
            state=start,
            hamiltonian=h0,
            criterion_classic=0.0,
            criterion_generalized=weighted_inner(start.p, start.p, m_at0.inverse_metric),
        )
    )

    acc = RhoAccumulator.empty(start.dim)
    state = start
    geom: SoftAbsGeometry | None = None
    for k in range(1, n_steps + 1):
        try:
            state, m_at, geom = step_with_metric(state, target, metric, config, eps, geom)
        except DivergenceError as err:
            err.trace = trace
            raise
        h = target.potential(state.q) + kinetic_energy(m_at, state.p)
        if not math.isfinite(h) or abs(h - h0) > divergence_threshold:
            raise DivergenceError(
                f"energy error {h - h0:g} at step {k} exceeds the divergence threshold", trace=trace
            )
        acc = acc.accumulate(state.p, eps)
        trace.append(
            TraceEntry(
                t=k * eps,
                state=state,
                hamiltonian=h,
                criterion_classic=classic_value(state.p, state.q, start.q),
                criterion_generalized=generalized_value(state.p, acc, m_at),
            )
        )

    guard = transient_guard(n_steps, transient_guard_floor)
    fired = trace.first_fired_step(active_criterion, guard)
    if fired is not None:
        trace.mark_terminated(trace.entries[fired].t)
    return trace
