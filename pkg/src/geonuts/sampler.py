"""Markov-chain samplers.

``nuts_draw`` implements the doubling-tree transition with slice sampling
over leaves: momentum is refreshed from the metric's conditional, a slice
variable is drawn, and the trajectory is doubled in a random direction each
level until a termination criterion fires, the depth cap is hit, or a step
diverges.  The termination criterion is pluggable: the classic two-endpoint
displacement test or the generalized momentum-average test, both evaluated on
every merged subtree (and on the whole tree after each doubling) once the
merged span's depth reaches ``min_depth_before_termination``.

Backward-in-time integration uses a negative step size, so stored momenta are
always oriented with trajectory time and subtree momentum accumulators merge
by plain addition.

``static_hmc_draw`` is the fixed-length Metropolis baseline, and ``run_chain``
wraps either kernel with warmup discard and summary statistics.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .integrators import (
    DEFAULT_DIVERGENCE_THRESHOLD,
    DivergenceError,
    IntegratorConfig,
    step_with_metric,
)
from .metrics import Metric, MetricAt, SoftAbsGeometry, SoftAbsMetric, kinetic_energy, sample_momentum
from .phase import PhasePoint, dot
from .targets import TargetModel
from .termination import RhoAccumulator, check_subtree_merge

TERMINATED_BY_CRITERION = "criterion"
TERMINATED_BY_MAX_DEPTH = "max_depth"
TERMINATED_BY_DIVERGENCE = "divergence"


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs of the tree sampler; ``n_draws`` counts kept (post-warmup) draws."""

    n_draws: int
    seed: int = 0
    max_depth: int = 10
    min_depth_before_termination: int = 2
    n_warmup_discard: int = 0
    criterion: str = "generalized"
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD

    def __post_init__(self):
        if self.n_draws < 1:
            raise ValueError(f"n_draws must be >= 1, got {self.n_draws}")
        if not 0 <= self.min_depth_before_termination < self.max_depth:
            raise ValueError(
                "min_depth_before_termination must satisfy "
                f"0 <= {self.min_depth_before_termination} < max_depth={self.max_depth}"
            )
        if self.n_warmup_discard < 0:
            raise ValueError(f"n_warmup_discard must be >= 0, got {self.n_warmup_discard}")
        if self.criterion not in ("classic", "generalized"):
            raise ValueError(f"unknown criterion kind: {self.criterion!r}")
        if not self.divergence_threshold > 0:
            raise ValueError(f"divergence_threshold must be positive, got {self.divergence_threshold}")


@dataclass(frozen=True)
class DrawStats:
    """Per-draw diagnostics; ``energy_error`` is the largest |H - H0| seen in the tree."""

    tree_depth: int
    n_leapfrog: int
    divergent: bool
    termination_cause: str
    energy_error: float


@dataclass(frozen=True)
class _End:
    """One end of a trajectory span, with the metric data needed to extend or test it."""

    state: PhasePoint
    m_at: MetricAt
    geometry: SoftAbsGeometry | None


class ClassicTreeCriterion:
    """Two-endpoint displacement test: fire when either end's momentum opposes the span."""

    def check_merge(self, bwd: _End, fwd: _End, acc: RhoAccumulator, expected_count: int) -> bool:
        span = fwd.state.q - bwd.state.q
        return dot(span, bwd.state.p) < 0.0 or dot(span, fwd.state.p) < 0.0


class GeneralizedTreeCriterion:
    """Momentum-average test under the local inverse metric at both span ends."""

    def check_merge(self, bwd: _End, fwd: _End, acc: RhoAccumulator, expected_count: int) -> bool:
        return check_subtree_merge(
            (fwd.state, fwd.m_at), (bwd.state, bwd.m_at), acc, expected_count
        )


def make_tree_criterion(kind: str):
    if kind == "classic":
        return ClassicTreeCriterion()
    if kind == "generalized":
        return GeneralizedTreeCriterion()
    raise ValueError(f"unknown criterion kind: {kind!r}")


@dataclass
class _Tree:
    minus: _End
    plus: _End
    proposal: np.ndarray
    n_valid: int
    acc: RhoAccumulator
    stop: bool
    divergent: bool
    n_leaves: int
    n_leapfrog: int
    max_energy_error: float


class _DrawContext:
    """Shared per-draw constants for the tree recursion."""

    def __init__(self, target, metric, int_config, criterion, min_depth, div_threshold, log_u, h0, rng):
        self.target = target
        self.metric = metric
        self.int_config = int_config
        self.criterion = criterion
        self.min_depth = min_depth
        self.div_threshold = div_threshold
        self.log_u = log_u
        self.h0 = h0
        self.rng = rng


def _leaf(ctx: _DrawContext, end: _End, direction: int) -> _Tree:
    eps = direction * ctx.int_config.step_size
    try:
        state, m_at, geom = step_with_metric(
            end.state, ctx.target, ctx.metric, ctx.int_config, eps, end.geometry
        )
        h = ctx.target.potential(state.q) + kinetic_energy(m_at, state.p)
    except DivergenceError:
        return _Tree(
            minus=end, plus=end, proposal=end.state.q, n_valid=0,
            acc=RhoAccumulator.empty(end.state.dim), stop=True, divergent=True,
            n_leaves=0, n_leapfrog=1, max_energy_error=math.inf,
        )
    energy_error = abs(h - ctx.h0) if math.isfinite(h) else math.inf
    divergent = energy_error > ctx.div_threshold
    new_end = _End(state, m_at, geom)
    acc = RhoAccumulator.empty(state.dim).accumulate(state.p, ctx.int_config.step_size)
    return _Tree(
        minus=new_end, plus=new_end, proposal=state.q,
        n_valid=int(ctx.log_u <= -h), acc=acc, stop=divergent, divergent=divergent,
        n_leaves=1, n_leapfrog=1, max_energy_error=energy_error,
    )


def _build_tree(ctx: _DrawContext, end: _End, direction: int, depth: int) -> _Tree:
    if depth == 0:
        return _leaf(ctx, end, direction)

    first = _build_tree(ctx, end, direction, depth - 1)
    if first.stop:
        return first
    grow_from = first.plus if direction > 0 else first.minus
    second = _build_tree(ctx, grow_from, direction, depth - 1)

    if direction > 0:
        minus, plus = first.minus, second.plus
    else:
        minus, plus = second.minus, first.plus
    n_valid = first.n_valid + second.n_valid
    proposal = first.proposal
    if n_valid > 0 and ctx.rng.random() < second.n_valid / n_valid:
        proposal = second.proposal
    acc = first.acc.merge(second.acc)
    n_leaves = first.n_leaves + second.n_leaves

    stop = second.stop
    if not stop and depth >= ctx.min_depth:
        stop = ctx.criterion.check_merge(minus, plus, acc, n_leaves)
    return _Tree(
        minus=minus, plus=plus, proposal=proposal, n_valid=n_valid, acc=acc,
        stop=stop, divergent=first.divergent or second.divergent,
        n_leaves=n_leaves, n_leapfrog=first.n_leapfrog + second.n_leapfrog,
        max_energy_error=max(first.max_energy_error, second.max_energy_error),
    )


def _end_at(metric: Metric, q: np.ndarray, p: np.ndarray) -> _End:
    if isinstance(metric, SoftAbsMetric):
        geom = metric.geometry(q)
        return _End(PhasePoint(q, p), geom.metric_at, geom)
    return _End(PhasePoint(q, p), metric.at(q), None)


def nuts_draw(
    rng: np.random.Generator,
    current_q,
    target: TargetModel,
    metric: Metric,
    integrator_config: IntegratorConfig,
    sampler_config: SamplerConfig,
    criterion=None,
) -> tuple[np.ndarray, DrawStats]:
    """One tree transition; returns the next position and its diagnostics.

    A divergence anywhere in the tree rejects the whole draw: the chain stays
    at ``current_q`` with ``divergent=True`` rather than aborting.
    """
    q0 = np.asarray(current_q, dtype=float)
    if criterion is None:
        criterion = make_tree_criterion(sampler_config.criterion)

    if isinstance(metric, SoftAbsMetric):
        geom0 = metric.geometry(q0)
        m_at0 = geom0.metric_at
    else:
        geom0 = None
        m_at0 = metric.at(q0)
    p0 = sample_momentum(m_at0, rng)
    h0 = target.potential(q0) + kinetic_energy(m_at0, p0)
    log_u = -h0 + math.log(1.0 - rng.random())
    root = _End(PhasePoint(q0, p0), m_at0, geom0)

    ctx = _DrawContext(
        target, metric, integrator_config, criterion,
        sampler_config.min_depth_before_termination,
        sampler_config.divergence_threshold, log_u, h0, rng,
    )

    minus = plus = root
    proposal = q0
    n_valid = 1  # the root state is always on the slice
    acc = RhoAccumulator.empty(q0.size)
    n_leaves = 0
    n_leapfrog = 0
    max_energy_error = 0.0
    depth = 0
    divergent = False
    cause = TERMINATED_BY_MAX_DEPTH

    while depth < sampler_config.max_depth:
        direction = 1 if rng.random() < 0.5 else -1
        start = plus if direction > 0 else minus
        sub = _build_tree(ctx, start, direction, depth)
        n_leapfrog += sub.n_leapfrog
        max_energy_error = max(max_energy_error, sub.max_energy_error)
        if sub.divergent:
            divergent = True
            cause = TERMINATED_BY_DIVERGENCE
            break
        if sub.stop:
            cause = TERMINATED_BY_CRITERION
            break
        if sub.n_valid > 0 and rng.random() < min(1.0, sub.n_valid / n_valid):
            proposal = sub.proposal
        if direction > 0:
            plus = sub.plus
        else:
            minus = sub.minus
        n_valid += sub.n_valid
        acc = acc.merge(sub.acc)
        n_leaves += sub.n_leaves
        depth += 1
        if depth >= sampler_config.min_depth_before_termination:
            if criterion.check_merge(minus, plus, acc, n_leaves):
                cause = TERMINATED_BY_CRITERION
                break

    if divergent:
        next_q = q0.copy()
    else:
        next_q = np.array(proposal, copy=True)
    stats = DrawStats(
        tree_depth=depth,
        n_leapfrog=n_leapfrog,
        divergent=divergent,
        termination_cause=cause,
        energy_error=max_energy_error,
    )
    return next_q, stats


def static_hmc_draw(
    rng: np.random.Generator,
    current_q,
    target: TargetModel,
    metric: Metric,
    integrator_config: IntegratorConfig,
    n_steps: int,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
) -> tuple[np.ndarray, DrawStats]:
    """Fixed-length HMC: ``n_steps`` integrator steps then a Metropolis test.

    ``termination_cause`` is always "max_depth" for completed trajectories
    (the draw runs its full step budget) or "divergence" for rejected ones.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    q0 = np.asarray(current_q, dtype=float)
    end = _end_at(metric, q0, np.zeros(q0.size))
    p0 = sample_momentum(end.m_at, rng)
    h0 = target.potential(q0) + kinetic_energy(end.m_at, p0)

    state = PhasePoint(q0, p0)
    geom = end.geometry
    m_at = end.m_at
    try:
        for _ in range(n_steps):
            state, m_at, geom = step_with_metric(
                state, target, metric, integrator_config, integrator_config.step_size, geom
            )
        h1 = target.potential(state.q) + kinetic_energy(m_at, state.p)
    except DivergenceError:
        return q0.copy(), DrawStats(0, n_steps, True, TERMINATED_BY_DIVERGENCE, math.inf)

    delta_h = h1 - h0
    if not math.isfinite(delta_h) or abs(delta_h) > divergence_threshold:
        return q0.copy(), DrawStats(
            0, n_steps, True, TERMINATED_BY_DIVERGENCE,
            abs(delta_h) if math.isfinite(delta_h) else math.inf,
        )
    accepted = math.log(1.0 - rng.random()) < -delta_h
    next_q = state.q.copy() if accepted else q0.copy()
    return next_q, DrawStats(0, n_steps, False, TERMINATED_BY_MAX_DEPTH, abs(delta_h))


def effective_sample_size(x) -> float:
    """Geyer initial-monotone-sequence ESS of one scalar chain."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    y = x - x.mean()
    if not np.any(y):
        return float(n)
    # FFT autocovariance; gamma[k] = (1/n) sum_i y_i y_{i+k}
    width = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, width)
    gamma = np.fft.irfft(f * np.conj(f), width)[:n] / n
    g0 = gamma[0]
    total = 0.0
    prev = math.inf
    for m in range(n // 2):
        pair = gamma[2 * m] + gamma[2 * m + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev)  # enforce monotone decay of the pair sums
        total += pair
        prev = pair
    tau = max(-1.0 + 2.0 * total / g0, 1e-12)
    return float(n / tau)


@dataclass
class ChainResult:
    draws: np.ndarray
    stats: list[DrawStats]
    summary: dict


def run_chain(
    target: TargetModel,
    metric: Metric,
    integrator_config: IntegratorConfig,
    sampler_config: SamplerConfig,
    initial_q,
    *,
    method: str = "nuts",
    static_n_steps: int = 10,
    rng: np.random.Generator | None = None,
) -> ChainResult:
    """Run one chain and summarize it (means, covariance, ESS, divergences)."""
    if method not in ("nuts", "static"):
        raise ValueError(f"unknown sampler method: {method!r}")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(sampler_config.seed))
    q = np.asarray(initial_q, dtype=float)
    dim = q.size

    total = sampler_config.n_warmup_discard + sampler_config.n_draws
    draws = np.empty((sampler_config.n_draws, dim))
    stats: list[DrawStats] = []
    t0 = time.perf_counter()
    for i in range(total):
        if method == "nuts":
            q, st = nuts_draw(rng, q, target, metric, integrator_config, sampler_config)
        else:
            q, st = static_hmc_draw(
                rng, q, target, metric, integrator_config, static_n_steps,
                sampler_config.divergence_threshold,
            )
        k = i - sampler_config.n_warmup_discard
        if k >= 0:
            draws[k] = q
            stats.append(st)
    wall = time.perf_counter() - t0

    n = sampler_config.n_draws
    means = draws.mean(axis=0)
    covariance = np.cov(draws, rowvar=False).reshape(dim, dim) if n > 1 else np.zeros((dim, dim))
    ess = [effective_sample_size(draws[:, j]) for j in range(dim)]
    summary = {
        "n_draws": n,
        "means": means.tolist(),
        "covariance": covariance.tolist(),
        "ess": ess,
        "n_divergent": sum(1 for s in stats if s.divergent),
        "mean_n_leapfrog": float(np.mean([s.n_leapfrog for s in stats])),
        "mean_tree_depth": float(np.mean([s.tree_depth for s in stats])),
        "wall_time_s": wall,
    }
    return ChainResult(draws=draws, stats=stats, summary=summary)
