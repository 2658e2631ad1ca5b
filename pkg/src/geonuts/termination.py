"""Turning-point termination criteria.

Two criteria are tracked everywhere:

* classic -- the current momentum contracted with the displacement from the
  trajectory start, sum_j p_j(t) (q^j(t) - q^j(0)); fires when negative.
* generalized -- <p(t), rho(t)>_Lambda(q(t)) where rho is the running average
  of momenta carried to the current point by keeping their coordinate
  components (the drag along the flow preserves them), evaluated with the
  position-dependent inverse metric.  Fires when negative.

The average rho is approximated by summing the end-of-step momenta over a
uniform time grid; :class:`RhoAccumulator` enforces the uniformity because the
discrete average is only well-defined for equal step sizes.  Accumulators
merge by plain addition, which is what makes the doubling-tree sampler's
per-subtree bookkeeping O(1) per merge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import MetricAt
from .phase import PhasePoint, dot, weighted_inner


@dataclass(frozen=True)
class RhoAccumulator:
    """Running sum of trajectory momenta over a uniform step grid.

    Value semantics: ``accumulate`` and ``merge`` return new accumulators.
    ``elapsed == count * dt`` is maintained by construction, and mixing step
    sizes within one accumulator is an error.
    """

    momentum_sum: np.ndarray
    elapsed: float
    count: int

    @classmethod
    def empty(cls, dim: int) -> "RhoAccumulator":
        z = np.zeros(dim)
        z.flags.writeable = False
        return cls(momentum_sum=z, elapsed=0.0, count=0)

    def _check_dt(self, dt: float) -> None:
        if not dt > 0:
            raise ValueError(f"step duration must be positive, got {dt}")
        if self.count > 0:
            current = self.elapsed / self.count
            if abs(dt - current) > 1e-12 * max(abs(dt), abs(current)):
                raise ValueError(
                    f"non-uniform step duration: accumulator holds dt={current!r}, got {dt!r}"
                )

    def accumulate(self, p, dt: float) -> "RhoAccumulator":
        self._check_dt(dt)
        p = np.asarray(p, dtype=float)
        if p.shape != self.momentum_sum.shape:
            raise ValueError(f"momentum of shape {p.shape} does not match accumulator dimension")
        total = self.momentum_sum + p
        total.flags.writeable = False
        return RhoAccumulator(total, self.elapsed + dt, self.count + 1)

    def merge(self, other: "RhoAccumulator") -> "RhoAccumulator":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        self._check_dt(other.elapsed / other.count)
        total = self.momentum_sum + other.momentum_sum
        total.flags.writeable = False
        return RhoAccumulator(total, self.elapsed + other.elapsed, self.count + other.count)

    def mean_momentum(self) -> np.ndarray:
        if self.count == 0:
            raise ValueError("cannot take the mean momentum of an empty accumulator")
        return self.momentum_sum / self.count


def classic_value(p_t, q_t, q_0) -> float:
    """Momentum contracted with the displacement from the trajectory start."""
    q_t = np.asarray(q_t, dtype=float)
    q_0 = np.asarray(q_0, dtype=float)
    if q_t.shape != q_0.shape:
        raise ValueError(f"position shapes differ: {q_t.shape} vs {q_0.shape}")
    return dot(p_t, q_t - q_0)


def generalized_value(p_t, acc: RhoAccumulator, m_at: MetricAt) -> float:
    """<p(t), rho(t)> under the inverse metric at the current point."""
    return weighted_inner(p_t, acc.mean_momentum(), m_at.inverse_metric)


@dataclass(frozen=True)
class CriterionReport:
    """Both criterion values at one trajectory point, with their strict sign tests."""

    classic_value: float
    generalized_value: float
    fired_classic: bool
    fired_generalized: bool

    @classmethod
    def from_values(cls, classic: float, generalized: float) -> "CriterionReport":
        # A value of exactly zero does not fire.
        return cls(classic, generalized, classic < 0.0, generalized < 0.0)


def check_subtree_merge(
    fwd_end: tuple[PhasePoint, MetricAt],
    bwd_end: tuple[PhasePoint, MetricAt],
    acc: RhoAccumulator,
    expected_count: int | None = None,
) -> bool:
    """Generalized criterion applied to a merged subtree's two ends.

    ``fwd_end`` is the latest state of the merged span in trajectory time,
    ``bwd_end`` the earliest, and ``acc`` must cover exactly the span's
    momenta.  The backward end is tested in reversed orientation (negate both
    its momentum and rho, asking whether the span still opens outward going
    backward); negating both arguments leaves the inner product unchanged, so
    the same expression serves both ends.
    """
    if expected_count is not None and acc.count != expected_count:
        raise ValueError(
            f"accumulator covers {acc.count} momenta but the merged subtree has {expected_count}"
        )
    fwd_state, fwd_metric = fwd_end
    bwd_state, bwd_metric = bwd_end
    return (
        generalized_value(fwd_state.p, acc, fwd_metric) < 0.0
        or generalized_value(bwd_state.p, acc, bwd_metric) < 0.0
    )


def transient_guard(n_steps: int, floor: int = 3) -> int:
    """Number of leading steps whose criterion firings are ignored.

    Early in a trajectory the average momentum is dominated by the initial
    direction and the criterion can fire spuriously; the guard scales with
    the trajectory length but never drops below ``floor``.
    """
    return max(int(floor), math.ceil(0.05 * n_steps))
