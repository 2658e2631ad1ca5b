"""Shared test fixtures: toy targets and measurement utilities."""

import numpy as np

from geonuts.targets import TargetModel


class FreeParticle(TargetModel):
    """Zero potential; trajectories drift in straight lines."""

    def __init__(self, dim):
        self.dim = dim

    def potential(self, q):
        self._check_point(q)
        return 0.0

    def gradient(self, q):
        q = self._check_point(q)
        return np.zeros_like(q)

    def hessian(self, q):
        self._check_point(q)
        return np.zeros((self.dim, self.dim))

    def hessian_derivatives(self, q):
        self._check_point(q)
        return np.zeros((self.dim, self.dim, self.dim))


def measure_period(ts, xs):
    """Average spacing of upward zero crossings, refined by linear interpolation."""
    crossings = []
    for k in range(1, len(xs)):
        if xs[k - 1] < 0.0 <= xs[k]:
            frac = -xs[k - 1] / (xs[k] - xs[k - 1])
            crossings.append(ts[k - 1] + frac * (ts[k] - ts[k - 1]))
    assert len(crossings) >= 2, "trajectory too short to measure a period"
    return float(np.mean(np.diff(crossings)))
