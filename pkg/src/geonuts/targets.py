"""Target potentials V(q) = -log pi(q) with analytic gradients and Hessians.

Each target also supplies the derivative of its Hessian with respect to
position, which the SoftAbs metric needs.  A central finite-difference
oracle is included as the independent cross-check used throughout the
tests; the analytic derivatives must agree with it before anything
downstream trusts them.
"""

from __future__ import annotations

import numpy as np

from .phase import check_spd


class TargetModel:
    """Base class for a potential on R^d.

    Subclasses implement ``potential``, ``gradient``, ``hessian`` and
    ``hessian_derivatives``; all of them must treat q as read-only and be
    safe to call concurrently.
    """

    dim: int

    def _check_point(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dim,):
            raise ValueError(f"expected position of dimension {self.dim}, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("non-finite position")
        return q

    def potential(self, q) -> float:
        raise NotImplementedError

    def gradient(self, q) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, q) -> np.ndarray:
        raise NotImplementedError

    def hessian_derivatives(self, q) -> np.ndarray:
        """Array of shape (d, d, d) whose [k] slice is d(hessian)/dq_k."""
        raise NotImplementedError


class GaussianTarget(TargetModel):
    """Quadratic potential q^T Sigma^{-1} q / 2 of a zero-mean Gaussian."""

    def __init__(self, sigma):
        self.sigma = check_spd(sigma, "sigma")
        self.dim = self.sigma.shape[0]
        self.precision = np.linalg.inv(self.sigma)
        self.precision = 0.5 * (self.precision + self.precision.T)
        if not np.allclose(self.precision @ self.sigma, np.eye(self.dim), atol=1e-10):
            raise ValueError("sigma is too ill-conditioned to invert reliably")

    @classmethod
    def from_correlation(cls, rho: float) -> "GaussianTarget":
        """The 2-D unit-variance pair with correlation rho."""
        if not -1.0 < rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {rho}")
        return cls(np.array([[1.0, rho], [rho, 1.0]]))

    @classmethod
    def standard(cls, dim: int) -> "GaussianTarget":
        return cls(np.eye(dim))

    def potential(self, q) -> float:
        q = self._check_point(q)
        return 0.5 * float(q @ self.precision @ q)

    def gradient(self, q) -> np.ndarray:
        q = self._check_point(q)
        return self.precision @ q

    def hessian(self, q) -> np.ndarray:
        self._check_point(q)
        return self.precision.copy()

    def hessian_derivatives(self, q) -> np.ndarray:
        self._check_point(q)
        return np.zeros((self.dim, self.dim, self.dim))


class BananaTarget(TargetModel):
    """Twisted-Gaussian potential in two dimensions.

    V(q) = [ q1^2/sigma1^2 + (q2 + beta*q1^2 - 100*beta)^2/sigma2^2 ] / 2

    The shipped defaults (beta=0.03, sigma1=0.01, sigma2=1) confine q1 very
    tightly; the wider variant common in benchmark suites takes sigma1=10.
    Both are reachable through the constructor.
    """

    dim = 2

    def __init__(self, beta: float = 0.03, sigma1: float = 0.01, sigma2: float = 1.0):
        if sigma1 <= 0 or sigma2 <= 0:
            raise ValueError("sigma1 and sigma2 must be positive")
        self.beta = float(beta)
        self.sigma1 = float(sigma1)
        self.sigma2 = float(sigma2)

    def _warp(self, q: np.ndarray) -> float:
        return q[1] + self.beta * q[0] ** 2 - 100.0 * self.beta

    def potential(self, q) -> float:
        q = self._check_point(q)
        u = self._warp(q)
        return 0.5 * (q[0] ** 2 / self.sigma1**2 + u**2 / self.sigma2**2)

    def gradient(self, q) -> np.ndarray:
        q = self._check_point(q)
        u = self._warp(q)
        s2 = self.sigma2**2
        return np.array([q[0] / self.sigma1**2 + 2.0 * self.beta * q[0] * u / s2, u / s2])

    def hessian(self, q) -> np.ndarray:
        q = self._check_point(q)
        u = self._warp(q)
        b = self.beta
        s2 = self.sigma2**2
        h11 = 1.0 / self.sigma1**2 + (2.0 * b * u + 4.0 * b**2 * q[0] ** 2) / s2
        h12 = 2.0 * b * q[0] / s2
        return np.array([[h11, h12], [h12, 1.0 / s2]])

    def hessian_derivatives(self, q) -> np.ndarray:
        q = self._check_point(q)
        b = self.beta
        s2 = self.sigma2**2
        d = np.zeros((2, 2, 2))
        # Only the entries touching the warp term survive differentiation.
        d[0, 0, 0] = 12.0 * b**2 * q[0] / s2
        d[0, 0, 1] = d[0, 1, 0] = 2.0 * b / s2
        d[1, 0, 0] = 2.0 * b / s2
        return d


def fd_gradient(f, q, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    q = np.asarray(q, dtype=float)
    g = np.empty_like(q)
    for i in range(q.size):
        e = np.zeros_like(q)
        e[i] = h
        g[i] = (f(q + e) - f(q - e)) / (2.0 * h)
    return g


def fd_jacobian(f, q, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference Jacobian of a vector- or matrix-valued function.

    Returns an array of shape (d, *f(q).shape) whose [k] slice differentiates
    with respect to q_k; this is the oracle for Hessians (f = gradient) and
    for metric derivatives (f = inverse metric).
    """
    q = np.asarray(q, dtype=float)
    f0 = np.asarray(f(q), dtype=float)
    out = np.empty((q.size,) + f0.shape)
    for k in range(q.size):
        e = np.zeros_like(q)
        e[k] = h
        out[k] = (np.asarray(f(q + e)) - np.asarray(f(q - e))) / (2.0 * h)
    return out
