"""Kinetic-energy geometry.

Two metric families drive the dynamics and the termination criterion:

* ``EuclideanMetric`` -- a constant SPD mass matrix M; the momentum-contracting
  matrix is Lambda = M^{-1} everywhere.
* ``SoftAbsMetric`` -- a position-dependent metric built from the target's
  Hessian H(q) = Q diag(lambda) Q^T by mapping each eigenvalue through
  s(lambda) = lambda * coth(alpha * lambda), a smooth positive surrogate for
  |lambda| bounded below by 1/alpha.  The metric is G(q) = Q diag(s) Q^T and
  Lambda(q) = G(q)^{-1} = Q diag(1/s) Q^T.

Everything downstream needs three things from a metric at a point: Lambda
itself, the log-determinant log|Lambda| = -sum(log s), and (for the implicit
integrator) the derivatives of both with respect to position.  Derivatives use
the eigendecomposition divided-difference form: with B_k = Q^T (dH/dq_k) Q and
D the divided-difference table of f(lambda) = 1/s(lambda),

    dLambda/dq_k = Q (B_k * D) Q^T,
    d(log|G|)/dq_k = sum_i B_k[i,i] * s'(lambda_i) / s(lambda_i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phase import check_spd, sorted_eigh
from .targets import TargetModel

# Below this, lambda*coth(alpha*lambda) is evaluated by series to dodge 0/0.
_SERIES_CUTOFF = 1e-4
# Above this, coth/sech saturate to machine precision; closed forms avoid overflow.
_SATURATION_CUTOFF = 20.0
# Eigenvalue pairs closer than this use the analytic derivative of 1/s.
_DEGENERATE_TOL = 1e-8


def softabs_map(lam, alpha: float) -> np.ndarray:
    """Elementwise s(lambda) = lambda * coth(alpha * lambda), with s(0) = 1/alpha."""
    lam = np.asarray(lam, dtype=float)
    x = alpha * lam
    out = np.empty_like(lam)
    small = np.abs(x) < _SERIES_CUTOFF
    out[small] = 1.0 / alpha + alpha * lam[small] ** 2 / 3.0
    out[~small] = lam[~small] / np.tanh(x[~small])
    return out


def softabs_map_derivative(lam, alpha: float) -> np.ndarray:
    """Elementwise ds/dlambda = coth(alpha*lambda) - alpha*lambda / sinh^2(alpha*lambda)."""
    lam = np.asarray(lam, dtype=float)
    x = alpha * lam
    out = np.empty_like(lam)
    small = np.abs(x) < _SERIES_CUTOFF
    big = np.abs(x) > _SATURATION_CUTOFF
    mid = ~(small | big)
    out[small] = 2.0 * alpha * lam[small] / 3.0
    out[big] = np.sign(lam[big])
    out[mid] = 1.0 / np.tanh(x[mid]) - x[mid] / np.sinh(x[mid]) ** 2
    return out


def inv_softabs(lam, alpha: float) -> np.ndarray:
    """Elementwise f(lambda) = 1/s(lambda) = tanh(alpha*lambda) / lambda."""
    lam = np.asarray(lam, dtype=float)
    x = alpha * lam
    out = np.empty_like(lam)
    small = np.abs(x) < _SERIES_CUTOFF
    out[small] = alpha * (1.0 - x[small] ** 2 / 3.0)
    out[~small] = np.tanh(x[~small]) / lam[~small]
    return out


def inv_softabs_derivative(lam, alpha: float) -> np.ndarray:
    """Elementwise df/dlambda for f = tanh(alpha*lambda)/lambda."""
    lam = np.asarray(lam, dtype=float)
    x = alpha * lam
    out = np.empty_like(lam)
    small = np.abs(x) < _SERIES_CUTOFF
    big = np.abs(x) > _SATURATION_CUTOFF
    mid = ~(small | big)
    out[small] = -2.0 * alpha**3 * lam[small] / 3.0
    out[big] = -np.tanh(x[big]) / lam[big] ** 2
    out[mid] = alpha / (lam[mid] * np.cosh(x[mid]) ** 2) - np.tanh(x[mid]) / lam[mid] ** 2
    return out


def _divided_differences_inv_softabs(lam: np.ndarray, alpha: float) -> np.ndarray:
    """Table D[i,j] of divided differences of f = 1/s across eigenvalue pairs."""
    d = lam.size
    f = inv_softabs(lam, alpha)
    table = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            gap = lam[i] - lam[j]
            if abs(gap) < _DEGENERATE_TOL:
                # Midpoint keeps the table (hence dLambda) exactly symmetric.
                table[i, j] = float(inv_softabs_derivative(np.array([0.5 * (lam[i] + lam[j])]), alpha)[0])
            else:
                table[i, j] = (f[i] - f[j]) / gap
    return table


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MetricAt:
    """Metric data evaluated at one position.

    ``eigenvalues``/``eigenvectors`` decompose the defining symmetric matrix
    (the mass matrix for a Euclidean metric, the Hessian for SoftAbs);
    ``metric_eigenvalues`` is the positive spectrum s of the metric itself,
    so the inverse metric is Q diag(1/s) Q^T and log|Lambda| = -sum(log s).
    """

    q: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    metric_eigenvalues: np.ndarray
    inverse_metric: np.ndarray
    log_det_inverse_metric: float
    includes_log_det: bool
    chol_metric: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.inverse_metric.shape[0]


@dataclass(frozen=True)
class SoftAbsGeometry:
    """MetricAt plus the position derivatives the implicit integrator needs.

    ``dlam[k]`` is dLambda/dq_k (symmetric); ``grad_log_det_metric[k]`` is
    d(log|G|)/dq_k = -d(log|Lambda|)/dq_k.
    """

    metric_at: MetricAt
    dlam: np.ndarray
    grad_log_det_metric: np.ndarray


class EuclideanMetric:
    """Constant SPD mass matrix; Lambda = M^{-1} independent of position."""

    def __init__(self, mass):
        self.mass = _readonly(check_spd(mass, "mass"))
        self.dim = self.mass.shape[0]
        inv = np.linalg.inv(self.mass)
        self.mass_inv = _readonly(0.5 * (inv + inv.T))
        if not np.allclose(self.mass_inv @ self.mass, np.eye(self.dim), atol=1e-10):
            raise ValueError("mass matrix is too ill-conditioned to invert reliably")
        chol = np.linalg.cholesky(self.mass)
        if not np.allclose(chol @ chol.T, self.mass, atol=1e-10):
            raise ValueError("Cholesky factorization of the mass matrix failed validation")
        self.chol = _readonly(chol)
        w, v = sorted_eigh(self.mass)
        self._eigenvalues = _readonly(w)
        self._eigenvectors = _readonly(v)
        self._log_det_lam = -float(np.sum(np.log(w)))

    @classmethod
    def identity(cls, dim: int) -> "EuclideanMetric":
        return cls(np.eye(dim))

    def at(self, q) -> MetricAt:
        q = _readonly(np.array(q, dtype=float, copy=True))
        return MetricAt(
            q=q,
            eigenvalues=self._eigenvalues,
            eigenvectors=self._eigenvectors,
            metric_eigenvalues=self._eigenvalues,
            inverse_metric=self.mass_inv,
            log_det_inverse_metric=self._log_det_lam,
            # The constant -log|M|/2 is dropped from reported energies; dropped
            # uniformly, so energy differences are unaffected.
            includes_log_det=False,
            chol_metric=self.chol,
        )

    def derivatives(self, q) -> np.ndarray:
        return np.zeros((self.dim, self.dim, self.dim))


class SoftAbsMetric:
    """Eigenvalue-regularized Hessian metric with positive smoothing scale alpha."""

    def __init__(self, target: TargetModel, alpha: float = 1.0):
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.target = target
        self.alpha = float(alpha)
        self.dim = target.dim

    def _decompose(self, q) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        hess = self.target.hessian(q)
        lam, vecs = sorted_eigh(hess)
        if not np.all(np.isfinite(lam)):
            raise ValueError(f"Hessian eigendecomposition failed at q={np.asarray(q)}")
        s = softabs_map(lam, self.alpha)
        if np.any(s <= 0):
            # Mathematically impossible (s >= 1/alpha); guards a numerics bug.
            raise RuntimeError(f"SoftAbs produced a non-positive metric eigenvalue at q={np.asarray(q)}")
        return lam, vecs, s, hess

    def at(self, q) -> MetricAt:
        lam, vecs, s, _ = self._decompose(q)
        inv_metric = vecs @ np.diag(1.0 / s) @ vecs.T
        return MetricAt(
            q=_readonly(np.array(q, dtype=float, copy=True)),
            eigenvalues=_readonly(lam),
            eigenvectors=_readonly(vecs),
            metric_eigenvalues=_readonly(s),
            inverse_metric=_readonly(0.5 * (inv_metric + inv_metric.T)),
            log_det_inverse_metric=-float(np.sum(np.log(s))),
            includes_log_det=True,
        )

    def geometry(self, q) -> SoftAbsGeometry:
        """MetricAt together with dLambda/dq and the log-det gradient."""
        m_at = self.at(q)
        lam = m_at.eigenvalues
        vecs = m_at.eigenvectors
        s = m_at.metric_eigenvalues
        table = _divided_differences_inv_softabs(lam, self.alpha)
        s_prime = softabs_map_derivative(lam, self.alpha)
        dhess = self.target.hessian_derivatives(q)
        d = self.dim
        dlam = np.empty((d, d, d))
        grad_log_det = np.empty(d)
        for k in range(d):
            b = vecs.T @ dhess[k] @ vecs
            dk = vecs @ (b * table) @ vecs.T
            dlam[k] = 0.5 * (dk + dk.T)
            grad_log_det[k] = float(np.sum(np.diag(b) * s_prime / s))
        return SoftAbsGeometry(m_at, _readonly(dlam), _readonly(grad_log_det))

    def derivatives(self, q) -> np.ndarray:
        return self.geometry(q).dlam


Metric = EuclideanMetric | SoftAbsMetric


def metric_at(metric: Metric, q) -> MetricAt:
    return metric.at(q)


def metric_derivatives(metric: Metric, q) -> np.ndarray:
    """The d symmetric matrices dLambda/dq_k (all zero for a constant metric)."""
    return metric.derivatives(q)


def kinetic_energy(m_at: MetricAt, p) -> float:
    """p^T Lambda p / 2, plus -log|Lambda|/2 when the metric varies with position."""
    p = np.asarray(p, dtype=float)
    if p.shape != (m_at.dim,):
        raise ValueError(f"momentum of dimension {p.shape} does not match metric dimension {m_at.dim}")
    t = 0.5 * float(p @ m_at.inverse_metric @ p)
    if m_at.includes_log_det:
        t -= 0.5 * m_at.log_det_inverse_metric
    return t


def sample_momentum(m_at: MetricAt, rng: np.random.Generator) -> np.ndarray:
    """Draw p ~ N(0, G) where G is the metric (the inverse of Lambda)."""
    z = rng.standard_normal(m_at.dim)
    if m_at.chol_metric is not None:
        return m_at.chol_metric @ z
    return m_at.eigenvectors @ (np.sqrt(m_at.metric_eigenvalues) * z)


def softabs_dh_dq(geometry: SoftAbsGeometry, grad_potential: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Position derivative of H = p^T Lambda p / 2 - log|Lambda|/2 + V."""
    quad = 0.5 * np.einsum("kij,i,j->k", geometry.dlam, p, p)
    return grad_potential + 0.5 * geometry.grad_log_det_metric + quad
