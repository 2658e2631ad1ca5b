"""Closed-form harmonic motion for quadratic potentials.

For H = p^T M^{-1} p / 2 + q^T W q / 2 the flow decomposes into normal modes:
with nhat_j the orthonormal eigenvectors of sqrt(M^{-1}) W sqrt(M^{-1}) and
lambda_j the eigenvalues, the frequencies are omega_j = sqrt(lambda_j), the
momentum-space mode directions are N_j = sqrt(M) nhat_j and the position-space
ones are N^j = sqrt(M^{-1}) nhat_j.  Each mode evolves as

    p_j(t) = A_j cos(omega_j t + phi_j) N_j
    q_j(t) = (A_j / omega_j) sin(omega_j t + phi_j) N^j

(the position coefficient carries the 1/omega and quarter-period lag that
Hamilton's equations force on a cosine-convention momentum).  The N_j are
orthonormal under the M^{-1} inner product, which is what collapses the
termination criterion's cross terms.

This module is the independent oracle the integrator and criterion tests are
checked against, and it supplies the closed-form predictions for when the
classic criterion's value first vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .phase import PhasePoint, check_spd, sorted_eigh, spd_sqrt_pair

TWO_PI = 2.0 * math.pi

# Frequencies closer than this (relative to the largest) count as degenerate.
DEGENERACY_TOL = 1e-8


@dataclass(frozen=True)
class HarmonicModes:
    """Normal-mode data of one quadratic system; columns of the matrices are modes."""

    omega: np.ndarray
    mode_matrix: np.ndarray
    mode_matrix_contra: np.ndarray
    nhat: np.ndarray
    sqrt_mass: np.ndarray
    inv_sqrt_mass: np.ndarray

    @property
    def dim(self) -> int:
        return self.omega.shape[0]

    def is_degenerate(self) -> bool:
        w = self.omega
        return bool(w.max() - w.min() < DEGENERACY_TOL * w.max())


@dataclass(frozen=True)
class HarmonicMode:
    """One fitted mode: frequency, directions, and the launch's amplitude and phase."""

    omega: float
    direction: np.ndarray
    direction_contra: np.ndarray
    amplitude: float
    phase: float


def eigenfrequencies(mass, stiffness) -> HarmonicModes:
    """Normal modes of the quadratic system with mass matrix M and stiffness W."""
    mass = check_spd(mass, "mass")
    stiffness = check_spd(stiffness, "stiffness")
    if mass.shape != stiffness.shape:
        raise ValueError(f"mass {mass.shape} and stiffness {stiffness.shape} shapes differ")
    sqrt_mass, inv_sqrt_mass = spd_sqrt_pair(mass)
    lam, nhat = sorted_eigh(inv_sqrt_mass @ stiffness @ inv_sqrt_mass)
    if lam.min() <= 0:
        raise ValueError("the whitened stiffness matrix is not positive-definite")
    omega = np.sqrt(lam)
    return HarmonicModes(
        omega=omega,
        mode_matrix=sqrt_mass @ nhat,
        mode_matrix_contra=inv_sqrt_mass @ nhat,
        nhat=nhat,
        sqrt_mass=sqrt_mass,
        inv_sqrt_mass=inv_sqrt_mass,
    )


def fit_initial_conditions(modes: HarmonicModes, q0, p0) -> list[HarmonicMode]:
    """Per-mode amplitudes and phases reproducing (q0, p0) at t = 0.

    Phases are stored in [0, 2*pi).  Inactive modes come back with amplitude 0
    and phase 0.
    """
    q0 = np.asarray(q0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    d = modes.dim
    if q0.shape != (d,) or p0.shape != (d,):
        raise ValueError(f"q0/p0 must have dimension {d}")
    if np.linalg.cond(modes.mode_matrix) > 1e12:
        raise ValueError("mode matrix is degenerate; cannot fit initial conditions")
    cos_part = modes.nhat.T @ (modes.inv_sqrt_mass @ p0)
    sin_part = modes.omega * (modes.nhat.T @ (modes.sqrt_mass @ q0))
    fitted = []
    for j in range(d):
        amplitude = math.hypot(cos_part[j], sin_part[j])
        phase = math.atan2(sin_part[j], cos_part[j]) % TWO_PI if amplitude > 0 else 0.0
        fitted.append(
            HarmonicMode(
                omega=float(modes.omega[j]),
                direction=modes.mode_matrix[:, j].copy(),
                direction_contra=modes.mode_matrix_contra[:, j].copy(),
                amplitude=amplitude,
                phase=phase,
            )
        )
    return fitted


def analytic_state(fitted: list[HarmonicMode], t: float) -> PhasePoint:
    """Exact phase-space state at time t for a set of fitted modes."""
    if not fitted:
        raise ValueError("no modes supplied")
    d = fitted[0].direction.shape[0]
    q = np.zeros(d)
    p = np.zeros(d)
    for mode in fitted:
        angle = mode.omega * t + mode.phase
        q += (mode.amplitude / mode.omega) * math.sin(angle) * mode.direction_contra
        p += mode.amplitude * math.cos(angle) * mode.direction
    return PhasePoint(q, p)


def predicted_zero_time(phases, omega: float, n: int, branch: str = "coherent") -> float:
    """Closed-form time of the termination criterion's n-th zero.

    Once faster oscillations have averaged away, a single frequency omega (or
    a degenerate set) controls the criterion, and the zero times have closed
    forms by branch:

    * ``coherent`` -- all phases equal phi: t = (T/2) [n + (1 - 2 phi / pi)].
    * ``incoherent`` -- phases spread out, net momentum constant: t = T/2,
      the opposite point of the orbit.
    * ``averaged`` -- phase offsets beat against each other and the zero sits
      at the average of the turning points: the coherent formula with phi
      replaced by the mean phase over the contributing modes.
    """
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    period = TWO_PI / omega
    if branch == "incoherent":
        return 0.5 * period
    if branch == "coherent":
        if phases.max() - phases.min() > 1e-8:
            raise ValueError("coherent branch requires equal phases; use branch='averaged'")
        phi = float(phases.mean())
    elif branch == "averaged":
        phi = float(phases.mean())
    else:
        raise ValueError(f"unknown branch: {branch!r}")
    t = 0.5 * period * (n + 1.0 - 2.0 * phi / math.pi)
    if t <= 0:
        raise ValueError(f"no positive zero time for n={n} with phase {phi:.6g}")
    return t


def predict_first_zero(fitted: list[HarmonicMode]) -> float:
    """First positive zero time predicted for a fitted launch.

    Picks the branch from the active modes: a single frequency group uses the
    coherent formula when the phases agree and T/2 otherwise; distinct
    frequencies fall back to the averaged formula at the slowest frequency.
    """
    amplitudes = np.array([m.amplitude for m in fitted])
    if amplitudes.max() <= 0:
        raise ValueError("all modes have zero amplitude")
    active = [m for m in fitted if m.amplitude > 1e-12 * amplitudes.max()]
    omegas = np.array([m.omega for m in active])
    phases = np.array([m.phase for m in active])
    omega = float(omegas.min())
    if omegas.max() - omegas.min() < DEGENERACY_TOL * omegas.max():
        if phases.max() - phases.min() <= 1e-8:
            branch = "coherent"
        else:
            return predicted_zero_time(phases, omega, 0, "incoherent")
    else:
        branch = "averaged"
    phi = float(phases.mean())
    n = math.floor(2.0 * phi / math.pi - 1.0) + 1
    t = 0.5 * (TWO_PI / omega) * (n + 1.0 - 2.0 * phi / math.pi)
    while t <= 0:  # guard float-boundary cases of the floor above
        n += 1
        t = 0.5 * (TWO_PI / omega) * (n + 1.0 - 2.0 * phi / math.pi)
    return predicted_zero_time(phases, omega, n, branch)
