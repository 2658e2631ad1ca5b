"""Phase-space value types and the small dense linear algebra shared by every module.

Everything here is double precision and dense; the shipped problems are
two-dimensional and nothing in this package targets large d.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _as_vector(x) -> np.ndarray:
    v = np.array(x, dtype=float, copy=True)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"expected a 1-D vector of dimension >= 1, got shape {v.shape}")
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class PhasePoint:
    """A point of phase space: position q and momentum p in coordinates.

    q and p must share one fixed dimension d >= 1.  Points are immutable
    values; integrators return new points rather than mutating.
    """

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _as_vector(self.q))
        object.__setattr__(self, "p", _as_vector(self.p))
        if self.q.shape != self.p.shape:
            raise ValueError(
                f"q and p must have equal dimension, got {self.q.shape[0]} and {self.p.shape[0]}"
            )

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p)))

    def negate_momentum(self) -> "PhasePoint":
        return PhasePoint(self.q, -self.p)


def dot(a, b) -> float:
    """Plain Euclidean inner product sum_j a_j b_j; the identity-weight special case."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(a @ b)


def weighted_inner(a, b, lam) -> float:
    """Inner product sum_jk a_j b_k Lam^{jk} for a symmetric weight matrix Lam."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if lam.shape != (a.shape[0], a.shape[0]):
        raise ValueError(f"weight matrix shape {lam.shape} does not match vectors of dim {a.shape[0]}")
    return float(a @ lam @ b)


def sorted_eigh(m) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition with a deterministic sign convention.

    Eigenvalues ascending, eigenvectors orthonormal columns, and each column
    flipped so its largest-magnitude component is positive.  Deterministic
    output is what golden tests rely on.
    """
    m = np.asarray(m, dtype=float)
    w, v = np.linalg.eigh(m)
    for j in range(v.shape[1]):
        k = int(np.argmax(np.abs(v[:, j])))
        if v[k, j] < 0:
            v[:, j] = -v[:, j]
    return w, v


def check_spd(m, name: str = "matrix") -> np.ndarray:
    """Validate symmetry and positive-definiteness; returns the symmetrized array."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-10 * max(1.0, float(np.abs(m).max()))):
        raise ValueError(f"{name} is not symmetric")
    m = 0.5 * (m + m.T)
    w = np.linalg.eigvalsh(m)
    if w.min() <= 0.0:
        raise ValueError(f"{name} is not positive-definite (min eigenvalue {w.min():g})")
    return m


def spd_sqrt_pair(m) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric square root of an SPD matrix and of its inverse."""
    m = check_spd(m)
    w, v = sorted_eigh(m)
    root = v @ np.diag(np.sqrt(w)) @ v.T
    inv_root = v @ np.diag(1.0 / np.sqrt(w)) @ v.T
    return root, inv_root


@dataclass(frozen=True)
class TraceEntry:
    """One recorded integrator step: time, state, energy, and both criterion values."""

    t: float
    state: PhasePoint
    hamiltonian: float
    criterion_classic: float
    criterion_generalized: float

    @property
    def fired_classic(self) -> bool:
        # "fired" is a strict sign test; an exact zero does not fire.
        return self.criterion_classic < 0.0

    @property
    def fired_generalized(self) -> bool:
        return self.criterion_generalized < 0.0


@dataclass
class TrajectoryTrace:
    """Time-ordered record of a single integrated trajectory.

    Entries are appended on a uniform time grid spaced by ``step_size``;
    ``terminated_at``, once set, must equal the time of some entry.
    Integration is allowed to continue past termination so the record shows
    post-termination behavior.
    """

    step_size: float
    entries: list[TraceEntry] = field(default_factory=list)
    terminated_at: float | None = None

    def append(self, entry: TraceEntry) -> None:
        if self.entries:
            expected = self.entries[-1].t + self.step_size
            if abs(entry.t - expected) > 1e-9 * max(1.0, abs(expected)):
                raise ValueError(
                    f"trace entries must be spaced by step_size={self.step_size}: "
                    f"got t={entry.t} after t={self.entries[-1].t}"
                )
        if not entry.state.is_finite():
            raise ValueError(f"non-finite state at t={entry.t} cannot enter a trajectory")
        self.entries.append(entry)

    def mark_terminated(self, t: float) -> None:
        if not any(abs(e.t - t) <= 1e-12 * max(1.0, abs(t)) for e in self.entries):
            raise ValueError(f"terminated_at={t} does not match any entry time")
        self.terminated_at = t

    def times(self) -> np.ndarray:
        return np.array([e.t for e in self.entries])

    def positions(self) -> np.ndarray:
        return np.array([e.state.q for e in self.entries])

    def momenta(self) -> np.ndarray:
        return np.array([e.state.p for e in self.entries])

    def first_fired_step(self, which: str, guard_steps: int = 0) -> int | None:
        """Index of the first entry past the transient guard whose criterion fired.

        ``which`` is "classic" or "generalized"; entries 1..guard_steps are
        ignored, entry 0 never fires by construction.
        """
        if which not in ("classic", "generalized"):
            raise ValueError(f"unknown criterion kind: {which!r}")
        for k, e in enumerate(self.entries):
            if k <= guard_steps:
                continue
            value = e.criterion_classic if which == "classic" else e.criterion_generalized
            if value < 0.0:
                return k
        return None

    def __len__(self) -> int:
        return len(self.entries)
