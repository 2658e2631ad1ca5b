"""Experiment configuration: JSON parsing, validation, defaults, and factories.

Config files are plain JSON objects with sections ``target``, ``metric``,
``integrator``, ``criterion``, ``sampler`` and ``trajectory``.  Unknown keys
are rejected, out-of-range values raise :class:`ConfigError` naming the key,
and every omitted field is filled with a documented default, so a parsed
config is always complete.  Flag overrides (dotted paths) beat JSON, which
beats defaults.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .integrators import IntegratorConfig
from .metrics import EuclideanMetric, Metric, SoftAbsMetric
from .sampler import SamplerConfig
from .targets import BananaTarget, GaussianTarget, TargetModel

MODES = ("trajectory", "sample", "modes")


class ConfigError(ValueError):
    """A malformed, unknown, or out-of-range configuration entry."""


def _require_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path} must be a JSON object, got {type(value).__name__}")
    return value


def _reject_unknown(d: dict, allowed: set[str], path: str) -> None:
    for key in sorted(set(d) - allowed):
        raise ConfigError(f"unknown key '{path}.{key}'" if path else f"unknown key '{key}'")


def _number(d: dict, key: str, path: str, default, *, minimum=None, strict_min=None, integer=False):
    if key not in d:
        return default
    value = d[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key} must be a number")
    if integer:
        if float(value) != int(value):
            raise ConfigError(f"{path}.{key} must be an integer")
        value = int(value)
    else:
        value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{path}.{key} must be finite")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}.{key} must be >= {minimum}, got {value}")
    if strict_min is not None and value <= strict_min:
        raise ConfigError(f"{path}.{key} must be > {strict_min}, got {value}")
    return value


def _vector(d: dict, key: str, path: str, default):
    if key not in d or d[key] is None:
        return default
    value = d[key]
    if not isinstance(value, list) or not value or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        raise ConfigError(f"{path}.{key} must be a non-empty list of numbers")
    return tuple(float(x) for x in value)


def _matrix(value, path: str):
    if (
        not isinstance(value, list)
        or not value
        or not all(isinstance(row, list) and len(row) == len(value) for row in value)
    ):
        raise ConfigError(f"{path} must be a square matrix (list of equal-length rows)")
    return tuple(tuple(float(x) for x in row) for row in value)


@dataclass(frozen=True)
class TargetSpec:
    kind: str
    rho: float | None = None
    sigma: tuple | None = None
    beta: float | None = None
    sigma1: float | None = None
    sigma2: float | None = None

    def dimension(self) -> int:
        if self.kind == "banana":
            return 2
        return 2 if self.sigma is None else len(self.sigma)

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            if self.sigma is not None:
                return {"kind": "gaussian", "sigma": [list(r) for r in self.sigma]}
            return {"kind": "gaussian", "rho": self.rho}
        return {"kind": "banana", "beta": self.beta, "sigma1": self.sigma1, "sigma2": self.sigma2}


@dataclass(frozen=True)
class MetricSpec:
    kind: str
    mass: str | tuple | None = None
    alpha: float | None = None

    def to_dict(self) -> dict:
        if self.kind == "euclidean":
            mass = [list(r) for r in self.mass] if isinstance(self.mass, tuple) else self.mass
            return {"kind": "euclidean", "mass": mass}
        return {"kind": "softabs", "alpha": self.alpha}


@dataclass(frozen=True)
class IntegratorSpec:
    step_size: float
    fp_tol: float
    fp_max_iters: int

    def to_dict(self) -> dict:
        return {"step_size": self.step_size, "fp_tol": self.fp_tol, "fp_max_iters": self.fp_max_iters}


@dataclass(frozen=True)
class CriterionSpec:
    kind: str
    transient_guard_steps: int

    def to_dict(self) -> dict:
        return {"kind": self.kind, "transient_guard_steps": self.transient_guard_steps}


@dataclass(frozen=True)
class SamplerSpec:
    n_draws: int
    seed: int
    max_depth: int
    min_depth_before_termination: int
    n_warmup_discard: int
    divergence_threshold: float

    def to_dict(self) -> dict:
        return {
            "n_draws": self.n_draws,
            "seed": self.seed,
            "max_depth": self.max_depth,
            "min_depth_before_termination": self.min_depth_before_termination,
            "n_warmup_discard": self.n_warmup_discard,
            "divergence_threshold": self.divergence_threshold,
        }


@dataclass(frozen=True)
class TrajectorySpec:
    n_steps: int
    q0: tuple
    p0: tuple | None
    seed: int

    def to_dict(self) -> dict:
        return {
            "n_steps": self.n_steps,
            "q0": list(self.q0),
            "p0": None if self.p0 is None else list(self.p0),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    target: TargetSpec
    metric: MetricSpec
    integrator: IntegratorSpec
    criterion: CriterionSpec
    sampler: SamplerSpec
    trajectory: TrajectorySpec
    # Output paths come from flags only; they are not part of the JSON schema.
    out_path: str | None = None
    summary_path: str | None = None
    n_chains: int = 1

    def to_canonical_dict(self) -> dict:
        return {
            "target": self.target.to_dict(),
            "metric": self.metric.to_dict(),
            "integrator": self.integrator.to_dict(),
            "criterion": self.criterion.to_dict(),
            "sampler": self.sampler.to_dict(),
            "trajectory": self.trajectory.to_dict(),
        }

    def to_canonical_json(self) -> str:
        return json.dumps(self.to_canonical_dict(), sort_keys=True, indent=2)


def _parse_target(d: dict) -> TargetSpec:
    d = _require_mapping(d, "target")
    kind = d.get("kind", "gaussian")
    if kind == "gaussian":
        _reject_unknown(d, {"kind", "rho", "sigma"}, "target")
        if "rho" in d and "sigma" in d:
            raise ConfigError("target accepts either 'rho' or 'sigma', not both")
        if "sigma" in d:
            sigma = _matrix(d["sigma"], "target.sigma")
            return TargetSpec(kind="gaussian", sigma=sigma)
        rho = _number(d, "rho", "target", 0.95)
        if not -1.0 < rho < 1.0:
            raise ConfigError(f"target.rho must lie in (-1, 1), got {rho}")
        return TargetSpec(kind="gaussian", rho=rho)
    if kind == "banana":
        _reject_unknown(d, {"kind", "beta", "sigma1", "sigma2"}, "target")
        return TargetSpec(
            kind="banana",
            beta=_number(d, "beta", "target", 0.03),
            sigma1=_number(d, "sigma1", "target", 0.01, strict_min=0.0),
            sigma2=_number(d, "sigma2", "target", 1.0, strict_min=0.0),
        )
    raise ConfigError(f"target.kind must be 'gaussian' or 'banana', got {kind!r}")


def _parse_metric(d: dict, target: TargetSpec) -> MetricSpec:
    d = _require_mapping(d, "metric")
    kind = d.get("kind", "euclidean")
    if kind == "euclidean":
        _reject_unknown(d, {"kind", "mass"}, "metric")
        mass = d.get("mass", "identity")
        if isinstance(mass, str):
            if mass not in ("identity", "sigma_inverse"):
                raise ConfigError(
                    f"metric.mass must be 'identity', 'sigma_inverse', or a matrix, got {mass!r}"
                )
            if mass == "sigma_inverse" and target.kind != "gaussian":
                raise ConfigError("metric.mass 'sigma_inverse' requires a gaussian target")
        else:
            mass = _matrix(mass, "metric.mass")
            if len(mass) != target.dimension():
                raise ConfigError(
                    f"metric.mass has dimension {len(mass)} but the target has {target.dimension()}"
                )
        return MetricSpec(kind="euclidean", mass=mass)
    if kind == "softabs":
        _reject_unknown(d, {"kind", "alpha"}, "metric")
        alpha = _number(d, "alpha", "metric", 1.0)
        if not alpha > 0:
            raise ConfigError(f"metric.alpha must be positive, got {alpha}")
        return MetricSpec(kind="softabs", alpha=alpha)
    raise ConfigError(f"metric.kind must be 'euclidean' or 'softabs', got {kind!r}")


def _parse_integrator(d: dict, target: TargetSpec, metric: MetricSpec) -> IntegratorSpec:
    d = _require_mapping(d, "integrator")
    _reject_unknown(d, {"step_size", "fp_tol", "fp_max_iters"}, "integrator")
    # Default step size: the stiff banana/SoftAbs setups need the finer grid.
    default_eps = 0.01 if (target.kind == "banana" or metric.kind == "softabs") else 0.1
    return IntegratorSpec(
        step_size=_number(d, "step_size", "integrator", default_eps, strict_min=0.0),
        fp_tol=_number(d, "fp_tol", "integrator", 1e-10, strict_min=0.0),
        fp_max_iters=_number(d, "fp_max_iters", "integrator", 100, minimum=1, integer=True),
    )


def _parse_criterion(d: dict) -> CriterionSpec:
    d = _require_mapping(d, "criterion")
    _reject_unknown(d, {"kind", "transient_guard_steps"}, "criterion")
    kind = d.get("kind", "generalized")
    if kind not in ("classic", "generalized"):
        raise ConfigError(f"criterion.kind must be 'classic' or 'generalized', got {kind!r}")
    return CriterionSpec(
        kind=kind,
        transient_guard_steps=_number(d, "transient_guard_steps", "criterion", 3, minimum=0, integer=True),
    )


def _parse_sampler(d: dict) -> SamplerSpec:
    d = _require_mapping(d, "sampler")
    _reject_unknown(
        d,
        {"n_draws", "seed", "max_depth", "min_depth_before_termination", "n_warmup_discard",
         "divergence_threshold"},
        "sampler",
    )
    max_depth = _number(d, "max_depth", "sampler", 10, minimum=1, integer=True)
    min_depth = _number(d, "min_depth_before_termination", "sampler", 2, minimum=0, integer=True)
    if min_depth >= max_depth:
        raise ConfigError(
            f"sampler.min_depth_before_termination ({min_depth}) must be < max_depth ({max_depth})"
        )
    return SamplerSpec(
        n_draws=_number(d, "n_draws", "sampler", 1000, minimum=1, integer=True),
        seed=_number(d, "seed", "sampler", 0, minimum=0, integer=True),
        max_depth=max_depth,
        min_depth_before_termination=min_depth,
        n_warmup_discard=_number(d, "n_warmup_discard", "sampler", 0, minimum=0, integer=True),
        divergence_threshold=_number(d, "divergence_threshold", "sampler", 1000.0, strict_min=0.0),
    )


def _parse_trajectory(d: dict, target: TargetSpec) -> TrajectorySpec:
    d = _require_mapping(d, "trajectory")
    _reject_unknown(d, {"n_steps", "q0", "p0", "seed"}, "trajectory")
    dim = target.dimension()
    default_q0 = (0.0, 3.0) if target.kind == "banana" else tuple(1.0 for _ in range(dim))
    q0 = _vector(d, "q0", "trajectory", default_q0)
    p0 = _vector(d, "p0", "trajectory", None)
    if len(q0) != dim:
        raise ConfigError(f"trajectory.q0 has dimension {len(q0)} but the target has {dim}")
    if p0 is not None and len(p0) != dim:
        raise ConfigError(f"trajectory.p0 has dimension {len(p0)} but the target has {dim}")
    return TrajectorySpec(
        n_steps=_number(d, "n_steps", "trajectory", 1000, minimum=0, integer=True),
        q0=q0,
        p0=p0,
        seed=_number(d, "seed", "trajectory", 0, minimum=0, integer=True),
    )


def _apply_overrides(raw: dict, overrides: dict) -> dict:
    merged = json.loads(json.dumps(raw))  # deep copy of plain JSON data
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = merged
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override '{dotted}': '{part}' is not an object")
        node[parts[-1]] = value
    return merged


def parse_config(text: str | None, mode: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse JSON config text for one CLI mode, applying dotted-path overrides.

    Raises :class:`ConfigError` with the offending line for malformed JSON and
    with the offending key path for unknown or out-of-range entries.
    """
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    if text is None or not text.strip():
        raw: dict = {}
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config parse error at line {err.lineno}: {err.msg}") from err
    raw = _require_mapping(raw, "config")
    if overrides:
        raw = _apply_overrides(raw, overrides)
    _reject_unknown(raw, {"target", "metric", "integrator", "criterion", "sampler", "trajectory"}, "")

    target = _parse_target(raw.get("target", {}))
    metric = _parse_metric(raw.get("metric", {}), target)
    integrator = _parse_integrator(raw.get("integrator", {}), target, metric)
    criterion = _parse_criterion(raw.get("criterion", {}))
    sampler = _parse_sampler(raw.get("sampler", {}))
    trajectory = _parse_trajectory(raw.get("trajectory", {}), target)
    return ExperimentConfig(
        mode=mode,
        target=target,
        metric=metric,
        integrator=integrator,
        criterion=criterion,
        sampler=sampler,
        trajectory=trajectory,
    )


def build_target(config: ExperimentConfig) -> TargetModel:
    spec = config.target
    if spec.kind == "gaussian":
        if spec.sigma is not None:
            try:
                return GaussianTarget(np.array(spec.sigma))
            except ValueError as err:
                raise ConfigError(f"target.sigma: {err}") from err
        return GaussianTarget.from_correlation(spec.rho)
    return BananaTarget(beta=spec.beta, sigma1=spec.sigma1, sigma2=spec.sigma2)


def build_metric(config: ExperimentConfig, target: TargetModel) -> Metric:
    spec = config.metric
    if spec.kind == "softabs":
        return SoftAbsMetric(target, alpha=spec.alpha)
    if spec.mass == "identity":
        return EuclideanMetric.identity(target.dim)
    if spec.mass == "sigma_inverse":
        return EuclideanMetric(target.precision)
    try:
        return EuclideanMetric(np.array(spec.mass))
    except ValueError as err:
        raise ConfigError(f"metric.mass: {err}") from err


def build_integrator_config(config: ExperimentConfig) -> IntegratorConfig:
    spec = config.integrator
    return IntegratorConfig(
        step_size=spec.step_size,
        fixed_point_tol=spec.fp_tol,
        fixed_point_max_iters=spec.fp_max_iters,
    )


def build_sampler_config(config: ExperimentConfig) -> SamplerConfig:
    spec = config.sampler
    return SamplerConfig(
        n_draws=spec.n_draws,
        seed=spec.seed,
        max_depth=spec.max_depth,
        min_depth_before_termination=spec.min_depth_before_termination,
        n_warmup_discard=spec.n_warmup_discard,
        criterion=config.criterion.kind,
        divergence_threshold=spec.divergence_threshold,
    )
