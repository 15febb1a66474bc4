"""Constrained architecture search: minimize the analytic MAC count of a
scaled descriptor subject to the blackbox accuracy staying at or above the
measured baseline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

from . import archmodel
from .archmodel import ArchDescriptor, ScalingMultipliers
from .engine import History, Incumbent, MINIMIZE, OptimizationProblem, optimize
from .errors import BaselineError, ConfigError
from .protocol import (
    AggregatedEval,
    BlackboxConfig,
    EvalResult,
    STATUS_OK,
    evaluate_aggregate,
)
from .space import SearchSpace, VariableSpec

MULTIPLIER_NAMES = ("depth", "width", "resolution")
IDENTITY = (1.0, 1.0, 1.0)

# blackboxes return mean validation accuracy; in-process callables may be
# used in place of a subprocess config
AccuracyFn = Callable[[Tuple[float, ...]], EvalResult]


@dataclass
class NasProblem:
    family: str
    blackbox: Union[BlackboxConfig, AccuracyFn]
    multiplier_bounds: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    accuracy_slack: float = 0.0
    baseline_accuracy: Optional[float] = None
    input_resolution: int = 32
    workers: int = 1

    def __post_init__(self):
        bounds = dict(self.multiplier_bounds)
        for name in MULTIPLIER_NAMES:
            bounds.setdefault(name, archmodel.DEFAULT_MULTIPLIER_BOUNDS)
        unknown = set(bounds) - set(MULTIPLIER_NAMES)
        if unknown:
            raise ConfigError(f"unknown multiplier bounds: {sorted(unknown)}")
        for name, (lo, hi) in bounds.items():
            if not lo <= 1.0 <= hi:
                raise ConfigError(f"{name} bounds must contain 1.0")
        self.multiplier_bounds = bounds
        if self.accuracy_slack < 0:
            raise ConfigError("accuracy_slack must be >= 0")
        if self.baseline_accuracy is not None and not 0 < self.baseline_accuracy <= 100:
            raise ConfigError("baseline accuracy must be in (0, 100]")

    def space(self) -> SearchSpace:
        return SearchSpace(
            tuple(
                VariableSpec(
                    name,
                    "continuous",
                    lower=self.multiplier_bounds[name][0],
                    upper=self.multiplier_bounds[name][1],
                    initial=1.0,
                )
                for name in MULTIPLIER_NAMES
            )
        )

    def base_descriptor(self) -> ArchDescriptor:
        return archmodel.baseline(self.family, self.input_resolution)

    def accuracy(self, point) -> EvalResult:
        if isinstance(self.blackbox, BlackboxConfig):
            return evaluate_aggregate(self.blackbox, self.space(), point, self.workers).mean
        return self.blackbox(point)


def scaled_descriptor(problem: NasProblem, point) -> ArchDescriptor:
    bounds = (
        min(lo for lo, _ in problem.multiplier_bounds.values()),
        max(hi for _, hi in problem.multiplier_bounds.values()),
    )
    return archmodel.scale(problem.base_descriptor(), ScalingMultipliers(*point), bounds)


def measure_baseline(problem: NasProblem) -> float:
    """Evaluate accuracy at the identity multipliers and store it as f0."""
    result = problem.accuracy(IDENTITY)
    if not result.ok or result.objective is None:
        raise BaselineError(f"baseline evaluation failed (status={result.status})")
    problem.baseline_accuracy = result.objective
    return result.objective


def nas_objective_and_constraint(problem: NasProblem, point) -> EvalResult:
    """Objective: exact MAC count of the scaled descriptor. Constraint:
    (f0 - slack) - mean accuracy, feasible iff <= 0."""
    if problem.baseline_accuracy is None:
        raise BaselineError("baseline accuracy not measured")
    acc = problem.accuracy(point)
    if not acc.ok or acc.objective is None:
        return EvalResult(status=acc.status, wall_time=acc.wall_time)
    macs = archmodel.mac_count(scaled_descriptor(problem, point))
    constraint = (problem.baseline_accuracy - problem.accuracy_slack) - acc.objective
    return EvalResult(
        objective=float(macs),
        constraints=(constraint,),
        status=STATUS_OK,
        wall_time=acc.wall_time,
    )


@dataclass(frozen=True)
class NasReport:
    family: str
    baseline_accuracy: float
    best_multipliers: Tuple[float, float, float]
    best_accuracy: float
    base_macs: int
    base_params: int
    best_macs: int
    best_params: int
    history: History

    @property
    def mac_ratio(self) -> float:
        return self.best_macs / self.base_macs

    @property
    def param_ratio(self) -> float:
        return self.best_params / self.base_params

    def to_text(self) -> str:
        d, w, r = self.best_multipliers
        return "\n".join(
            [
                f"family: {self.family}",
                f"baseline_accuracy: {self.baseline_accuracy:.6g}",
                f"best_multipliers: depth={d:.6g} width={w:.6g} resolution={r:.6g}",
                f"best_accuracy: {self.best_accuracy:.6g}",
                f"base_macs: {self.base_macs}",
                f"best_macs: {self.best_macs}",
                f"mac_ratio: {self.mac_ratio:.4f}",
                f"base_params: {self.base_params}",
                f"best_params: {self.best_params}",
                f"param_ratio: {self.param_ratio:.4f}",
                f"evaluations: {len(self.history)}",
            ]
        )


def run_nas(problem: NasProblem, **engine_config) -> NasReport:
    if problem.baseline_accuracy is None:
        measure_baseline(problem)
    base = problem.base_descriptor()
    base_macs = archmodel.mac_count(base)
    # the baseline evaluation doubles as the initial incumbent: seed the
    # engine cache so the identity point is never re-evaluated
    f0 = problem.baseline_accuracy
    prior = {
        IDENTITY: EvalResult(
            objective=float(base_macs),
            constraints=(-problem.accuracy_slack,),
            status=STATUS_OK,
        )
    }
    opt_problem = OptimizationProblem(
        space=problem.space(),
        evaluator=lambda p: nas_objective_and_constraint(problem, p),
        objective_sense=MINIMIZE,
        initial_point=IDENTITY,
        prior_results=prior,
        workers=problem.workers,
        **engine_config,
    )
    incumbent, history = optimize(opt_problem)
    best_desc = scaled_descriptor(problem, incumbent.point)
    constraint = incumbent.result.constraints[0]
    return NasReport(
        family=problem.family,
        baseline_accuracy=f0,
        best_multipliers=tuple(incumbent.point),
        best_accuracy=(f0 - problem.accuracy_slack) - constraint,
        base_macs=base_macs,
        base_params=archmodel.param_count(base),
        best_macs=archmodel.mac_count(best_desc),
        best_params=archmodel.param_count(best_desc),
        history=history,
    )
