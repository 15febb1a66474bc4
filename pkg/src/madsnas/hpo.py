"""Hyperparameter search over the mixed lr / weight-decay / optimizer /
batch-size space, maximizing blackbox validation accuracy.

The learning rate is searched on a log10 scale (600x dynamic range) but
crosses the wire as the plain effective value after the per-optimizer
adaptation rule, so trainers stay rule-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple, Union

from .engine import History, MAXIMIZE, OptimizationProblem, optimize
from .errors import ConfigError
from .protocol import BlackboxConfig, EvalResult, evaluate_aggregate
from .space import Point, SearchSpace, VariableSpec

LR_RANGE = (1e-3, 0.6)
WEIGHT_DECAYS = (0.0, 5e-5, 5e-4, 5e-3, 5e-2, 0.5)
OPTIMIZERS = ("Adadelta", "Adagrad", "SGD", "Adam", "AdamW", "Adamax", "ASGD")
BATCH_SIZES = (128, 256, 512)

# expected per-optimizer learning rates; SGD is the normalization anchor
REFERENCE_LR = {
    "Adadelta": 1.0,
    "Adagrad": 0.01,
    "SGD": 0.1,
    "Adam": 0.01,
    "AdamW": 0.01,
    "Adamax": 0.002,
    "ASGD": 0.01,
}

INITIAL = (0.1, 5e-4, "SGD", 128)


def effective_lr(optimizer: str, sampled_lr: float) -> float:
    """Rescale the sampled lr by the optimizer's expected lr relative to SGD."""
    if optimizer not in REFERENCE_LR:
        raise ConfigError(f"unknown optimizer {optimizer!r}")
    return sampled_lr * REFERENCE_LR[optimizer] / REFERENCE_LR["SGD"]


def search_space() -> SearchSpace:
    """Internal engine space: lr as log10(lr), the rest native."""
    return SearchSpace(
        (
            VariableSpec(
                "lr_log10",
                "continuous",
                lower=math.log10(LR_RANGE[0]),
                upper=math.log10(LR_RANGE[1]),
                initial=math.log10(INITIAL[0]),
            ),
            VariableSpec("weight_decay", "discrete_set", values=WEIGHT_DECAYS, initial=INITIAL[1]),
            VariableSpec("optimizer", "categorical", values=OPTIMIZERS, initial=INITIAL[2]),
            VariableSpec("batch_size", "discrete_set", values=BATCH_SIZES, initial=INITIAL[3]),
        )
    )


def wire_space() -> SearchSpace:
    """The space in which points cross the wire: effective lr, weight decay
    value, optimizer as 0-based index, batch size."""
    return SearchSpace(
        (
            VariableSpec("lr", "continuous", lower=0.0, upper=6.0, initial=INITIAL[0]),
            VariableSpec("weight_decay", "discrete_set", values=WEIGHT_DECAYS, initial=INITIAL[1]),
            VariableSpec(
                "optimizer_index",
                "discrete_set",
                values=tuple(range(len(OPTIMIZERS))),
                initial=OPTIMIZERS.index(INITIAL[2]),
            ),
            VariableSpec("batch_size", "discrete_set", values=BATCH_SIZES, initial=INITIAL[3]),
        )
    )


def decode(internal: Point) -> Tuple[float, float, int, int]:
    """Internal engine point -> wire point (eff_lr, wd, opt_index, batch)."""
    lr_log10, wd, optimizer, batch = internal
    sampled = 10.0 ** lr_log10
    return (effective_lr(optimizer, sampled), wd, OPTIMIZERS.index(optimizer), batch)


AccuracyFn = Callable[[Tuple[float, float, int, int]], EvalResult]


@dataclass(frozen=True)
class HpoReport:
    sampled_lr: float
    effective_lr: float
    weight_decay: float
    optimizer: str
    batch_size: int
    best_accuracy: float
    initial_accuracy: float
    history: History

    @property
    def improvement(self) -> float:
        return self.best_accuracy - self.initial_accuracy

    def to_text(self) -> str:
        return "\n".join(
            [
                f"sampled_lr: {self.sampled_lr:.6g}",
                f"effective_lr: {self.effective_lr:.6g}",
                f"weight_decay: {self.weight_decay:.6g}",
                f"optimizer: {self.optimizer}",
                f"batch_size: {self.batch_size}",
                f"best_accuracy: {self.best_accuracy:.6g}",
                f"initial_accuracy: {self.initial_accuracy:.6g}",
                f"improvement: {self.improvement:+.6g}",
                f"evaluations: {len(self.history)}",
            ]
        )


def run_hpo(
    blackbox: Union[BlackboxConfig, AccuracyFn], workers: int = 1, **engine_config
) -> HpoReport:
    space = search_space()
    wire = wire_space()

    def evaluator(internal: Point) -> EvalResult:
        wire_point = decode(internal)
        if isinstance(blackbox, BlackboxConfig):
            return evaluate_aggregate(blackbox, wire, wire_point, workers).mean
        return blackbox(wire_point)

    problem = OptimizationProblem(
        space=space,
        evaluator=evaluator,
        objective_sense=MAXIMIZE,
        workers=workers,
        **engine_config,
    )
    incumbent, history = optimize(problem)
    initial_accuracy = history.records[0].result.objective
    lr_log10, wd, optimizer, batch = incumbent.point
    sampled = 10.0 ** lr_log10
    return HpoReport(
        sampled_lr=sampled,
        effective_lr=effective_lr(optimizer, sampled),
        weight_decay=wd,
        optimizer=optimizer,
        batch_size=batch,
        best_accuracy=incumbent.result.objective,
        initial_accuracy=initial_accuracy,
        history=history,
    )
