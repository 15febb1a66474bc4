"""Analytic blackboxes with known optima for exercising the optimizer stack.

All constants here (the 77.0 baseline accuracy, the 87.8 peak at
lr=0.042 / wd=0.005 / SGD / batch 512) are constructed test fixtures, not
training results.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, Sequence

from .errors import ConfigError, DimensionError

KINDS = ("quadratic", "nas_accuracy", "hpo_accuracy", "constant", "failing")

# SGD sits at index 2 of the declared optimizer list (see hpo module)
HPO_DEFAULTS = {
    "peak": 87.8,
    "lr_center": 0.042,
    "lr_coeff": 40.0,
    "wd_center": 0.005,
    "wd_penalty": 10.0,
    "opt_index": 2,
    "opt_penalty": 2.0,
    "bs_center": 512.0,
    "bs_penalty": 1.0,
}

NAS_DEFAULTS = {"scale": 77.0}


class SurrogateFailure(Exception):
    """Raised by the failing surrogate; maps to a nonzero exit on the wire."""


@dataclass(frozen=True)
class SurrogateSpec:
    kind: str
    parameters: Dict[str, object] = field(default_factory=dict)
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown surrogate kind {self.kind!r}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")


def eval_surrogate(spec: SurrogateSpec, p: Sequence[float], seed: int = 0) -> float:
    params = spec.parameters
    if spec.kind == "quadratic":
        center = params.get("center", [0.0])
        coeffs = params.get("coeffs", [1.0] * len(center))
        if len(p) != len(center) or len(coeffs) != len(center):
            raise DimensionError(f"quadratic expects {len(center)} coordinates")
        value = params.get("offset", 0.0) + sum(
            a * (x - c) ** 2 for a, x, c in zip(coeffs, p, center)
        )
    elif spec.kind == "nas_accuracy":
        if len(p) != 3:
            raise DimensionError("nas_accuracy expects (depth, width, resolution)")
        _, w, r = p
        scale = params.get("scale", NAS_DEFAULTS["scale"])
        value = scale * min(1.0, 0.6 + 0.5 * w) * min(1.0, 0.8 + 0.2 * r)
    elif spec.kind == "hpo_accuracy":
        if len(p) != 4:
            raise DimensionError("hpo_accuracy expects (lr, wd, opt_index, batch)")
        cfg = {**HPO_DEFAULTS, **params}
        lr, wd, opt, bs = p
        value = cfg["peak"] - cfg["lr_coeff"] * (lr - cfg["lr_center"]) ** 2
        if abs(wd - cfg["wd_center"]) > 1e-12:
            value -= cfg["wd_penalty"]
        if round(opt) != cfg["opt_index"]:
            value -= cfg["opt_penalty"]
        if abs(bs - cfg["bs_center"]) > 1e-9:
            value -= cfg["bs_penalty"]
    elif spec.kind == "constant":
        value = params.get("value", 0.0)
    else:  # failing
        prob = params.get("fail_prob", 1.0)
        if random.Random(seed).random() < prob:
            raise SurrogateFailure(f"configured failure for seed {seed}")
        value = params.get("value", 0.0)
    if spec.noise_sigma > 0:
        rng = random.Random((seed, tuple(float(x) for x in p)).__repr__())
        value += rng.gauss(0.0, spec.noise_sigma)
    return value
