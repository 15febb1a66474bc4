"""Exact MAC and parameter counting for CIFAR-style ResNet-18 / SENet-18
families under depth, width, and resolution scaling.

Conventions: convolutions carry no bias; batch norm costs 0 MACs and 2*C
parameters; pooling, activations, and channel-wise scaling cost 0 MACs;
the squeeze-excite bottleneck is two 1x1 convolutions applied at spatial
size 1x1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Tuple

from .errors import BoundsError, ConfigError

DEFAULT_MULTIPLIER_BOUNDS = (0.25, 2.0)


def round_half_away(x: float) -> int:
    if x >= 0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))


def _scaled(value: int, mult: float) -> int:
    return max(1, round_half_away(value * mult))


@dataclass(frozen=True)
class ScalingMultipliers:
    depth: float
    width: float
    resolution: float

    def as_tuple(self):
        return (self.depth, self.width, self.resolution)


@dataclass(frozen=True)
class StageSpec:
    block_count: int
    out_channels: int
    first_stride: int


@dataclass(frozen=True)
class ConvSpec:
    kernel: int
    in_channels: int
    out_channels: int
    stride: int
    padding: int


@dataclass(frozen=True)
class ArchDescriptor:
    family: str
    input_resolution: int
    input_channels: int
    stem: ConvSpec
    stages: Tuple[StageSpec, ...]
    se_reduction: int
    classifier_classes: int

    def __post_init__(self):
        if self.family not in ("resnet18", "senet18"):
            raise ConfigError(f"unknown family {self.family!r}")
        if self.input_resolution < 1 or any(
            s.block_count < 1 or s.out_channels < 1 for s in self.stages
        ):
            raise ConfigError("channel counts, block counts, resolution must be >= 1")


def baseline(family: str, input_resolution: int = 32, classes: int = 10) -> ArchDescriptor:
    """The unscaled CIFAR-style 18-layer descriptor for a family."""
    return ArchDescriptor(
        family=family,
        input_resolution=input_resolution,
        input_channels=3,
        stem=ConvSpec(3, 3, 64, 1, 1),
        stages=(
            StageSpec(2, 64, 1),
            StageSpec(2, 128, 2),
            StageSpec(2, 256, 2),
            StageSpec(2, 512, 2),
        ),
        se_reduction=16,
        classifier_classes=classes,
    )


def scale(
    base: ArchDescriptor,
    m: ScalingMultipliers,
    bounds=DEFAULT_MULTIPLIER_BOUNDS,
) -> ArchDescriptor:
    """Apply depth/width/resolution multipliers with half-away-from-zero
    rounding, floored at 1. Input channels and class count are unchanged."""
    lo, hi = bounds
    for value in m.as_tuple():
        if not lo <= value <= hi:
            raise BoundsError(f"multiplier {value} outside [{lo}, {hi}]")
    stages = tuple(
        StageSpec(
            block_count=_scaled(s.block_count, m.depth),
            out_channels=_scaled(s.out_channels, m.width),
            first_stride=s.first_stride,
        )
        for s in base.stages
    )
    stem = replace(base.stem, out_channels=_scaled(base.stem.out_channels, m.width))
    return replace(
        base,
        input_resolution=_scaled(base.input_resolution, m.resolution),
        stem=stem,
        stages=stages,
    )


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


@dataclass(frozen=True)
class LayerCost:
    name: str
    output_shape: Tuple[int, int, int]  # (channels, height, width)
    macs: int
    params: int


def _conv_cost(name, spec: ConvSpec, h, w) -> LayerCost:
    ho = conv_output_size(h, spec.kernel, spec.stride, spec.padding)
    wo = conv_output_size(w, spec.kernel, spec.stride, spec.padding)
    macs = spec.kernel * spec.kernel * spec.in_channels * spec.out_channels * ho * wo
    params = spec.kernel * spec.kernel * spec.in_channels * spec.out_channels
    return LayerCost(name, (spec.out_channels, ho, wo), macs, params)


def _bn_cost(name, channels, h, w) -> LayerCost:
    return LayerCost(name, (channels, h, w), 0, 2 * channels)


def layer_table(a: ArchDescriptor) -> List[LayerCost]:
    """Flat per-layer cost breakdown in forward order."""
    layers: List[LayerCost] = []
    h = w = a.input_resolution

    def add_conv(name, spec):
        nonlocal h, w
        cost = _conv_cost(name, spec, h, w)
        layers.append(cost)
        _, h, w = cost.output_shape
        layers.append(_bn_cost(name + ".bn", spec.out_channels, h, w))

    add_conv("stem", a.stem)
    cin = a.stem.out_channels
    for si, stage in enumerate(a.stages, start=1):
        for bi in range(stage.block_count):
            stride = stage.first_stride if bi == 0 else 1
            cout = stage.out_channels
            prefix = f"stage{si}.block{bi}"
            in_h, in_w = h, w
            add_conv(f"{prefix}.conv1", ConvSpec(3, cin, cout, stride, 1))
            add_conv(f"{prefix}.conv2", ConvSpec(3, cout, cout, 1, 1))
            if stride != 1 or cin != cout:
                cost = _conv_cost(
                    f"{prefix}.shortcut", ConvSpec(1, cin, cout, stride, 0), in_h, in_w
                )
                layers.append(cost)
                layers.append(_bn_cost(f"{prefix}.shortcut.bn", cout, h, w))
            if a.family == "senet18":
                reduced = max(1, round_half_away(cout / a.se_reduction))
                layers.append(
                    _conv_cost(f"{prefix}.se_reduce", ConvSpec(1, cout, reduced, 1, 0), 1, 1)
                )
                layers.append(
                    _conv_cost(f"{prefix}.se_expand", ConvSpec(1, reduced, cout, 1, 0), 1, 1)
                )
            cin = cout
    layers.append(
        LayerCost(
            "classifier",
            (a.classifier_classes, 1, 1),
            cin * a.classifier_classes,
            cin * a.classifier_classes + a.classifier_classes,
        )
    )
    return layers


def mac_count(a: ArchDescriptor) -> int:
    return sum(layer.macs for layer in layer_table(a))


def param_count(a: ArchDescriptor) -> int:
    return sum(layer.params for layer in layer_table(a))


def ratios(base: ArchDescriptor, scaled: ArchDescriptor) -> Tuple[float, float]:
    """(mac_ratio, param_ratio) of a scaled descriptor versus its baseline."""
    if base.family != scaled.family:
        raise ConfigError("ratio requires descriptors of the same family")
    return (
        mac_count(scaled) / mac_count(base),
        param_count(scaled) / param_count(base),
    )
