"""Search-space declaration, point validation, and mesh coordinate mapping.

Points are plain tuples of native values, one entry per variable in
declaration order. Declaration order is the canonical coordinate order
everywhere (protocol files, history CSV).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence, Tuple

from .errors import ConfigError, DimensionError, KindError, MeshError

Point = Tuple[Any, ...]

CONTINUOUS = "continuous"
DISCRETE_SET = "discrete_set"
CATEGORICAL = "categorical"
_KINDS = (CONTINUOUS, DISCRETE_SET, CATEGORICAL)


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str
    lower: Optional[float] = None
    upper: Optional[float] = None
    values: Optional[tuple] = None
    initial: Any = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown variable kind {self.kind!r}")
        if self.kind == CONTINUOUS:
            if self.lower is None or self.upper is None:
                raise ConfigError(f"{self.name}: continuous needs lower/upper")
            if not self.lower < self.upper:
                raise ConfigError(f"{self.name}: lower must be < upper")
            if self.initial is None or not self.lower <= self.initial <= self.upper:
                raise ConfigError(f"{self.name}: initial out of bounds")
        else:
            if not self.values:
                raise ConfigError(f"{self.name}: values must be non-empty")
            if len(set(self.values)) != len(self.values):
                raise ConfigError(f"{self.name}: duplicate values")
            if self.initial not in self.values:
                raise ConfigError(f"{self.name}: initial not in values")
            object.__setattr__(self, "values", tuple(self.values))

    def contains(self, value) -> bool:
        if self.kind == CONTINUOUS:
            try:
                return self.lower <= value <= self.upper
            except TypeError:
                return False
        return value in self.values

    def index_of(self, value) -> int:
        return self.values.index(value)


@dataclass(frozen=True)
class SearchSpace:
    variables: Tuple[VariableSpec, ...]

    def __post_init__(self):
        if not self.variables:
            raise ConfigError("search space needs at least one variable")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate variable names")
        object.__setattr__(self, "variables", tuple(self.variables))

    @property
    def dimension(self) -> int:
        return len(self.variables)

    @property
    def names(self):
        return [v.name for v in self.variables]

    def initial_point(self) -> Point:
        return tuple(v.initial for v in self.variables)

    def _check_dimension(self, p: Sequence) -> None:
        if len(p) != len(self.variables):
            raise DimensionError(
                f"point has {len(p)} coordinates, space has {len(self.variables)}"
            )

    def validate(self, p: Point) -> bool:
        self._check_dimension(p)
        return all(v.contains(c) for v, c in zip(self.variables, p))

    def to_mesh_coords(self, p: Point, mesh, center: Point) -> Tuple[int, ...]:
        """Express ``p`` as integer mesh steps relative to ``center``."""
        self._check_dimension(p)
        self._check_dimension(center)
        coords = []
        for i, var in enumerate(self.variables):
            if var.kind == CONTINUOUS:
                step = mesh.mesh_size[i]
                if step == 0:
                    raise MeshError(f"zero mesh size for {var.name}")
                coords.append(round((p[i] - center[i]) / step))
            else:
                coords.append(var.index_of(p[i]) - var.index_of(center[i]))
        return tuple(coords)

    def from_mesh_coords(self, coords: Sequence[int], mesh, center: Point) -> Point:
        """Inverse of :meth:`to_mesh_coords`, clamped to bounds."""
        self._check_dimension(coords)
        self._check_dimension(center)
        out = []
        for i, var in enumerate(self.variables):
            if var.kind == CONTINUOUS:
                step = mesh.mesh_size[i]
                if step == 0:
                    raise MeshError(f"zero mesh size for {var.name}")
                value = center[i] + coords[i] * step
                out.append(min(var.upper, max(var.lower, value)))
            else:
                idx = var.index_of(center[i]) + coords[i]
                idx = min(len(var.values) - 1, max(0, idx))
                out.append(var.values[idx])
        return tuple(out)

    def categorical_neighbors(self, p: Point, var_name: str):
        """All points differing from ``p`` only in one categorical coordinate."""
        self._check_dimension(p)
        idx = self.names.index(var_name)
        var = self.variables[idx]
        if var.kind != CATEGORICAL:
            raise KindError(f"{var_name} is {var.kind}, not categorical")
        neighbors = []
        for value in var.values:
            if value != p[idx]:
                neighbors.append(p[:idx] + (value,) + p[idx + 1 :])
        return neighbors

    def categorical_names(self):
        return [v.name for v in self.variables if v.kind == CATEGORICAL]
