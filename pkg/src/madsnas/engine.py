"""Mesh adaptive direct search with extreme-barrier constraint handling.

The engine minimizes (or maximizes) a blackbox objective over a mixed
search space by alternating a speculative search step with a poll over a
positive spanning set of orthogonal integer directions. Infeasible or
failed evaluations are rejected outright (barrier value +inf), so every
incumbent ever reported is feasible. All evaluations are cached on exact
coordinates and logged to an append-only history.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, InfeasibleStartError
from .protocol import EvalResult, STATUS_OK
from .space import CONTINUOUS, Point, SearchSpace

MINIMIZE = "minimize"
MAXIMIZE = "maximize"

INF = float("inf")


@dataclass
class MeshState:
    frame_size: List[float]
    mesh_size: List[float] = field(default_factory=list)
    iteration: int = 0

    def __post_init__(self):
        if not self.mesh_size:
            self.mesh_size = [min(p, p * p) for p in self.frame_size]


def initial_frame_sizes(space: SearchSpace) -> List[float]:
    """Quarter of the range for continuous variables; the full index range
    for discrete/categorical axes so any value is reachable in one poll."""
    sizes = []
    for var in space.variables:
        if var.kind == CONTINUOUS:
            sizes.append((var.upper - var.lower) / 4.0)
        else:
            sizes.append(max(1.0, float(len(var.values) - 1)))
    return sizes


def update_mesh(mesh: MeshState, success: bool, initial: Sequence[float]) -> MeshState:
    """Expand the frame on success (capped at its initial size), halve on
    failure; the mesh size always tracks min(frame, frame^2)."""
    if success:
        frame = [min(2 * p, p0) for p, p0 in zip(mesh.frame_size, initial)]
    else:
        frame = [p / 2 for p in mesh.frame_size]
    return MeshState(
        frame_size=frame,
        mesh_size=[min(p, p * p) for p in frame],
        iteration=mesh.iteration + 1,
    )


def poll_directions(n: int, mesh: MeshState, rng: np.random.Generator) -> List[Tuple[int, ...]]:
    """2n positive-spanning directions {d1,-d1,...,dn,-dn}.

    The di are mutually orthogonal integer vectors built from a Householder
    reflector of a seeded pseudo-random vector, scaled so every entry stays
    within floor(frame/mesh) steps of the frame center. If no integer
    Householder matrix fits the frame, falls back to signed coordinate
    directions (always valid).
    """
    limits = [max(1, int(p / m + 1e-9)) for p, m in zip(mesh.frame_size, mesh.mesh_size)]
    basis = _householder_basis(n, min(limits), limits, rng)
    directions: List[Tuple[int, ...]] = []
    for column in basis:
        directions.append(tuple(int(v) for v in column))
        directions.append(tuple(-int(v) for v in column))
    return directions


def _householder_basis(n, target, limits, rng):
    u = rng.standard_normal(n)
    norm = np.linalg.norm(u)
    u = u / norm if norm > 0 else np.eye(n)[0]
    alpha = math.sqrt(target)
    while alpha >= 1.0:
        q = np.rint(alpha * u).astype(np.int64)
        if np.any(q):
            h = int(q @ q) * np.eye(n, dtype=np.int64) - 2 * np.outer(q, q)
            columns = []
            fits = True
            for i in range(n):
                col = h[:, i]
                g = int(np.gcd.reduce(np.abs(col)))
                if g > 1:
                    col = col // g
                if any(abs(int(col[j])) > limits[j] for j in range(n)):
                    fits = False
                    break
                columns.append(col)
            if fits:
                return columns
        alpha /= 2.0
    return [np.eye(n, dtype=np.int64)[:, i] for i in range(n)]


def _axis_directions(mesh: MeshState) -> List[Tuple[int, ...]]:
    n = len(mesh.frame_size)
    limits = [max(1, int(p / m + 1e-9)) for p, m in zip(mesh.frame_size, mesh.mesh_size)]
    directions = []
    for j in range(n):
        d = [0] * n
        d[j] = limits[j]
        directions.append(tuple(d))
        directions.append(tuple(-v for v in d))
    return directions


@dataclass(frozen=True)
class EvaluationRecord:
    eval_id: int
    point: Point
    result: EvalResult


class History:
    """Append-only log of every evaluator invocation."""

    def __init__(self, var_names: Sequence[str]):
        self.var_names = list(var_names)
        self.records: List[EvaluationRecord] = []

    def append(self, point: Point, result: EvalResult) -> EvaluationRecord:
        record = EvaluationRecord(len(self.records) + 1, point, result)
        self.records.append(record)
        return record

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def n_constraints(self) -> int:
        return max((len(r.result.constraints) for r in self.records), default=0)

    def write_csv(self, path: str) -> None:
        m = self.n_constraints()
        header = (
            ["eval_id"]
            + self.var_names
            + ["objective"]
            + [f"constraint_{i + 1}" for i in range(m)]
            + ["status", "wall_time_s"]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for r in self.records:
                cons = list(r.result.constraints) + [""] * (m - len(r.result.constraints))
                obj = "" if r.result.objective is None else repr(r.result.objective)
                writer.writerow(
                    [r.eval_id]
                    + [_csv_value(v) for v in r.point]
                    + [obj]
                    + [c if c == "" else repr(c) for c in cons]
                    + [r.result.status, f"{r.result.wall_time:.6f}"]
                )


def _csv_value(v):
    return repr(v) if isinstance(v, float) else v


@dataclass(frozen=True)
class Incumbent:
    point: Point
    result: EvalResult


@dataclass
class OptimizationProblem:
    space: SearchSpace
    evaluator: Callable[[Point], EvalResult]
    objective_sense: str = MINIMIZE
    max_evaluations: int = 200
    min_frame_size: float = 1e-7
    seed: int = 0
    opportunistic: bool = True
    initial_search_points: int = 0
    workers: int = 1
    initial_point: Optional[Point] = None
    frame_sizes: Optional[List[float]] = None
    prior_results: Optional[Dict[Point, EvalResult]] = None

    def __post_init__(self):
        if self.max_evaluations < 1:
            raise ConfigError("max_evaluations must be >= 1")
        if self.min_frame_size <= 0:
            raise ConfigError("min_frame_size must be positive")
        if self.objective_sense not in (MINIMIZE, MAXIMIZE):
            raise ConfigError(f"unknown objective sense {self.objective_sense!r}")


class _BudgetExhausted(Exception):
    pass


class MadsOptimizer:
    def __init__(self, problem: OptimizationProblem):
        self.problem = problem
        self.space = problem.space
        self.history = History(self.space.names)
        self.cache: Dict[Point, EvalResult] = dict(problem.prior_results or {})
        self.sign = 1.0 if problem.objective_sense == MINIMIZE else -1.0
        self.invocations = 0

    # -- barrier ----------------------------------------------------------

    def barrier_value(self, result: EvalResult) -> float:
        if not result.feasible or result.objective is None:
            return INF
        return self.sign * result.objective

    def evaluate_with_barrier(self, point: Point) -> EvalResult:
        cached = self.cache.get(point)
        if cached is not None:
            return cached
        if self.invocations >= self.problem.max_evaluations:
            raise _BudgetExhausted
        self.invocations += 1
        start = time.monotonic()
        try:
            result = self.problem.evaluator(point)
        except Exception:
            result = EvalResult(status="failed", wall_time=time.monotonic() - start)
        self.cache[point] = result
        self.history.append(point, result)
        return result

    # -- candidate construction -------------------------------------------

    def _candidate(self, center: Point, direction: Sequence[int], mesh: MeshState) -> Point:
        coords = []
        for j, var in enumerate(self.space.variables):
            if var.kind == CONTINUOUS:
                coords.append(int(direction[j]))
            else:
                # index offset truncated toward zero so it stays within frame
                coords.append(int(mesh.mesh_size[j] * direction[j]))
        return self.space.from_mesh_coords(coords, mesh, center)

    # -- main loop ---------------------------------------------------------

    def optimize(self) -> Tuple[Incumbent, History]:
        problem = self.problem
        p0 = problem.initial_point or self.space.initial_point()
        if not self.space.validate(p0):
            raise InfeasibleStartError(f"initial point {p0} is not in the space")
        initial_frames = list(problem.frame_sizes or initial_frame_sizes(self.space))
        mesh = MeshState(frame_size=list(initial_frames))

        r0 = self.evaluate_with_barrier(p0)
        if self.barrier_value(r0) == INF:
            raise InfeasibleStartError(
                f"initial point {p0} is infeasible or failed (status={r0.status})"
            )
        incumbent = Incumbent(p0, r0)
        last_direction: Optional[Tuple[int, ...]] = None
        categorical_vars = self.space.categorical_names()

        if problem.initial_search_points > 0:
            incumbent = self._latin_hypercube_search(incumbent, mesh)

        try:
            while self.invocations < problem.max_evaluations and any(
                p >= problem.min_frame_size for p in mesh.frame_size
            ):
                rng = np.random.default_rng([problem.seed, mesh.iteration])
                success_dir = None
                improved = None

                if last_direction is not None:
                    cand = self._candidate(incumbent.point, last_direction, mesh)
                    if cand != incumbent.point and self._improves(cand, incumbent):
                        improved, success_dir = cand, last_direction

                if improved is None:
                    directions = poll_directions(self.space.dimension, mesh, rng)
                    improved, success_dir = self._poll(incumbent, directions, mesh)

                if improved is None:
                    # full-frame axis steps escape plateaus (e.g. rounded
                    # block counts) that the scaled Householder set cannot
                    # jump once its entries couple axes
                    improved, success_dir = self._poll(
                        incumbent, _axis_directions(mesh), mesh
                    )

                if improved is None and all(
                    p <= p0 / 8 for p, p0 in zip(mesh.frame_size, initial_frames)
                ):
                    # range-scale probe once the frame has collapsed: half-
                    # and quarter-range coordinate jumps, snapped to the mesh;
                    # rescues incumbents trapped farther from a plateau edge
                    # than one frame can reach
                    improved = self._range_probe(incumbent, mesh)
                    success_dir = None

                if improved is None and categorical_vars:
                    improved = self._extended_poll(incumbent, categorical_vars)
                    success_dir = None

                if improved is not None:
                    incumbent = Incumbent(improved, self.cache[improved])
                    last_direction = success_dir
                mesh = update_mesh(mesh, improved is not None, initial_frames)
        except _BudgetExhausted:
            pass
        return incumbent, self.history

    def _latin_hypercube_search(self, incumbent: Incumbent, mesh: MeshState) -> Incumbent:
        """Seeded latin-hypercube sample evaluated before the first poll;
        samples are snapped to the initial mesh around the starting point."""
        k = self.problem.initial_search_points
        rng = np.random.default_rng([self.problem.seed, 0x5EA2C])
        center = incumbent.point
        samples = []
        columns = []
        for var in self.space.variables:
            if var.kind == CONTINUOUS:
                cells = rng.permutation(k)
                columns.append(
                    [var.lower + (c + u) / k * (var.upper - var.lower)
                     for c, u in zip(cells, rng.random(k))]
                )
            else:
                columns.append([var.values[i] for i in rng.integers(0, len(var.values), k)])
        for row in zip(*columns):
            coords = self.space.to_mesh_coords(tuple(row), mesh, center)
            samples.append(self.space.from_mesh_coords(coords, mesh, center))
        for point in samples:
            try:
                result = self.evaluate_with_barrier(point)
            except _BudgetExhausted:
                break
            if self.barrier_value(result) < self.barrier_value(incumbent.result):
                incumbent = Incumbent(point, result)
        return incumbent

    def _improves(self, candidate: Point, incumbent: Incumbent) -> bool:
        result = self.evaluate_with_barrier(candidate)
        return self.barrier_value(result) < self.barrier_value(incumbent.result)

    def _poll(self, incumbent, directions, mesh):
        candidates = []
        seen = {incumbent.point}
        for d in directions:
            cand = self._candidate(incumbent.point, d, mesh)
            if cand not in seen:
                seen.add(cand)
                candidates.append((cand, d))
        if self.problem.workers > 1:
            return self._poll_parallel(incumbent, candidates)
        best = None
        for cand, d in candidates:
            if self._improves(cand, incumbent):
                best = (cand, d)
                if self.problem.opportunistic:
                    return best
                incumbent = Incumbent(cand, self.cache[cand])
        return best if best else (None, None)

    def _poll_parallel(self, incumbent, candidates):
        # evaluate in chunks, commit results in candidate order
        chunk = self.problem.workers
        best = None
        for start in range(0, len(candidates), chunk):
            batch = candidates[start : start + chunk]
            with ThreadPoolExecutor(max_workers=chunk) as pool:
                list(pool.map(lambda cd: self._safe_eval(cd[0]), batch))
            for cand, d in batch:
                result = self.cache.get(cand)
                if result is None:
                    continue
                if self.barrier_value(result) < self.barrier_value(incumbent.result):
                    if best is None or self.barrier_value(result) < self.barrier_value(
                        self.cache[best[0]]
                    ):
                        best = (cand, d)
            if best and self.problem.opportunistic:
                return best
        return best if best else (None, None)

    def _safe_eval(self, point):
        try:
            self.evaluate_with_barrier(point)
        except _BudgetExhausted:
            pass

    def _range_probe(self, incumbent, mesh):
        candidates = []
        for j, var in enumerate(self.space.variables):
            if var.kind != CONTINUOUS:
                continue
            step = mesh.mesh_size[j]
            span = var.upper - var.lower
            for offset in (span / 2, -span / 2, span / 4, -span / 4):
                coords = [0] * self.space.dimension
                coords[j] = round(offset / step)
                cand = self.space.from_mesh_coords(coords, mesh, incumbent.point)
                if cand != incumbent.point:
                    candidates.append(cand)
        for cand in candidates:
            if self._improves(cand, incumbent):
                return cand
        return None

    def _extended_poll(self, incumbent, categorical_vars):
        for name in categorical_vars:
            for cand in self.space.categorical_neighbors(incumbent.point, name):
                if self._improves(cand, incumbent):
                    return cand
        return None


def optimize(problem: OptimizationProblem) -> Tuple[Incumbent, History]:
    return MadsOptimizer(problem).optimize()
