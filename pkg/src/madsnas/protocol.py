"""Wire contract between the optimizer and blackbox subprocesses.

A blackbox is any command that reads a one-line point file, prints its
objective (and optional constraint values) as the last non-empty stdout
line, and exits 0. Nonzero exit signals a failed evaluation.
"""

from __future__ import annotations

import math
import os
import shlex
import signal
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional, Sequence, Tuple

from .errors import ConfigError, IoError
from .space import CATEGORICAL, CONTINUOUS, Point, SearchSpace

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_TIMEOUT = "timeout"

DEFAULT_TIMEOUT = 900.0  # safety net above the trainer's own 10-minute budget


@dataclass(frozen=True)
class EvalResult:
    objective: Optional[float] = None
    constraints: Tuple[float, ...] = ()
    status: str = STATUS_OK
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    @property
    def feasible(self) -> bool:
        return self.ok and all(c <= 0 for c in self.constraints)


def failed_result(wall_time: float = 0.0, status: str = STATUS_FAILED) -> EvalResult:
    return EvalResult(objective=None, constraints=(), status=status, wall_time=wall_time)


@dataclass(frozen=True)
class BlackboxConfig:
    command_template: str
    timeout: float = DEFAULT_TIMEOUT
    seeds: Tuple[int, ...] = (0,)
    working_dir: Optional[str] = None

    def __post_init__(self):
        if "{input}" not in self.command_template:
            raise ConfigError("command template must contain {input}")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        object.__setattr__(self, "seeds", tuple(self.seeds))

    @property
    def repetitions(self) -> int:
        return len(self.seeds)


@dataclass(frozen=True)
class AggregatedEval:
    mean: EvalResult
    per_seed: Tuple[EvalResult, ...]

    @property
    def ok(self) -> bool:
        return self.mean.ok

    @property
    def mean_objective(self) -> Optional[float]:
        return self.mean.objective


def format_number(value) -> str:
    """Plain decimal notation preserving at least 12 significant digits."""
    if isinstance(value, int):
        return str(value)
    return format(Decimal(f"{float(value):.12g}"), "f")


def format_point_line(space: SearchSpace, p: Point) -> str:
    tokens = []
    for var, value in zip(space.variables, p):
        if var.kind == CATEGORICAL:
            tokens.append(str(var.index_of(value)))
        else:
            tokens.append(format_number(value))
    return " ".join(tokens) + "\n"


def write_point_file(space: SearchSpace, p: Point, path: str) -> None:
    try:
        with open(path, "w") as fh:
            fh.write(format_point_line(space, p))
    except OSError as exc:
        raise IoError(f"cannot write point file {path}: {exc}") from exc


def parse_output(stdout: str, exit_code: int, timed_out: bool, wall_time: float = 0.0) -> EvalResult:
    """Total mapping from a finished invocation to an EvalResult."""
    if timed_out:
        return failed_result(wall_time, STATUS_TIMEOUT)
    if exit_code != 0:
        return failed_result(wall_time)
    lines = [line for line in stdout.splitlines() if line.strip()]
    if not lines:
        return failed_result(wall_time)
    tokens = lines[-1].split()
    try:
        values = [float(tok) for tok in tokens]
    except ValueError:
        return failed_result(wall_time)
    if not values or not all(math.isfinite(v) for v in values):
        return failed_result(wall_time)
    return EvalResult(
        objective=values[0],
        constraints=tuple(values[1:]),
        status=STATUS_OK,
        wall_time=wall_time,
    )


def run_blackbox(cfg: BlackboxConfig, space: SearchSpace, p: Point, seed: int) -> EvalResult:
    """One subprocess invocation: temp point file in, EvalResult out."""
    fd, path = tempfile.mkstemp(prefix="bbpoint_", suffix=".txt")
    os.close(fd)
    start = time.monotonic()
    try:
        write_point_file(space, p, path)
        command = cfg.command_template.replace("{input}", path).replace("{seed}", str(seed))
        argv = shlex.split(command)
        proc = subprocess.Popen(
            argv,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            cwd=cfg.working_dir,
            text=True,
            start_new_session=True,
        )
        try:
            stdout, _ = proc.communicate(timeout=cfg.timeout)
            timed_out = False
        except subprocess.TimeoutExpired:
            _kill_process_group(proc)
            stdout, _ = proc.communicate()
            timed_out = True
        except BaseException:
            _kill_process_group(proc)
            proc.communicate()
            raise
        return parse_output(stdout or "", proc.returncode, timed_out, time.monotonic() - start)
    except (OSError, ValueError):
        return failed_result(time.monotonic() - start)
    finally:
        try:
            os.unlink(path)
        except OSError:
            pass


def _kill_process_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass


def evaluate_aggregate(
    cfg: BlackboxConfig, space: SearchSpace, p: Point, workers: int = 1
) -> AggregatedEval:
    """Run the blackbox once per seed; all runs must succeed for a mean.

    One failed or timed-out seed fails the whole point: a partial mean would
    silently bias a feasibility constraint built on it.
    """
    if workers > 1 and len(cfg.seeds) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(cfg.seeds))) as pool:
            results = tuple(pool.map(lambda s: run_blackbox(cfg, space, p, s), cfg.seeds))
    else:
        results = tuple(run_blackbox(cfg, space, p, s) for s in cfg.seeds)
    wall = sum(r.wall_time for r in results)
    if not all(r.ok for r in results):
        status = STATUS_TIMEOUT if any(r.status == STATUS_TIMEOUT for r in results) else STATUS_FAILED
        return AggregatedEval(failed_result(wall, status), results)
    n_constraints = {len(r.constraints) for r in results}
    if len(n_constraints) != 1:
        return AggregatedEval(failed_result(wall), results)
    k = len(results)
    mean_obj = sum(r.objective for r in results) / k
    mean_cons = tuple(
        sum(r.constraints[i] for r in results) / k for i in range(n_constraints.pop())
    )
    return AggregatedEval(
        EvalResult(mean_obj, mean_cons, STATUS_OK, wall), results
    )


def check_protocol(cfg: BlackboxConfig, space: SearchSpace, p: Point) -> Tuple[bool, str]:
    """Validate a command against the blackbox contract with one canned point."""
    result = run_blackbox(cfg, space, p, seed=cfg.seeds[0])
    if result.status == STATUS_TIMEOUT:
        return False, f"timed out after {cfg.timeout}s"
    if not result.ok:
        return False, "command failed or produced no parseable objective line"
    return True, (
        f"objective={format_number(result.objective)}"
        + (f" constraints={len(result.constraints)}" if result.constraints else "")
    )
