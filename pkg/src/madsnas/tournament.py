"""Baseline-selection tournament: run each candidate blackbox once per seed,
rank by mean accuracy, pick the top m."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

from .errors import ConfigError
from .protocol import BlackboxConfig, run_blackbox
from .space import SearchSpace, VariableSpec

# candidates are evaluated at a fixed dummy point ("0"); their trainers carry
# their own hyperparameters and only consume the seed
_DUMMY_SPACE = SearchSpace(
    (VariableSpec("x0", "continuous", lower=0.0, upper=1.0, initial=0.0),)
)
_DUMMY_POINT = (0.0,)

SeedFn = Callable[[int], float]


@dataclass(frozen=True)
class Candidate:
    name: str
    blackbox: Union[BlackboxConfig, SeedFn]


@dataclass(frozen=True)
class RankingEntry:
    name: str
    mean_accuracy: Optional[float]
    per_seed: Tuple[Optional[float], ...]
    failures: int


def _evaluate_candidate(candidate: Candidate, seeds: Sequence[int]) -> RankingEntry:
    values: List[Optional[float]] = []
    for seed in seeds:
        if isinstance(candidate.blackbox, BlackboxConfig):
            result = run_blackbox(candidate.blackbox, _DUMMY_SPACE, _DUMMY_POINT, seed)
            values.append(result.objective if result.ok else None)
        else:
            try:
                values.append(float(candidate.blackbox(seed)))
            except Exception:
                values.append(None)
    successes = [v for v in values if v is not None]
    mean = sum(successes) / len(successes) if successes else None
    return RankingEntry(candidate.name, mean, tuple(values), len(values) - len(successes))


def run_tournament(
    candidates: Sequence[Candidate], seeds: Sequence[int], workers: int = 1
) -> List[RankingEntry]:
    """Rank candidates by mean accuracy over the shared seed list.

    Candidates with any failed run rank below all fully-successful ones;
    ties break by declaration order.
    """
    if not candidates:
        raise ConfigError("at least one candidate is required")
    if not seeds:
        raise ConfigError("at least one seed is required")
    names = [c.name for c in candidates]
    if len(set(names)) != len(names):
        raise ConfigError("candidate names must be unique")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(lambda c: _evaluate_candidate(c, seeds), candidates))
    else:
        entries = [_evaluate_candidate(c, seeds) for c in candidates]
    order = {name: i for i, name in enumerate(names)}

    def key(entry: RankingEntry):
        mean = entry.mean_accuracy if entry.mean_accuracy is not None else float("-inf")
        return (entry.failures > 0, -mean, order[entry.name])

    return sorted(entries, key=key)


def select_top(ranking: Sequence[RankingEntry], m: int) -> List[str]:
    if not 1 <= m <= len(ranking):
        raise ConfigError(f"m={m} out of range for {len(ranking)} candidates")
    return [entry.name for entry in ranking[:m]]
