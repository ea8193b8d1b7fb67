"""Virtual subjects: synthetic, deterministic stress functions over spiders.

Each subject is a weight vector sampled from the per-attribute impact-factor
distributions, truncated at zero, plus a scale coefficient chosen so the
subject's stress spans exactly [0, 10] over the state space. Subjects stand
in for human participants: stress is a pure linear function of the attribute
values, with no noise and no drift over time.

This module also hosts the brute-force oracles (success-set enumeration and
BFS shortest distance) that the tests and the CLI use to sanity-check the
adaptation methods.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .domain import (
    MAX_VALUES,
    IMPACT_MEANS,
    IMPACT_STDS,
    N_ATTRIBUTES,
    SpiderState,
    enumerate_states,
    is_valid_state,
    state_space,
)
from .reward_model import MAX_STRESS, is_success

MAX_STATE: SpiderState = tuple(MAX_VALUES)


@dataclass(frozen=True)
class VirtualSubject:
    """A sampled weight vector plus the scale factor for its stress function."""

    id: int
    weights: tuple[float, ...]
    coefficient: float


@dataclass(frozen=True)
class SubjectPopulation:
    seed: int
    subjects: tuple[VirtualSubject, ...]


def _weighted_max(weights: tuple[float, ...]) -> float:
    # Same accumulation order as stress() so the all-max state reproduces
    # this sum bit-for-bit.
    total = 0.0
    for i in range(N_ATTRIBUTES):
        total += weights[i] * MAX_VALUES[i]
    return total


def scale_coefficient(weights: tuple[float, ...]) -> float:
    """Scale factor mapping the all-max state to stress 10.

    Nudged down by at most a couple of ulps so that the rounded product
    never exceeds 10; stress values must stay inside the reward bounds.
    """
    total = _weighted_max(weights)
    c = MAX_STRESS / total
    while c * total > MAX_STRESS:
        c = math.nextafter(c, 0.0)
    return c


def sample_subject(subject_id: int, rng: np.random.Generator) -> VirtualSubject:
    """Draw one subject's weights from the impact-factor normals.

    Negative draws are rejected and redrawn, so weights are non-negative
    (the stress function must be monotone in every attribute).
    """
    weights = []
    for mean, std in zip(IMPACT_MEANS, IMPACT_STDS):
        w = rng.normal(mean, std)
        while w < 0.0:
            w = rng.normal(mean, std)
        weights.append(float(w))
    weights = tuple(weights)
    return VirtualSubject(id=subject_id, weights=weights, coefficient=scale_coefficient(weights))


def generate_population(n: int, seed: int) -> SubjectPopulation:
    """Sample ``n`` subjects deterministically from ``seed``.

    Subject ``i`` draws from its own stream derived from (seed, i), so the
    population is identical no matter how or in what order it is consumed.
    """
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    subjects = tuple(
        sample_subject(i, np.random.default_rng(np.random.SeedSequence([seed, i])))
        for i in range(n)
    )
    return SubjectPopulation(seed=seed, subjects=subjects)


def stress(subject: VirtualSubject, state: SpiderState) -> float:
    """Deterministic stress in [0, 10]: coefficient times the weighted sum."""
    if not is_valid_state(state):
        raise ValueError(f"invalid spider state: {state!r}")
    total = 0.0
    for i in range(N_ATTRIBUTES):
        total += subject.weights[i] * state[i]
    return subject.coefficient * total


@lru_cache(maxsize=4096)
def stress_table(subject: VirtualSubject) -> tuple[float, ...]:
    """Stress of every state, indexed like ``enumerate_states()``."""
    return tuple(stress(subject, s) for s in enumerate_states())


def success_states(subject: VirtualSubject, target: int) -> set[SpiderState]:
    """All states whose stress rounds to ``target`` (brute-force enumeration)."""
    if not 1 <= target <= 9:
        raise ValueError(f"target must be in 1..9, got {target!r}")
    return {s for s in enumerate_states() if is_success(stress(subject, s), target)}


def bfs_distance(subject: VirtualSubject, initial: SpiderState, target: int) -> int | None:
    """Length of the shortest one-step path from ``initial`` to a success state.

    Returns None when the subject has no success state for this target. Used
    as a lower-bound oracle: no adaptation method can present fewer than
    distance + 1 distinct spiders.
    """
    if not is_valid_state(initial):
        raise ValueError(f"invalid spider state: {initial!r}")
    space = state_space()
    table = stress_table(subject)
    ok = [is_success(x, target) for x in table]
    if not any(ok):
        return None
    start = space.index_of[initial]
    if ok[start]:
        return 0
    seen = bytearray(space.n_states)
    seen[start] = 1
    queue = deque([(start, 0)])
    while queue:
        idx, dist = queue.popleft()
        for nb in space.neighbor_ids[idx]:
            if seen[nb]:
                continue
            if ok[nb]:
                return dist + 1
            seen[nb] = 1
            queue.append((nb, dist + 1))
    return None  # unreachable: the move graph is connected


def save_population(population: SubjectPopulation, path: str | Path) -> bytes:
    """Write the subjects file and return its bytes (for digest printing)."""
    payload = {
        "seed": population.seed,
        "subjects": [
            {"id": s.id, "weights": list(s.weights), "coefficient": s.coefficient}
            for s in population.subjects
        ],
    }
    data = json.dumps(payload, indent=2).encode() + b"\n"
    Path(path).write_bytes(data)
    return data


class SubjectFileError(ValueError):
    """Raised when a subjects file is malformed or internally inconsistent."""


def load_population(path: str | Path) -> SubjectPopulation:
    """Read a subjects file back; validates ids and coefficient consistency."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SubjectFileError(f"cannot read subjects file {path}: {exc}") from exc
    try:
        seed = int(payload["seed"])
        entries = payload["subjects"]
        subjects = tuple(
            VirtualSubject(
                id=int(e["id"]),
                weights=tuple(float(w) for w in e["weights"]),
                coefficient=float(e["coefficient"]),
            )
            for e in entries
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SubjectFileError(f"malformed subjects file {path}: {exc}") from exc
    for i, s in enumerate(subjects):
        if s.id != i:
            raise SubjectFileError(f"subject ids must be 0..n-1, found {s.id} at position {i}")
        if len(s.weights) != N_ATTRIBUTES or any(w < 0 for w in s.weights):
            raise SubjectFileError(f"subject {s.id} has invalid weights")
        if abs(s.coefficient * _weighted_max(s.weights) - MAX_STRESS) > 1e-6:
            raise SubjectFileError(f"subject {s.id} coefficient does not scale stress to 10")
    return SubjectPopulation(seed=seed, subjects=subjects)
