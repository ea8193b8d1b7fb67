"""Adaptation policies: tabular Q-learning and the three search baselines.

All four methods optimise the same fitness (the reward of a state's stress)
and move through the same boundary-masked attribute graph. The Q-learning
agent learns online within a single session; the genetic algorithm evolves a
small population with midpoint crossover; greedy always moves to the best
neighbour; random search walks uniformly.

The public operations work on state tuples. The session runner calls the
index-based helpers (prefixed ``_``) with precomputed per-state fitness, but
those share the selection and update logic exactly, so the two views cannot
drift apart.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate

import numpy as np

from .domain import (
    ACTIONS,
    MAX_VALUES,
    MIN_VALUES,
    N_ACTIONS,
    N_ATTRIBUTES,
    N_STATES,
    Action,
    SpiderState,
    is_valid_action,
    neighbors,
    state_space,
    valid_actions,
)
from .reward_model import RewardSpec, reward
from .subjects import VirtualSubject, stress

POLICY_NAMES = ("random", "greedy", "ga", "rl_random", "rl_zero")


@dataclass
class RLConfig:
    """Q-learning hyperparameters.

    epsilon is the exploration rate of the action-selection policy. The
    learning rate and discount are conventional defaults; they are exposed
    here because sweeps over them are expected. ``init_mode`` selects the
    table initialisation for standalone tables; sessions derive it from the
    method name (rl_zero / rl_random). ``persist_across_runs`` keeps one
    table alive across the runs of a grid instead of starting fresh.
    """

    epsilon: float = 0.05
    learning_rate: float = 0.1
    discount: float = 0.9
    init_mode: str = "zero"
    persist_across_runs: bool = False

    def validate(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError(f"discount must be in [0, 1], got {self.discount}")
        if self.init_mode not in ("zero", "random"):
            raise ValueError(f"init_mode must be 'zero' or 'random', got {self.init_mode!r}")


@dataclass
class GAConfig:
    """Genetic algorithm parameters.

    Two parent pairs are sampled per generation, each producing
    ``children_per_pair`` offspring (2 keeps both crossover halves, 1 keeps
    only the first). ``early_stop_within_batch`` makes the session check for
    success after every single presentation inside a batch instead of only at
    batch boundaries.
    """

    population_size: int = 10
    mutation_prob: float = 0.1
    pairs_per_generation: int = 2
    children_per_pair: int = 2
    early_stop_within_batch: bool = False

    def validate(self) -> None:
        if self.population_size < 2:
            raise ValueError(f"population_size must be >= 2, got {self.population_size}")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ValueError(f"mutation_prob must be in [0, 1], got {self.mutation_prob}")
        if self.pairs_per_generation < 1:
            raise ValueError("pairs_per_generation must be >= 1")
        if self.children_per_pair not in (1, 2):
            raise ValueError("children_per_pair must be 1 or 2")


class QTable:
    """Dense (state, nominal action) value table.

    Entries for boundary-masked actions exist but are never read or written;
    selection and updates only ever touch valid action ids.
    """

    def __init__(self, values: np.ndarray) -> None:
        if values.shape != (N_STATES, N_ACTIONS):
            raise ValueError(f"Q-table must be {N_STATES}x{N_ACTIONS}, got {values.shape}")
        self.values = values

    @classmethod
    def zeros(cls) -> "QTable":
        return cls(np.zeros((N_STATES, N_ACTIONS)))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "QTable":
        return cls(rng.random((N_STATES, N_ACTIONS)))

    @classmethod
    def create(cls, init_mode: str, rng: np.random.Generator) -> "QTable":
        if init_mode == "zero":
            return cls.zeros()
        if init_mode == "random":
            return cls.random(rng)
        raise ValueError(f"unknown init_mode {init_mode!r}")


def fitness(subject: VirtualSubject, state: SpiderState, spec: RewardSpec) -> float:
    """Fitness of a state for a subject: the reward of its stress level."""
    return reward(stress(subject, state), spec)


# ---------------------------------------------------------------------------
# Q-learning


def _select_action_id(
    q: np.ndarray,
    s: int,
    valid_ids: list[int],
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy over the valid actions; argmax ties break uniformly."""
    if epsilon > 0.0 and rng.random() < epsilon:
        return valid_ids[int(rng.integers(len(valid_ids)))]
    row = q[s]
    best = None
    ties: list[int] = []
    for aid in valid_ids:
        v = row[aid]
        if best is None or v > best:
            best = v
            ties = [aid]
        elif v == best:
            ties.append(aid)
    if len(ties) == 1:
        return ties[0]
    return ties[int(rng.integers(len(ties)))]


def _update_q(
    q: np.ndarray,
    s: int,
    aid: int,
    r: float,
    s_next: int,
    next_valid_ids: list[int],
    learning_rate: float,
    discount: float,
) -> None:
    row = q[s_next]
    best_next = max(row[aid2] for aid2 in next_valid_ids)
    q[s, aid] += learning_rate * (r + discount * best_next - q[s, aid])


def rl_select_action(
    qtable: QTable,
    state: SpiderState,
    epsilon: float,
    rng: np.random.Generator,
) -> Action:
    """Pick a valid action epsilon-greedily from the Q-table."""
    space = state_space()
    s = space.index_of[state]
    aid = _select_action_id(qtable.values, s, space.valid_action_ids[s], epsilon, rng)
    return ACTIONS[aid]


def rl_update(
    qtable: QTable,
    s: SpiderState,
    a: Action,
    r: float,
    s_next: SpiderState,
    cfg: RLConfig,
) -> None:
    """One-step Q-learning update; touches exactly one table entry."""
    if not is_valid_action(s, a):
        raise ValueError(f"action {a!r} is not valid in state {s!r}")
    space = state_space()
    si, sn = space.index_of[s], space.index_of[s_next]
    _update_q(
        qtable.values, si, a.index, r, sn, space.valid_action_ids[sn],
        cfg.learning_rate, cfg.discount,
    )


# ---------------------------------------------------------------------------
# Genetic algorithm


def ga_initial_population(
    initial: SpiderState,
    subject: VirtualSubject,
    spec: RewardSpec,
    population_size: int = 10,
) -> list[SpiderState]:
    """Seed population: the initial state plus its neighbours.

    Corner states yield fewer candidates than the population size and the
    population is simply smaller; the two 11-neighbour states yield one
    candidate too many, and the weakest by fitness is dropped.
    """
    candidates = [initial] + neighbors(initial)
    if len(candidates) <= population_size:
        return candidates
    ranked = sorted(range(len(candidates)),
                    key=lambda i: fitness(subject, candidates[i], spec),
                    reverse=True)
    keep = set(ranked[:population_size])
    return [c for i, c in enumerate(candidates) if i in keep]


def _pick_weighted(cum: list[float], total: float, n: int, rng: np.random.Generator) -> int:
    if total > 0.0:
        return min(bisect_right(cum, rng.random() * total), n - 1)
    return int(rng.integers(n))  # degenerate: every fitness at the -1 floor


def _mutate(child: SpiderState, prob: float, rng: np.random.Generator) -> SpiderState:
    if prob > 0.0 and rng.random() < prob:
        i = int(rng.integers(N_ATTRIBUTES))
        value = int(rng.integers(MIN_VALUES[i], MAX_VALUES[i] + 1))
        child = child[:i] + (value,) + child[i + 1:]
    return child


def ga_generation(
    population: list[SpiderState],
    fitnesses: list[float],
    cfg: GAConfig,
    rng: np.random.Generator,
) -> list[SpiderState]:
    """Produce one generation of offspring by crossover and mutation.

    Parents are drawn fitness-proportionally after shifting fitness by +1
    (raw fitness lies in [-1, 1]). Each pair is crossed at the midpoint:
    one child takes the first half of the attributes from the first parent
    and the second half from the other, its sibling the converse. Mutation
    re-rolls one uniformly chosen attribute to a uniformly chosen valid
    value with probability ``mutation_prob``.
    """
    if not population:
        raise ValueError("population must be non-empty")
    if len(fitnesses) != len(population):
        raise ValueError("fitnesses must align with the population")
    n = len(population)
    half = N_ATTRIBUTES // 2
    cum = list(accumulate(f + 1.0 for f in fitnesses))
    total = cum[-1]
    offspring: list[SpiderState] = []
    for _ in range(cfg.pairs_per_generation):
        p1 = population[_pick_weighted(cum, total, n, rng)]
        p2 = population[_pick_weighted(cum, total, n, rng)]
        children = [p1[:half] + p2[half:], p2[:half] + p1[half:]]
        for child in children[: cfg.children_per_pair]:
            offspring.append(_mutate(child, cfg.mutation_prob, rng))
    return offspring


def ga_select(
    pool: list[SpiderState],
    fitnesses: list[float],
    cfg: GAConfig,
) -> list[SpiderState]:
    """Keep the best chromosomes as the next population.

    Ties break toward earlier pool positions (stable sort); duplicates may
    survive together.
    """
    if not pool:
        raise ValueError("selection pool must be non-empty")
    if len(fitnesses) != len(pool):
        raise ValueError("fitnesses must align with the pool")
    ranked = sorted(range(len(pool)), key=lambda i: -fitnesses[i])
    keep = sorted(ranked[: cfg.population_size])
    return [pool[i] for i in keep]


# ---------------------------------------------------------------------------
# Greedy and random search


def greedy_step(
    current: SpiderState,
    subject: VirtualSubject,
    spec: RewardSpec,
) -> SpiderState:
    """Move to the best-fitness neighbour, even when that is downhill.

    Ties break toward the lower-indexed action. Pure function: ranking never
    consults any randomness.
    """
    best_state: SpiderState | None = None
    best_fit = None
    for nb in neighbors(current):
        f = fitness(subject, nb, spec)
        if best_fit is None or f > best_fit:
            best_fit = f
            best_state = nb
    assert best_state is not None
    return best_state


def random_step(current: SpiderState, rng: np.random.Generator) -> SpiderState:
    """Apply a uniformly random valid action."""
    options = valid_actions(current)
    action = options[int(rng.integers(len(options)))]
    values = list(current)
    values[action.attribute_index] += action.direction
    return tuple(values)
