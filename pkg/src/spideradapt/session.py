"""One adaptation session: a policy searches for a subject's target stress.

A session presents spiders to a subject until one lands in the target stress
band or an iteration cap is hit. Presentations are counted uniquely: showing
a configuration the subject has already seen is free, because its response is
already known. Sequential methods present one new state per move (greedy
presents every unseen neighbour while ranking them); the genetic algorithm
presents populations batch-wise and checks for success at batch boundaries.

Every run owns an rng stream derived from the full run coordinates, so
results are bit-reproducible regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .domain import SpiderState, state_space
from .policies import (
    GAConfig,
    POLICY_NAMES,
    QTable,
    RLConfig,
    _select_action_id,
    _update_q,
    ga_generation,
    ga_initial_population,
    ga_select,
)
from .reward_model import RewardSpec, is_success, reward
from .subjects import VirtualSubject, stress_table

INITIAL_KINDS = ("min", "avg", "max")
INITIAL_STATES: dict[str, SpiderState] = {
    "min": (0, 0, 0, 0, 0, 0),
    # midpoint of every range; the binary hairiness attribute uses the lower one
    "avg": (1, 1, 1, 1, 0, 1),
    "max": (2, 2, 2, 2, 1, 2),
}

_METHOD_IDS = {name: i for i, name in enumerate(POLICY_NAMES)}
_INITIAL_IDS = {name: i for i, name in enumerate(INITIAL_KINDS)}


@dataclass
class RunConfig:
    """Coordinates and parameters of a single adaptation run."""

    method: str
    subject_id: int
    target: int
    initial_kind: str
    repeat_index: int = 0
    iteration_cap: int = 100
    master_seed: int = 0
    rl: RLConfig = field(default_factory=RLConfig)
    ga: GAConfig = field(default_factory=GAConfig)
    rounded_reward: bool = False


@dataclass(frozen=True)
class PresentedSpider:
    """One spider shown to the subject, with the measured response."""

    state: SpiderState
    stress: float
    reward: float
    iteration: int


@dataclass
class RunResult:
    success: bool
    spiders_presented: int
    iterations_used: int
    final_state: SpiderState
    presented_sequence: list[PresentedSpider]


def initial_state_for(kind: str) -> SpiderState:
    try:
        return INITIAL_STATES[kind]
    except KeyError:
        raise ValueError(f"unknown initial kind {kind!r}; expected one of {INITIAL_KINDS}") from None


def run_seed_sequence(cfg: RunConfig) -> np.random.SeedSequence:
    """Derive the per-run rng stream from exactly the run coordinates."""
    if cfg.master_seed < 0:
        raise ValueError("master_seed must be non-negative")
    return np.random.SeedSequence(
        [
            cfg.master_seed,
            _METHOD_IDS[cfg.method],
            cfg.subject_id,
            cfg.target,
            _INITIAL_IDS[cfg.initial_kind],
            cfg.repeat_index,
        ]
    )


@lru_cache(maxsize=4096)
def _response_tables(
    subject: VirtualSubject, target: int, rounded: bool
) -> tuple[tuple[float, ...], tuple[float, ...], tuple[bool, ...]]:
    """Per-state (stress, reward, success) lookups for one subject and target.

    Built from the scalar stress/reward functions so that sessions, the
    public policy operations, and the oracles all see identical floats.
    """
    spec = RewardSpec(target, use_rounded_stress=rounded)
    stresses = stress_table(subject)
    rewards = tuple(reward(x, spec) for x in stresses)
    successes = tuple(is_success(x, target) for x in stresses)
    return stresses, rewards, successes


def _validate(cfg: RunConfig, subject: VirtualSubject, qtable: QTable | None) -> None:
    if cfg.method not in _METHOD_IDS:
        raise ValueError(f"unknown method {cfg.method!r}; expected one of {POLICY_NAMES}")
    if cfg.initial_kind not in INITIAL_STATES:
        raise ValueError(f"unknown initial kind {cfg.initial_kind!r}")
    if subject.id != cfg.subject_id:
        raise ValueError(f"subject id {subject.id} does not match config subject_id {cfg.subject_id}")
    if cfg.iteration_cap < 0:
        raise ValueError("iteration_cap must be non-negative")
    if qtable is not None and cfg.method not in ("rl_zero", "rl_random"):
        raise ValueError(f"a Q-table makes no sense for method {cfg.method!r}")
    cfg.rl.validate()
    cfg.ga.validate()


def run_session(
    cfg: RunConfig,
    subject: VirtualSubject,
    qtable: QTable | None = None,
    record_sequence: bool = True,
) -> RunResult:
    """Execute one adaptation run and report what the subject was shown.

    ``qtable`` lets a caller thread one learning table through several runs
    (persistence experiments); by default every run starts fresh. Setting
    ``record_sequence`` to False skips building the presentation trace, which
    large grids use to save memory; the counts are unaffected.
    """
    _validate(cfg, subject, qtable)
    space = state_space()
    stresses, rewards, successes = _response_tables(subject, cfg.target, cfg.rounded_reward)
    rng = np.random.default_rng(run_seed_sequence(cfg))

    presented = bytearray(space.n_states)
    sequence: list[PresentedSpider] = []
    count = 0

    def present(idx: int, iteration: int) -> None:
        nonlocal count
        presented[idx] = 1
        count += 1
        if record_sequence:
            sequence.append(
                PresentedSpider(space.states[idx], stresses[idx], rewards[idx], iteration)
            )

    def result(success: bool, iterations: int, final_idx: int) -> RunResult:
        return RunResult(success, count, iterations, space.states[final_idx], sequence)

    start = space.index_of[INITIAL_STATES[cfg.initial_kind]]

    if cfg.method == "ga":
        return _run_ga(cfg, subject, space, rewards, successes, rng, presented, present, result, start)

    # Sequential methods: the subject sees the initial spider first.
    present(start, 0)
    if successes[start]:
        return result(True, 0, start)

    if cfg.method in ("rl_zero", "rl_random"):
        if qtable is None:
            qtable = QTable.create("zero" if cfg.method == "rl_zero" else "random", rng)
        q = qtable.values
    epsilon = cfg.rl.epsilon
    lr, discount = cfg.rl.learning_rate, cfg.rl.discount
    next_state = space.next_state
    action_ids = space.valid_action_ids

    s = start
    for it in range(1, cfg.iteration_cap + 1):
        if cfg.method == "random":
            ids = action_ids[s]
            aid = ids[int(rng.integers(len(ids)))]
            t = next_state[s][aid]
            if not presented[t]:
                present(t, it)
                if successes[t]:
                    return result(True, it, t)
            s = t
        elif cfg.method == "greedy":
            # Rank all neighbours; each unseen one is a new presentation and
            # may end the run before the ranking completes.
            best_t = -1
            best_f = None
            for aid in action_ids[s]:
                t = next_state[s][aid]
                if not presented[t]:
                    present(t, it)
                    if successes[t]:
                        return result(True, it, t)
                f = rewards[t]
                if best_f is None or f > best_f:
                    best_f = f
                    best_t = t
            s = best_t
        else:  # rl_zero / rl_random
            aid = _select_action_id(q, s, action_ids[s], epsilon, rng)
            t = next_state[s][aid]
            if not presented[t]:
                present(t, it)
                if successes[t]:
                    return result(True, it, t)
            _update_q(q, s, aid, rewards[t], t, action_ids[t], lr, discount)
            s = t

    return result(False, cfg.iteration_cap, s)


def _run_ga(cfg, subject, space, rewards, successes, rng, presented, present, result, start):
    """GA session: batch presentation, generation loop, elitist selection."""
    spec = RewardSpec(cfg.target, use_rounded_stress=cfg.rounded_reward)
    early_stop = cfg.ga.early_stop_within_batch

    def present_batch(indices: list[int], iteration: int) -> int | None:
        """Present unseen batch members; return the first success, or None.

        By default the whole batch is presented before the success check, so
        every member counts. With early stopping the check happens after
        each individual presentation instead.
        """
        new: list[int] = []
        for idx in indices:
            if presented[idx]:
                continue
            present(idx, iteration)
            if early_stop and successes[idx]:
                return idx
            new.append(idx)
        if not early_stop:
            for idx in new:
                if successes[idx]:
                    return idx
        return None

    index_of = space.index_of
    population = ga_initial_population(
        INITIAL_STATES[cfg.initial_kind], subject, spec, cfg.ga.population_size
    )
    pop_ids = [index_of[s] for s in population]
    hit = present_batch(pop_ids, 0)
    if hit is not None:
        return result(True, 0, hit)

    for gen in range(1, cfg.iteration_cap + 1):
        fits = [rewards[i] for i in pop_ids]
        offspring = ga_generation(population, fits, cfg.ga, rng)
        off_ids = [index_of[s] for s in offspring]
        hit = present_batch(off_ids, gen)
        if hit is not None:
            return result(True, gen, hit)
        pool = population + offspring
        pool_fits = fits + [rewards[i] for i in off_ids]
        population = ga_select(pool, pool_fits, cfg.ga)
        pop_ids = [index_of[s] for s in population]

    best = max(range(len(pop_ids)), key=lambda i: (rewards[pop_ids[i]], -i))
    return result(False, cfg.iteration_cap, pop_ids[best])
