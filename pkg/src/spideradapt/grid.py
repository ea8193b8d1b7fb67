"""Full evaluation grid: execution, aggregation, and significance testing.

The default grid runs every method for 100 subjects x 3 initial states x
9 targets x 10 repeats (27,000 runs per method). Results aggregate into
(initial state, stress category) cells; a cell's mean and standard deviation
of the presentation counts cover successful runs only, and cells below 75%
accuracy are excluded from the best-method comparison. Paired t-tests over
per-subject means decide the significance markers.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import betainc

from .policies import GAConfig, POLICY_NAMES, QTable, RLConfig
from .session import (
    INITIAL_KINDS,
    RunConfig,
    RunResult,
    run_session,
)
from .subjects import SubjectPopulation

DEFAULT_TARGETS = tuple(range(1, 10))
STRESS_CATEGORIES: dict[str, tuple[int, ...]] = {
    "low": (1, 2, 3),
    "moderate": (4, 5, 6),
    "high": (7, 8, 9),
}
CATEGORY_ORDER = ("low", "moderate", "high")
ACCURACY_THRESHOLD = 75.0
SIGNIFICANCE_LEVEL = 0.05

METHOD_LABELS = {
    "random": "Random",
    "greedy": "Greedy",
    "ga": "GA",
    "rl_random": "RL_Random",
    "rl_zero": "RL_Zero",
}

RESULT_COLUMNS = (
    "method",
    "initial_kind",
    "target",
    "subject_id",
    "repeat",
    "success",
    "spiders_presented",
    "iterations_used",
)


def category_of(target: int) -> str:
    for name, targets in STRESS_CATEGORIES.items():
        if target in targets:
            return name
    raise ValueError(f"target {target} has no stress category")


@dataclass
class GridConfig:
    """The evaluation grid: who runs, against whom, and how often."""

    population: SubjectPopulation
    master_seed: int
    methods: tuple[str, ...] = POLICY_NAMES
    initial_kinds: tuple[str, ...] = INITIAL_KINDS
    targets: tuple[int, ...] = DEFAULT_TARGETS
    repeats: int = 10
    iteration_cap: int = 100
    rl: RLConfig = field(default_factory=RLConfig)
    ga: GAConfig = field(default_factory=GAConfig)
    rounded_reward: bool = False
    workers: int = 1


@dataclass(frozen=True)
class RunRecord:
    """One grid run's coordinates and outcome."""

    method: str
    initial_kind: str
    target: int
    subject_id: int
    repeat: int
    success: bool
    spiders_presented: int
    iterations_used: int


@dataclass
class CellSummary:
    """Aggregate for one (initial state, stress category, method) cell."""

    initial_kind: str
    stress_category: str
    method: str
    mean_presented: float | None
    std_presented: float | None
    accuracy_percent: float
    n_success: int
    considered: bool


@dataclass
class ComparisonResult:
    """Best method of a cell and how the others compare to it."""

    initial_kind: str
    stress_category: str
    best_method: str
    p_values: dict[str, float | None]
    markers: dict[str, str]


def _method_order(name: str) -> tuple[int, str]:
    try:
        return (POLICY_NAMES.index(name), name)
    except ValueError:
        return (len(POLICY_NAMES), name)


def _initial_order(kind: str) -> tuple[int, str]:
    try:
        return (INITIAL_KINDS.index(kind), kind)
    except ValueError:
        return (len(INITIAL_KINDS), kind)


def _record_key(r: RunRecord) -> tuple:
    return (_method_order(r.method), _initial_order(r.initial_kind), r.target, r.subject_id, r.repeat)


def _record_from(cfg: RunConfig, result: RunResult) -> RunRecord:
    return RunRecord(
        method=cfg.method,
        initial_kind=cfg.initial_kind,
        target=cfg.target,
        subject_id=cfg.subject_id,
        repeat=cfg.repeat_index,
        success=result.success,
        spiders_presented=result.spiders_presented,
        iterations_used=result.iterations_used,
    )


def _run_block(args: tuple) -> list[RunRecord]:
    """All runs of one method against one subject (a parallel work unit)."""
    method, subject, initial_kinds, targets, repeats, iteration_cap, master_seed, rl, ga, rounded = args
    records = []
    for initial_kind in initial_kinds:
        for target in targets:
            for repeat in range(repeats):
                cfg = RunConfig(
                    method=method,
                    subject_id=subject.id,
                    target=target,
                    initial_kind=initial_kind,
                    repeat_index=repeat,
                    iteration_cap=iteration_cap,
                    master_seed=master_seed,
                    rl=rl,
                    ga=ga,
                    rounded_reward=rounded,
                )
                records.append(_record_from(cfg, run_session(cfg, subject, record_sequence=False)))
    return records


def _block_args(cfg: GridConfig) -> list[tuple]:
    return [
        (
            method,
            subject,
            cfg.initial_kinds,
            cfg.targets,
            cfg.repeats,
            cfg.iteration_cap,
            cfg.master_seed,
            cfg.rl,
            cfg.ga,
            cfg.rounded_reward,
        )
        for method in cfg.methods
        for subject in cfg.population.subjects
    ]


def _run_grid_persistent(cfg: GridConfig) -> list[RunRecord]:
    """Serial grid with one Q-table carried across runs of each RL cell."""
    from .session import _INITIAL_IDS, _METHOD_IDS  # table seeds need stable ids

    records: list[RunRecord] = []
    for method in cfg.methods:
        if method not in ("rl_zero", "rl_random"):
            for subject in cfg.population.subjects:
                records.extend(_run_block((
                    method, subject, cfg.initial_kinds, cfg.targets, cfg.repeats,
                    cfg.iteration_cap, cfg.master_seed, cfg.rl, cfg.ga, cfg.rounded_reward,
                )))
            continue
        init_mode = "zero" if method == "rl_zero" else "random"
        for initial_kind in cfg.initial_kinds:
            for target in cfg.targets:
                seed = np.random.SeedSequence(
                    [cfg.master_seed, _METHOD_IDS[method], _INITIAL_IDS[initial_kind], target, 0xA11CE]
                )
                table = QTable.create(init_mode, np.random.default_rng(seed))
                for subject in cfg.population.subjects:
                    for repeat in range(cfg.repeats):
                        run_cfg = RunConfig(
                            method=method,
                            subject_id=subject.id,
                            target=target,
                            initial_kind=initial_kind,
                            repeat_index=repeat,
                            iteration_cap=cfg.iteration_cap,
                            master_seed=cfg.master_seed,
                            rl=cfg.rl,
                            ga=cfg.ga,
                            rounded_reward=cfg.rounded_reward,
                        )
                        result = run_session(run_cfg, subject, qtable=table, record_sequence=False)
                        records.append(_record_from(run_cfg, result))
    records.sort(key=_record_key)
    return records


def run_grid(
    cfg: GridConfig,
    progress: Callable[[int, int], None] | None = None,
) -> list[RunRecord]:
    """Run the whole grid and return records in canonical coordinate order.

    Worker count never changes the records: every run derives its rng from
    its own coordinates, and the output is sorted before returning.
    """
    for method in cfg.methods:
        if method not in POLICY_NAMES:
            raise ValueError(f"unknown method {method!r}; expected one of {POLICY_NAMES}")
    if cfg.repeats < 1:
        raise ValueError("repeats must be >= 1")
    if cfg.workers < 1:
        raise ValueError("workers must be >= 1")
    if cfg.rl.persist_across_runs:
        if cfg.workers != 1:
            raise ValueError("persistent Q-tables require workers=1 (runs share state)")
        return _run_grid_persistent(cfg)

    blocks = _block_args(cfg)
    records: list[RunRecord] = []
    if cfg.workers == 1:
        for i, block in enumerate(blocks):
            records.extend(_run_block(block))
            if progress is not None:
                progress(i + 1, len(blocks))
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for i, block_records in enumerate(pool.map(_run_block, blocks, chunksize=8)):
                records.extend(block_records)
                if progress is not None:
                    progress(i + 1, len(blocks))
    records.sort(key=_record_key)
    return records


# ---------------------------------------------------------------------------
# Aggregation


def summarize(records: Sequence[RunRecord], aggregation: str = "pooled") -> list[CellSummary]:
    """Aggregate runs into (initial, category, method) cells.

    ``pooled`` (default) computes mean/std over every successful run in the
    cell; ``per_target`` first averages within each target and reports the
    mean/std of those per-target means.
    """
    if aggregation not in ("pooled", "per_target"):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    cells: dict[tuple[str, str, str], list[RunRecord]] = {}
    for r in records:
        cells.setdefault((r.initial_kind, category_of(r.target), r.method), []).append(r)

    summaries = []
    for (initial_kind, category, method), cell_records in cells.items():
        successes = [r.spiders_presented for r in cell_records if r.success]
        accuracy = 100.0 * len(successes) / len(cell_records)
        if aggregation == "pooled":
            values = [float(v) for v in successes]
        else:
            by_target: dict[int, list[int]] = {}
            for r in cell_records:
                if r.success:
                    by_target.setdefault(r.target, []).append(r.spiders_presented)
            values = [statistics.fmean(v) for _, v in sorted(by_target.items())]
        mean = statistics.fmean(values) if values else None
        std = statistics.stdev(values) if len(values) >= 2 else None
        summaries.append(
            CellSummary(
                initial_kind=initial_kind,
                stress_category=category,
                method=method,
                mean_presented=mean,
                std_presented=std,
                accuracy_percent=accuracy,
                n_success=len(successes),
                considered=accuracy >= ACCURACY_THRESHOLD,
            )
        )
    summaries.sort(
        key=lambda s: (
            _initial_order(s.initial_kind),
            CATEGORY_ORDER.index(s.stress_category),
            _method_order(s.method),
        )
    )
    return summaries


# ---------------------------------------------------------------------------
# Statistics


def _student_t_sf(t: float, df: int) -> float:
    """Upper-tail probability of Student's t via the regularized incomplete beta."""
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if t < 0:
        return 1.0 - _student_t_sf(-t, df)
    if t == 0:
        return 0.5
    return 0.5 * float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Paired-samples t-test: statistic and two-tailed p-value.

    Identical samples return (0, 1). A nonzero but constant difference has no
    defined statistic and raises.
    """
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    diffs = [float(x) - float(y) for x, y in zip(a, b)]
    if all(d == 0.0 for d in diffs):
        return 0.0, 1.0
    sd = statistics.stdev(diffs)
    if sd == 0.0:
        raise ValueError("differences have zero variance")
    t = statistics.fmean(diffs) / (sd / math.sqrt(n))
    p = 2.0 * _student_t_sf(abs(t), n - 1)
    return t, p


def _per_subject_means(
    records: Sequence[RunRecord],
) -> dict[tuple[str, str, str], dict[int, float]]:
    """Per-subject mean presentation count over successful runs, per cell."""
    raw: dict[tuple[str, str, str], dict[int, list[int]]] = {}
    for r in records:
        if not r.success:
            continue
        cell = (r.initial_kind, category_of(r.target), r.method)
        raw.setdefault(cell, {}).setdefault(r.subject_id, []).append(r.spiders_presented)
    return {
        cell: {sid: statistics.fmean(vals) for sid, vals in per_subject.items()}
        for cell, per_subject in raw.items()
    }


def mark_significance(
    records: Sequence[RunRecord],
    summaries: Sequence[CellSummary] | None = None,
) -> list[ComparisonResult]:
    """Find each cell's best considered method and test the others against it.

    The pairing unit is the per-subject mean over successful runs; subjects
    without a success under either method drop out pairwise. The best method
    earns ``**`` when significantly better than every other considered
    method, otherwise ``*`` marks it and every considered method that is not
    significantly different. Cells with no considered method are skipped.
    """
    if summaries is None:
        summaries = summarize(records)
    subject_means = _per_subject_means(records)

    comparisons = []
    cells: dict[tuple[str, str], list[CellSummary]] = {}
    for s in summaries:
        cells.setdefault((s.initial_kind, s.stress_category), []).append(s)

    for (initial_kind, category), cell_summaries in cells.items():
        considered = [s for s in cell_summaries if s.considered and s.mean_presented is not None]
        if not considered:
            continue
        best = min(considered, key=lambda s: (s.mean_presented, _method_order(s.method)))
        best_means = subject_means.get((initial_kind, category, best.method), {})
        p_values: dict[str, float | None] = {}
        markers: dict[str, str] = {}
        others = [s for s in considered if s.method != best.method]
        if not others:
            comparisons.append(ComparisonResult(initial_kind, category, best.method, {}, {}))
            continue
        for s in others:
            other_means = subject_means.get((initial_kind, category, s.method), {})
            shared = sorted(best_means.keys() & other_means.keys())
            if len(shared) < 2:
                p_values[s.method] = None
                continue
            try:
                _, p = paired_ttest(
                    [best_means[sid] for sid in shared],
                    [other_means[sid] for sid in shared],
                )
            except ValueError:
                p_values[s.method] = None
                continue
            p_values[s.method] = p

        def significant(method: str) -> bool:
            p = p_values.get(method)
            return p is not None and p < SIGNIFICANCE_LEVEL

        if all(significant(s.method) for s in others):
            markers[best.method] = "**"
        else:
            markers[best.method] = "*"
            for s in others:
                if not significant(s.method):
                    markers[s.method] = "*"
        comparisons.append(ComparisonResult(initial_kind, category, best.method, p_values, markers))
    return comparisons


# ---------------------------------------------------------------------------
# Emission


def results_to_csv(records: Sequence[RunRecord]) -> str:
    """Results CSV, canonically ordered so identical grids give identical bytes."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for r in sorted(records, key=_record_key):
        writer.writerow(
            [
                r.method,
                r.initial_kind,
                r.target,
                r.subject_id,
                r.repeat,
                "true" if r.success else "false",
                r.spiders_presented,
                r.iterations_used,
            ]
        )
    return out.getvalue()


class ResultsFileError(ValueError):
    """Raised when a results CSV is missing columns or malformed."""


def results_from_csv(text: str) -> list[RunRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not set(RESULT_COLUMNS) <= set(reader.fieldnames):
        missing = set(RESULT_COLUMNS) - set(reader.fieldnames or [])
        raise ResultsFileError(f"results CSV is missing columns: {sorted(missing)}")
    records = []
    try:
        for row in reader:
            records.append(
                RunRecord(
                    method=row["method"],
                    initial_kind=row["initial_kind"],
                    target=int(row["target"]),
                    subject_id=int(row["subject_id"]),
                    repeat=int(row["repeat"]),
                    success={"true": True, "false": False}[row["success"]],
                    spiders_presented=int(row["spiders_presented"]),
                    iterations_used=int(row["iterations_used"]),
                )
            )
    except (KeyError, ValueError) as exc:
        raise ResultsFileError(f"malformed results row: {exc}") from exc
    if not records:
        raise ResultsFileError("results CSV contains no runs")
    return records


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def summary_to_csv(
    summaries: Sequence[CellSummary],
    comparisons: Sequence[ComparisonResult] | None = None,
) -> str:
    markers = _marker_lookup(comparisons)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        [
            "initial_kind",
            "stress_category",
            "method",
            "mean_presented",
            "std_presented",
            "accuracy_percent",
            "n_success",
            "considered",
            "marker",
        ]
    )
    for s in summaries:
        writer.writerow(
            [
                s.initial_kind,
                s.stress_category,
                s.method,
                _fmt(s.mean_presented),
                _fmt(s.std_presented),
                f"{s.accuracy_percent:.6f}",
                s.n_success,
                "true" if s.considered else "false",
                markers.get((s.initial_kind, s.stress_category, s.method), ""),
            ]
        )
    return out.getvalue()


def _marker_lookup(
    comparisons: Sequence[ComparisonResult] | None,
) -> dict[tuple[str, str, str], str]:
    if not comparisons:
        return {}
    return {
        (c.initial_kind, c.stress_category, method): marker
        for c in comparisons
        for method, marker in c.markers.items()
    }


def summary_to_markdown(
    summaries: Sequence[CellSummary],
    comparisons: Sequence[ComparisonResult] | None = None,
) -> str:
    """Markdown table: one block per (initial, category), methods as columns.

    The best considered method of each row is bold; cells excluded by the
    accuracy filter show their spread in parentheses instead of a +/-.
    """
    markers = _marker_lookup(comparisons)
    best_of = {(c.initial_kind, c.stress_category): c.best_method for c in (comparisons or [])}
    methods = sorted({s.method for s in summaries}, key=_method_order)
    cells: dict[tuple[str, str], dict[str, CellSummary]] = {}
    for s in summaries:
        cells.setdefault((s.initial_kind, s.stress_category), {})[s.method] = s

    lines = [
        "| Initial | Stress | Metric | " + " | ".join(METHOD_LABELS.get(m, m) for m in methods) + " |",
        "|" + "---|" * (3 + len(methods)),
    ]
    for (initial_kind, category), by_method in cells.items():
        presented_row = []
        accuracy_row = []
        for m in methods:
            s = by_method.get(m)
            if s is None or s.mean_presented is None:
                presented_row.append("n/a")
                accuracy_row.append("n/a" if s is None else f"{s.accuracy_percent:.2f}")
                continue
            std = f"{s.std_presented:.2f}" if s.std_presented is not None else "0.00"
            text = (
                f"{s.mean_presented:.2f}±{std}"
                if s.considered
                else f"{s.mean_presented:.2f} ({std})"
            )
            if best_of.get((initial_kind, category)) == m:
                text = f"**{text}**"
            # escape the significance stars so they render literally
            text += markers.get((initial_kind, category, m), "").replace("*", "\\*")
            presented_row.append(text)
            accuracy_row.append(f"{s.accuracy_percent:.2f}")
        lines.append(
            f"| {initial_kind.capitalize()} | {category.capitalize()} | Spiders Presented | "
            + " | ".join(presented_row)
            + " |"
        )
        lines.append("| | | Accuracy | " + " | ".join(accuracy_row) + " |")
    lines.append("")
    lines.append(
        "Bold marks the best considered method per row; `**` significantly better than "
        "all others, `*` not significantly different from the best; `m (s)` cells fall "
        f"below the {ACCURACY_THRESHOLD:.0f}% accuracy threshold and are excluded."
    )
    return "\n".join(lines) + "\n"


def comparisons_to_csv(comparisons: Sequence[ComparisonResult]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["initial_kind", "stress_category", "best_method", "method", "p_value", "marker"])
    for c in comparisons:
        methods = sorted(set(c.p_values) | set(c.markers), key=_method_order)
        if not methods:
            writer.writerow([c.initial_kind, c.stress_category, c.best_method, "", "", ""])
        for m in methods:
            p = c.p_values.get(m)
            writer.writerow(
                [
                    c.initial_kind,
                    c.stress_category,
                    c.best_method,
                    m,
                    "" if p is None else f"{p:.6g}",
                    c.markers.get(m, ""),
                ]
            )
    return out.getvalue()
