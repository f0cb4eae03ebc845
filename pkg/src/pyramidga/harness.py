"""Experiment harness: instance generation, seeded runs and aggregation.

A benchmark run executes ``runs_per_instance`` seeded GA runs per instance
and strategy, shares the seed list across strategies, aggregates each
(instance, strategy) pair into one result row and censors instances where no
run found a feasible solution (score 100 for nurses, 0 for the mall).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .engine import CoevolutionEngine, EngineConfig
from .hillclimb import NurseHillclimber
from .mall import MallInstance, MallProblem, quarter, read_mall_instance
from .nurse import (
    NurseInstance,
    NurseProblem,
    enumerate_patterns,
    read_nurse_instance,
)
from .pyramid import build_mall_topology, build_nurse_topology, build_single_topology

SGA = "SGA"
NURSE_CENSORED = 100.0
MALL_CENSORED = 0.0

TIER_SCALE = {"loose": 0.75, "medium": 0.9, "tight": 1.0}
MALL_TIERS = {
    # (count slack below, count slack above, size-limit slack)
    "loose": (3, 4, 8),
    "medium": (2, 2, 4),
    "tight": (1, 1, 2),
}


class HarnessError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Instance generators (plant-then-derive: demand is carved out of a randomly
# planted assignment, so a feasible solution exists by construction)
# ---------------------------------------------------------------------------


@dataclass
class NurseGenParams:
    n: int = 20
    grade_mix: tuple[float, float, float] = (0.2, 0.3, 0.5)
    day_shifts: int = 5
    night_shifts: int = 4
    day_patterns: int = 10  # 0 keeps the full enumeration
    night_patterns: int = 10
    tier: str = "tight"
    day_cost_shape: float = 4.0  # larger = day work cheaper on average
    night_cost_shape: float = 2.0
    planted_night_bias: float = 0.5  # night share of the planted schedule


def _skewed_cost(u: float, shape: float) -> int:
    # Inverse CDF of Beta(1, shape) scaled to [0, 100).
    return int(100 * (1 - (1 - u) ** (1.0 / shape)))


def generate_nurse_instance(params: NurseGenParams, seed: int) -> NurseInstance:
    if params.tier not in TIER_SCALE:
        raise HarnessError(f"unknown tier {params.tier!r}")
    if params.n < 1:
        raise HarnessError("need at least one nurse")
    rng = np.random.default_rng(seed)
    pats = enumerate_patterns(params.day_shifts, params.night_shifts)
    day_ids = [j for j, p in enumerate(pats) if p.kind == "day"]
    night_ids = [j for j, p in enumerate(pats) if p.kind == "night"]
    keep = []
    for ids, quota in ((day_ids, params.day_patterns), (night_ids, params.night_patterns)):
        if quota and quota < len(ids):
            keep.extend(sorted(rng.choice(ids, size=quota, replace=False).tolist()))
        else:
            keep.extend(ids)
    patterns = [pats[j] for j in keep]

    counts = [max(1, int(round(f * params.n))) for f in params.grade_mix]
    while sum(counts) > params.n:
        counts[int(np.argmax(counts))] -= 1
    while sum(counts) < params.n:
        counts[int(np.argmin(counts))] += 1
    grade_of = np.repeat([1, 2, 3], counts)

    shifts = np.tile(
        [params.day_shifts, params.night_shifts, params.day_shifts], (params.n, 1)
    )
    pref = np.empty((params.n, len(patterns)), dtype=np.int64)
    for j, pat in enumerate(patterns):
        shape = params.day_cost_shape if pat.kind == "day" else params.night_cost_shape
        for i in range(params.n):
            pref[i, j] = _skewed_cost(float(rng.random()), shape)

    inst = NurseInstance(
        name=f"nurse-{params.tier}-s{seed}",
        patterns=patterns,
        grade_of=grade_of,
        p=3,
        pref_cost=pref,
        shifts_required=shifts,
        demand=np.zeros((14, 3), dtype=np.int64),
        feasible_sets=[],
    )
    planted = np.empty(params.n, dtype=np.int64)
    for i, fs in enumerate(inst.feasible_sets):
        nights = [j for j in fs if patterns[j].kind == "night"]
        days = [j for j in fs if patterns[j].kind != "night"]
        pool = nights if (nights and rng.random() < params.planted_night_bias) else (days or nights)
        planted[i] = pool[rng.integers(len(pool))]
    supply = inst.cover_matrix[planted].T @ inst.q
    inst.demand = np.floor(TIER_SCALE[params.tier] * supply + 1e-9).astype(np.int64)
    inst.validate()
    return inst


@dataclass
class MallGenParams:
    n_areas: int = 5
    locs_per_area: int = 20
    types_min: int = 20
    types_max: int = 50
    n_groups: int = 8
    tier: str = "medium"


def generate_mall_instance(params: MallGenParams, seed: int) -> MallInstance:
    if params.tier not in MALL_TIERS:
        raise HarnessError(f"unknown tier {params.tier!r}")
    rng = np.random.default_rng(seed)
    T = int(rng.integers(params.types_min, params.types_max + 1))
    groups_of = []
    for _ in range(T):
        k = int(rng.integers(1, 3))
        groups_of.append(tuple(sorted(rng.choice(params.n_groups, size=k, replace=False).tolist())))
    attract = rng.integers(1, 9, size=(params.n_areas, T)) / 4.0
    base = int(rng.integers(3, 6))
    size_rent = np.array([base, 2 * base + 1, 3 * base + 3], dtype=np.int64)
    fixed = rng.integers(8, 31, size=(T, params.n_areas))
    synergy = float(rng.integers(2, 6))
    peaks = np.array([quarter(float(v) / 4) for v in rng.integers(40, 161, size=T)])

    lo, hi, size_slack = MALL_TIERS[params.tier]
    inst = MallInstance(
        name=f"mall-{params.tier}-s{seed}",
        n_areas=params.n_areas,
        locs_per_area=params.locs_per_area,
        n_types=T,
        groups_of=groups_of,
        attract=attract,
        size_rent=size_rent,
        synergy=synergy,
        fixed_rent=fixed,
        count_min=np.zeros(T, dtype=np.int64),
        count_ideal=np.zeros(T, dtype=np.int64),
        count_max=np.full(T, params.n_areas * params.locs_per_area, dtype=np.int64),
        count_peak=peaks,
        size_limits=np.full(3, params.n_areas * params.locs_per_area, dtype=np.int64),
    )
    from .mall import decompose_sizes  # local import keeps module load light

    planted = rng.integers(0, T, inst.n_locations, dtype=np.int64)
    decomp = decompose_sizes(inst, planted)
    planted_counts = decomp.totals_by_type()
    inst.count_min = np.maximum(planted_counts - lo, 0).astype(np.int64)
    inst.count_max = (planted_counts + hi).astype(np.int64)
    jitter = rng.integers(-1, 2, size=T)
    inst.count_ideal = np.clip(planted_counts + jitter, inst.count_min, inst.count_max).astype(
        np.int64
    )
    inst.size_limits = (decomp.totals_by_size() + size_slack).astype(np.int64)
    inst.validate()
    return inst


# ---------------------------------------------------------------------------
# Runs and aggregation
# ---------------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    problem: str  # "nurse" | "mall"
    instances: list
    strategies: list[str]
    runs_per_instance: int = 20
    base_seed: int = 0
    hillclimber: bool = False
    jobs: int = 1
    config_overrides: dict = field(default_factory=dict)
    penalty_beta: float = 1.1
    penalty_w0_scale: float = 1.0

    def __post_init__(self):
        if self.runs_per_instance < 1:
            raise HarnessError("runs_per_instance must be at least 1")
        if self.problem not in ("nurse", "mall"):
            raise HarnessError(f"unknown problem {self.problem!r}")


@dataclass
class RunOutcome:
    instance: str
    strategy: str
    run_index: int
    found_feasible: bool
    score: float | None  # best feasible cost (nurse) or rent (mall)
    generations: int
    seconds: float


@dataclass
class ResultRow:
    instance: str
    strategy: str
    feasibility: float
    score: float
    generations: float
    seconds: float


FIELDS = ("instance", "strategy", "feasibility", "score", "generations", "seconds")


def derive_run_seed(base_seed: int, instance_id: str, run_index: int) -> int:
    """Stable per-run seed, shared across strategies by construction."""
    digest = hashlib.sha256(f"{base_seed}|{instance_id}|{run_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def build_problem(problem: str, instance, strategy: str):
    """(adapter, topology) for one run; SGA collapses the pyramid."""
    if problem == "nurse":
        adapter = NurseProblem(instance)
        if strategy == SGA:
            topo = build_single_topology(instance.n, (1, 2, 3), capacity=1000)
        else:
            topo = build_nurse_topology(instance)
    else:
        adapter = MallProblem(instance)
        if strategy == SGA:
            topo = build_single_topology(instance.n_locations, tuple(range(5)), capacity=1000)
        else:
            topo = build_mall_topology(instance)
    return adapter, topo


def run_single(
    problem: str,
    instance,
    strategy: str,
    seed: int,
    run_index: int = 0,
    hillclimber: bool = False,
    config_overrides: dict | None = None,
    penalty_beta: float = 1.1,
    penalty_w0_scale: float = 1.0,
) -> RunOutcome:
    adapter, topo = build_problem(problem, instance, strategy)
    eval_strategy = "R" if strategy == SGA else strategy
    config = EngineConfig(rng_seed=seed, **(config_overrides or {}))
    local = NurseHillclimber() if (hillclimber and problem == "nurse") else None
    t0 = time.perf_counter()
    engine = CoevolutionEngine(
        adapter,
        topo,
        eval_strategy,
        config,
        local_search=local,
        penalty_beta=penalty_beta,
        penalty_w0_scale=penalty_w0_scale,
    )
    result = engine.run()
    seconds = time.perf_counter() - t0
    found = result.best_feasible_raw is not None
    score = adapter.score_of(result.best_feasible_raw) if found else None
    label = f"{strategy}&H" if hillclimber else strategy
    return RunOutcome(instance.name, label, run_index, found, score, result.generations, seconds)


def _run_task(task) -> RunOutcome:
    (problem, instance, strategy, seed, run_index, hillclimber, overrides, beta, w0s) = task
    return run_single(
        problem,
        instance,
        strategy,
        seed,
        run_index,
        hillclimber,
        overrides,
        beta,
        w0s,
    )


def aggregate(
    outcomes: list[RunOutcome], problem: str, runs_per_instance: int
) -> list[ResultRow]:
    """One row per (instance, strategy): feasibility rate plus the best
    feasible score over the runs, censored when every run failed."""
    maximise = problem == "mall"
    censored = MALL_CENSORED if maximise else NURSE_CENSORED
    grouped: dict[tuple[str, str], list[RunOutcome]] = {}
    for out in outcomes:
        grouped.setdefault((out.instance, out.strategy), []).append(out)
    rows = []
    for (inst_id, strategy) in sorted(grouped):
        outs = grouped[(inst_id, strategy)]
        if len(outs) != runs_per_instance:
            raise HarnessError(f"expected {runs_per_instance} runs for {inst_id}/{strategy}")
        found = [o for o in outs if o.found_feasible]
        feasibility = len(found) / len(outs)
        if found:
            scores = [o.score for o in found]
            score = max(scores) if maximise else min(scores)
        else:
            score = censored
        rows.append(
            ResultRow(
                inst_id,
                strategy,
                feasibility,
                float(score),
                float(np.mean([o.generations for o in outs])),
                float(sum(o.seconds for o in outs)),
            )
        )
    return rows


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """Full factorial (instance x strategy x run), optionally in parallel;
    output order and content are independent of the job count."""
    tasks = []
    for instance in spec.instances:
        for strategy in spec.strategies:
            for run_index in range(spec.runs_per_instance):
                seed = derive_run_seed(spec.base_seed, instance.name, run_index)
                tasks.append(
                    (
                        spec.problem,
                        instance,
                        strategy,
                        seed,
                        run_index,
                        spec.hillclimber,
                        dict(spec.config_overrides),
                        spec.penalty_beta,
                        spec.penalty_w0_scale,
                    )
                )
    if spec.jobs > 1:
        with get_context("fork").Pool(spec.jobs) as pool:
            outcomes = pool.map(_run_task, tasks, chunksize=1)
    else:
        outcomes = [_run_task(t) for t in tasks]
    return aggregate(outcomes, spec.problem, spec.runs_per_instance)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def _row_values(row: ResultRow) -> list:
    return [row.instance, row.strategy, row.feasibility, row.score, row.generations, row.seconds]


def emit(rows: list[ResultRow], fmt: str, path: str | Path) -> Path:
    """Write rows as CSV or JSON with a stable column order."""
    path = Path(path)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(FIELDS)
        for row in rows:
            vals = _row_values(row)
            writer.writerow(vals[:2] + [repr(float(v)) for v in vals[2:]])
        path.write_text(buf.getvalue())
    elif fmt == "json":
        payload = [dict(zip(FIELDS, _row_values(row))) for row in rows]
        path.write_text(json.dumps(payload, indent=2) + "\n")
    else:
        raise HarnessError(f"unknown format {fmt!r}")
    return path


def read_rows(path: str | Path, fmt: str) -> list[ResultRow]:
    path = Path(path)
    rows = []
    if fmt == "csv":
        with path.open() as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                rows.append(
                    ResultRow(
                        rec["instance"],
                        rec["strategy"],
                        float(rec["feasibility"]),
                        float(rec["score"]),
                        float(rec["generations"]),
                        float(rec["seconds"]),
                    )
                )
    elif fmt == "json":
        for rec in json.loads(path.read_text()):
            rows.append(ResultRow(**rec))
    else:
        raise HarnessError(f"unknown format {fmt!r}")
    return rows


@dataclass
class PivotRow:
    strategy: str
    score: float
    feasibility: float


def pivot(rows: list[ResultRow]) -> list[PivotRow]:
    """Table-1-shaped summary: per strategy, mean score and mean feasibility
    over instances (censored instances included)."""
    grouped: dict[str, list[ResultRow]] = {}
    order: list[str] = []
    for row in rows:
        if row.strategy not in grouped:
            order.append(row.strategy)
        grouped.setdefault(row.strategy, []).append(row)
    return [
        PivotRow(
            s,
            float(np.mean([r.score for r in grouped[s]])),
            float(np.mean([r.feasibility for r in grouped[s]])),
        )
        for s in order
    ]


def emit_pivot(rows: list[ResultRow], fmt: str, path: str | Path) -> Path:
    path = Path(path)
    pivoted = pivot(rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("strategy", "score", "feasibility"))
        for row in pivoted:
            writer.writerow((row.strategy, repr(row.score), repr(row.feasibility)))
        path.write_text(buf.getvalue())
    elif fmt == "json":
        payload = [
            {"strategy": r.strategy, "score": r.score, "feasibility": r.feasibility}
            for r in pivoted
        ]
        path.write_text(json.dumps(payload, indent=2) + "\n")
    else:
        raise HarnessError(f"unknown format {fmt!r}")
    return path


def zero_seconds(rows: list[ResultRow]) -> list[ResultRow]:
    """Strip wall-clock timing so that result files are byte-reproducible."""
    return [replace(r, seconds=0.0) for r in rows]


# ---------------------------------------------------------------------------
# Default suite
# ---------------------------------------------------------------------------

NURSE_TIER_CYCLE = ("tight", "medium", "tight", "loose", "tight",
                    "medium", "tight", "tight", "medium", "loose")
MALL_TIER_CYCLE = ("medium", "tight", "loose", "medium", "tight",
                   "medium", "loose", "tight", "medium", "medium")


def default_nurse_suite(
    count: int = 10, base_seed: int = 0, tier: str | None = None, **overrides
) -> list[NurseInstance]:
    instances = []
    for i in range(count):
        params = NurseGenParams(
            tier=tier or NURSE_TIER_CYCLE[i % len(NURSE_TIER_CYCLE)], **overrides
        )
        instances.append(generate_nurse_instance(params, derive_run_seed(base_seed, "gen-nurse", i)))
    return instances


def default_mall_suite(
    count: int = 10, base_seed: int = 0, tier: str | None = None, **overrides
) -> list[MallInstance]:
    instances = []
    for i in range(count):
        params = MallGenParams(
            tier=tier or MALL_TIER_CYCLE[i % len(MALL_TIER_CYCLE)], **overrides
        )
        instances.append(generate_mall_instance(params, derive_run_seed(base_seed, "gen-mall", i)))
    return instances


def load_instances(problem: str, paths: list[str | Path]):
    """Instance files or directories of them, sorted for determinism."""
    files: list[Path] = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            files.extend(sorted(p.glob("*.txt")))
        else:
            files.append(p)
    reader = read_nurse_instance if problem == "nurse" else read_mall_instance
    return [reader(f) for f in files]
