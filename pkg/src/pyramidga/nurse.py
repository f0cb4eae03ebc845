"""Nurse scheduling problem: instances, feasible pattern sets and fitness.

A schedule assigns every nurse one shift pattern out of her feasible set.
Patterns cover 14 shift slots (index 0..6 = days Mon..Sun, 7..13 = nights).
Demand is cumulative over grades: ``demand[k, s]`` asks for that many nurses
of grade ``s+1`` *or better* on shift ``k``, so higher-graded nurses can stand
in for lower grades.  All costs and demands are integers, which keeps every
fitness value exactly representable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numba import njit

N_SHIFTS = 14
DAY_SLOTS = slice(0, 7)
NIGHT_SLOTS = slice(7, 14)

PATTERN_KINDS = ("day", "night", "combined")


class NurseModelError(ValueError):
    """Raised for invalid nurse instances or assignments."""


@dataclass(frozen=True)
class ShiftPattern:
    """One weekly shift pattern: which of the 14 day/night slots it covers."""

    cover: tuple[int, ...]
    kind: str

    def __post_init__(self):
        if len(self.cover) != N_SHIFTS or any(c not in (0, 1) for c in self.cover):
            raise NurseModelError("pattern cover must be 14 binary flags")
        if self.kind not in PATTERN_KINDS:
            raise NurseModelError(f"unknown pattern kind {self.kind!r}")
        if self.kind == "day" and any(self.cover[7:]):
            raise NurseModelError("day pattern covers a night slot")
        if self.kind == "night" and any(self.cover[:7]):
            raise NurseModelError("night pattern covers a day slot")

    @property
    def shifts(self) -> int:
        return sum(self.cover)


def derive_feasible_sets(
    patterns: Sequence[ShiftPattern], shifts_required: np.ndarray
) -> list[np.ndarray]:
    """Feasible pattern indices per nurse: day patterns working exactly D_i
    shifts, night patterns exactly N_i, combined patterns exactly B_i."""
    sets = []
    for d, n, b in shifts_required:
        ok = [
            j
            for j, pat in enumerate(patterns)
            if (pat.kind == "day" and pat.shifts == d)
            or (pat.kind == "night" and pat.shifts == n)
            or (pat.kind == "combined" and pat.shifts == b)
        ]
        sets.append(np.asarray(ok, dtype=np.int64))
    return sets


@dataclass
class NurseInstance:
    """Full data for one ward-week scheduling problem."""

    name: str
    patterns: list[ShiftPattern]
    grade_of: np.ndarray  # (n,) grades 1..p, 1 = most qualified
    p: int
    pref_cost: np.ndarray  # (n, m) integer preference costs in [0, 100]
    shifts_required: np.ndarray  # (n, 3) columns D_i, N_i, B_i
    demand: np.ndarray  # (14, p) cumulative integer demand R_ks
    feasible_sets: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.grade_of = np.asarray(self.grade_of, dtype=np.int64)
        self.pref_cost = np.asarray(self.pref_cost, dtype=np.int64)
        self.shifts_required = np.asarray(self.shifts_required, dtype=np.int64)
        self.demand = np.asarray(self.demand, dtype=np.int64)
        if not self.feasible_sets:
            self.feasible_sets = derive_feasible_sets(self.patterns, self.shifts_required)
        self._caches: dict = {}

    @property
    def n(self) -> int:
        return len(self.grade_of)

    @property
    def m(self) -> int:
        return len(self.patterns)

    @property
    def q(self) -> np.ndarray:
        """Cumulative grade matrix: q[i, s] = 1 iff nurse i has grade <= s+1."""
        if "q" not in self._caches:
            grades = self.grade_of[:, None]
            self._caches["q"] = (grades <= np.arange(1, self.p + 1)[None, :]).astype(np.int64)
        return self._caches["q"]

    @property
    def cover_matrix(self) -> np.ndarray:
        """(m, 14) integer pattern cover flags."""
        if "cover" not in self._caches:
            self._caches["cover"] = np.array([pat.cover for pat in self.patterns], dtype=np.int64)
        return self._caches["cover"]

    @property
    def feasible_mask(self) -> np.ndarray:
        """(n, m) boolean: pattern j feasible for nurse i."""
        if "mask" not in self._caches:
            mask = np.zeros((self.n, self.m), dtype=bool)
            for i, fs in enumerate(self.feasible_sets):
                mask[i, fs] = True
            self._caches["mask"] = mask
        return self._caches["mask"]

    def validate(self):
        """Check the structural invariants; raises NurseModelError on failure."""
        if self.p < 1:
            raise NurseModelError("grade count must be positive")
        if self.grade_of.min(initial=1) < 1 or self.grade_of.max(initial=1) > self.p:
            raise NurseModelError("nurse grade out of range")
        if self.pref_cost.shape != (self.n, self.m):
            raise NurseModelError("preference cost matrix has wrong shape")
        if (self.pref_cost < 0).any() or (self.pref_cost > 100).any():
            raise NurseModelError("preference costs must lie in [0, 100]")
        if self.demand.shape != (N_SHIFTS, self.p) or (self.demand < 0).any():
            raise NurseModelError("demand matrix must be 14 x p, non-negative")
        derived = derive_feasible_sets(self.patterns, self.shifts_required)
        for i, (have, want) in enumerate(zip(self.feasible_sets, derived)):
            if not np.array_equal(np.sort(have), want):
                raise NurseModelError(f"feasible set of nurse {i} does not match contract")
            if len(want) == 0:
                raise NurseModelError(f"nurse {i} has an empty feasible set")


@dataclass
class NurseFitnessBreakdown:
    """Penalised fitness split into its terms."""

    preference_cost: int
    uncovered: np.ndarray  # (14, p) shortfalls
    penalty_weight: float
    total: float


def _supply(inst: NurseInstance, assignment: np.ndarray) -> np.ndarray:
    cover = inst.cover_matrix[assignment]  # (n, 14)
    return cover.T @ inst.q  # (14, p)


def full_fitness(inst: NurseInstance, assignment, w: float) -> NurseFitnessBreakdown:
    """Preference cost plus w times the total demand shortfall.

    ``assignment[i]`` is the pattern index worked by nurse i and must lie in
    her feasible set.
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.shape != (inst.n,):
        raise NurseModelError("assignment must cover every nurse exactly once")
    if w < 0:
        raise NurseModelError("penalty weight must be non-negative")
    if (assignment < 0).any() or (assignment >= inst.m).any():
        raise NurseModelError("infeasible pattern")
    if not inst.feasible_mask[np.arange(inst.n), assignment].all():
        raise NurseModelError("infeasible pattern")
    pref = int(inst.pref_cost[np.arange(inst.n), assignment].sum())
    uncovered = np.maximum(inst.demand - _supply(inst, assignment), 0)
    total = pref + w * int(uncovered.sum())
    return NurseFitnessBreakdown(pref, uncovered, w, total)


def is_feasible(inst: NurseInstance, assignment) -> bool:
    """True iff the assignment covers the demand of every shift and grade."""
    assignment = np.asarray(assignment, dtype=np.int64)
    return bool((_supply(inst, assignment) >= inst.demand).all())


def sub_fitness(
    inst: NurseInstance,
    partial,
    grade_set: Iterable[int],
    w: float,
    nurses: np.ndarray | None = None,
) -> float:
    """Substitute fitness of a partial schedule covering one grade group.

    For a proper subset G of grades the demand rows for s in G are matched
    against supply from the covered nurses only, with substitution allowed
    inside G but not from outside.  For the full grade set the score is
    grade-blind: only the total-staff row (s = p) is enforced.  ``nurses``
    gives the nurse index for each gene; it defaults to ascending order over
    the nurses whose grade lies in G.
    """
    grade_set = frozenset(grade_set)
    if not grade_set or not grade_set.issubset(range(1, inst.p + 1)):
        raise NurseModelError("grade set must be a non-empty subset of the grades")
    partial = np.asarray(partial, dtype=np.int64)
    if nurses is None:
        nurses = np.flatnonzero(np.isin(inst.grade_of, sorted(grade_set)))
    else:
        nurses = np.asarray(nurses, dtype=np.int64)
        if not set(inst.grade_of[nurses]) <= grade_set:
            raise NurseModelError("partial genome covers a nurse outside the grade set")
    covered = np.isin(inst.grade_of, sorted(grade_set))
    if len(partial) != len(nurses) or covered.sum() != len(nurses) or len(set(nurses.tolist())) != len(nurses):
        raise NurseModelError("partial genome does not cover the grade set exactly")
    pref = int(inst.pref_cost[nurses, partial].sum())
    cover = inst.cover_matrix[partial]  # (len, 14)
    if grade_set == frozenset(range(1, inst.p + 1)):
        # Grade-blind: total staffing only.
        supply = cover.sum(axis=0)
        uncovered = int(np.maximum(inst.demand[:, inst.p - 1] - supply, 0).sum())
    else:
        cols = np.asarray(sorted(grade_set), dtype=np.int64) - 1
        q_sub = inst.q[nurses][:, cols]
        supply = cover.T @ q_sub
        uncovered = int(np.maximum(inst.demand[:, cols] - supply, 0).sum())
    return pref + w * uncovered


def sub_violation(
    inst: NurseInstance, partial, grade_set: Iterable[int], nurses: np.ndarray | None = None
) -> int:
    """The shortfall term of :func:`sub_fitness` alone (its w-coefficient)."""
    base = sub_fitness(inst, partial, grade_set, 0.0, nurses)
    one = sub_fitness(inst, partial, grade_set, 1.0, nurses)
    return int(round(one - base))


# ---------------------------------------------------------------------------
# Instance text format
# ---------------------------------------------------------------------------
#
#   name <id>
#   size <n> <m> <p>
#   pattern <kind> <14 chars of 0/1>           (m lines)
#   demand <p integers>                        (14 lines, k = 1..14)
#   nurse <grade> <D> <N> <B> <j,j,...> <c,c,...,c>   (n lines; m costs)


def write_nurse_instance(inst: NurseInstance, path: str | Path):
    lines = [f"name {inst.name}", f"size {inst.n} {inst.m} {inst.p}"]
    for pat in inst.patterns:
        lines.append(f"pattern {pat.kind} {''.join(str(c) for c in pat.cover)}")
    for k in range(N_SHIFTS):
        lines.append("demand " + " ".join(str(int(v)) for v in inst.demand[k]))
    for i in range(inst.n):
        d, nn, b = (int(v) for v in inst.shifts_required[i])
        feas = ",".join(str(int(j)) for j in inst.feasible_sets[i])
        costs = ",".join(str(int(c)) for c in inst.pref_cost[i])
        lines.append(f"nurse {int(inst.grade_of[i])} {d} {nn} {b} {feas} {costs}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_nurse_instance(path: str | Path) -> NurseInstance:
    raw = [
        ln.strip()
        for ln in Path(path).read_text().splitlines()
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    rows = iter(raw)

    def expect(tag: str) -> list[str]:
        line = next(rows, None)
        if line is None or not line.startswith(tag + " "):
            raise NurseModelError(f"malformed nurse instance: expected {tag!r} line")
        return line.split()[1:]

    name = expect("name")[0]
    n, m, p = (int(v) for v in expect("size"))
    patterns = []
    for _ in range(m):
        kind, bits = expect("pattern")
        patterns.append(ShiftPattern(tuple(int(c) for c in bits), kind))
    demand = np.array([[int(v) for v in expect("demand")] for _ in range(N_SHIFTS)], dtype=np.int64)
    grades, shifts, feas_sets, costs = [], [], [], []
    for _ in range(n):
        fields = expect("nurse")
        grades.append(int(fields[0]))
        shifts.append([int(fields[1]), int(fields[2]), int(fields[3])])
        feas_sets.append(np.array([int(v) for v in fields[4].split(",")], dtype=np.int64))
        costs.append([int(v) for v in fields[5].split(",")])
    inst = NurseInstance(
        name=name,
        patterns=patterns,
        grade_of=np.array(grades, dtype=np.int64),
        p=p,
        pref_cost=np.array(costs, dtype=np.int64),
        shifts_required=np.array(shifts, dtype=np.int64),
        demand=demand,
        feasible_sets=feas_sets,
    )
    inst.validate()
    return inst


# ---------------------------------------------------------------------------
# Engine adapter
# ---------------------------------------------------------------------------


@njit(cache=True)
def _eval_kernel(genes, flat, row_off, demand, w):
    """Take-and-sum over fused contribution rows; integer arithmetic keeps
    the result bit-identical to the reference formula."""
    width = flat.shape[1]
    total = np.zeros(width, dtype=np.int64)
    for i in range(len(genes)):
        row = row_off[i] + genes[i]
        for c in range(width):
            total[c] += flat[row, c]
    pref = total[0]
    uncovered = 0
    for k in range(len(demand)):
        short = demand[k] - total[1 + k]
        if short > 0:
            uncovered += short
    return pref + w * uncovered, pref, uncovered


class NurseProblem:
    """Engine-facing adapter around a :class:`NurseInstance`.

    Evaluation runs off a fused contribution table: entry (i, j) stacks the
    preference cost of nurse i on pattern j with her weighted supply
    contribution, so a full evaluation is a single take-and-sum.  All values
    are integers, so the fast path agrees bit-for-bit with
    :func:`full_fitness`.
    """

    kind = "nurse"
    censored_score = 100.0
    maximise = False

    def __init__(self, inst: NurseInstance):
        inst.validate()
        self.instance = inst
        n, m, p = inst.n, inst.m, inst.p
        cover = inst.cover_matrix  # (m, 14)
        # contrib[i, j] = [pref_ij, (cover_j x q_i) flattened]
        outer = cover[None, :, :, None] * inst.q[:, None, None, :]  # (n, m, 14, p)
        self._contrib = np.concatenate(
            [inst.pref_cost[:, :, None].astype(np.int64), outer.reshape(n, m, 14 * p)], axis=2
        )
        self._flat = self._contrib.reshape(n * m, 1 + 14 * p)
        self._row_off = np.arange(n, dtype=np.int64) * m
        self._demand_flat = inst.demand.reshape(-1)
        self._levels: dict[str, dict] = {}

    @property
    def n_entities(self) -> int:
        return self.instance.n

    def domain_of(self, entity: int) -> np.ndarray:
        return self.instance.feasible_sets[entity]

    def penalty_scale(self) -> float:
        return max(float(self.instance.pref_cost.mean()), 1.0)

    def full_eval(self, assignment: np.ndarray, w: float) -> tuple[float, float, float, bool]:
        """(penalised, raw objective, violation, feasible) for a full schedule."""
        pen, pref, uncovered = _eval_kernel(
            assignment, self._flat, self._row_off, self._demand_flat, w
        )
        return pen, float(pref), float(uncovered), uncovered == 0

    def bind_level(
        self, level_id: str, scope: tuple[int, ...], entities: np.ndarray, full: bool = False
    ):
        """Precompute the sub-fitness table for one pyramid level.

        ``full`` marks the level whose sub-fitness is the true full fitness
        (the top of the pyramid); grade-blind scoring applies to any other
        level covering every grade.
        """
        inst = self.instance
        entities = np.asarray(entities, dtype=np.int64)
        if full:
            self._levels[level_id] = {"entities": entities}
            return
        scope_set = frozenset(scope)
        blind = scope_set == frozenset(range(1, inst.p + 1))
        cover = inst.cover_matrix
        if blind:
            # Grade-blind level: total staffing row only.
            contrib = np.concatenate(
                [inst.pref_cost[entities][:, :, None], np.broadcast_to(cover, (len(entities), inst.m, 14))],
                axis=2,
            )
            demand = inst.demand[:, inst.p - 1].copy()
        else:
            cols = np.asarray(sorted(scope_set), dtype=np.int64) - 1
            q_sub = inst.q[entities][:, cols]
            outer = cover[None, :, :, None] * q_sub[:, None, None, :]
            contrib = np.concatenate(
                [inst.pref_cost[entities][:, :, None], outer.reshape(len(entities), inst.m, -1)],
                axis=2,
            )
            demand = inst.demand[:, cols].reshape(-1)
        self._levels[level_id] = {
            "flat": np.ascontiguousarray(contrib.reshape(len(entities) * inst.m, -1)),
            "row_off": np.arange(len(entities), dtype=np.int64) * inst.m,
            "demand": demand,
        }

    def sub_eval(self, level_id: str, genes: np.ndarray, w: float) -> tuple[float, float, float, bool]:
        lvl = self._levels[level_id]
        if "flat" not in lvl:  # full-fitness level
            assignment = np.empty(self.instance.n, dtype=np.int64)
            assignment[lvl["entities"]] = genes
            return self.full_eval(assignment, w)
        if len(genes) == 0:
            return 0.0, 0.0, 0.0, True
        pen, pref, uncovered = _eval_kernel(genes, lvl["flat"], lvl["row_off"], lvl["demand"], w)
        return pen, float(pref), float(uncovered), uncovered == 0

    def score_of(self, raw_objective: float) -> float:
        """Reported score: the raw objective already is the schedule cost."""
        return raw_objective

    def random_assignment(self, rng) -> np.ndarray:
        return np.array(
            [fs[rng.integers(len(fs))] for fs in self.instance.feasible_sets], dtype=np.int64
        )


def enumerate_patterns(day_shifts: int, night_shifts: int) -> list[ShiftPattern]:
    """All day patterns with ``day_shifts`` worked days plus all night
    patterns with ``night_shifts`` worked nights."""
    pats = []
    for combo in itertools.combinations(range(7), day_shifts):
        cover = [0] * N_SHIFTS
        for k in combo:
            cover[k] = 1
        pats.append(ShiftPattern(tuple(cover), "day"))
    for combo in itertools.combinations(range(7), night_shifts):
        cover = [0] * N_SHIFTS
        for k in combo:
            cover[7 + k] = 1
        pats.append(ShiftPattern(tuple(cover), "night"))
    return pats
