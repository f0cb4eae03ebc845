"""Independent verification oracles.

Everything here is written against the instance data alone, in plain loops,
deliberately sharing no code with the production fitness paths.  The
recompute functions re-derive the penalised objectives from first principles;
the brute-force searches enumerate tiny instances exhaustively.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

SEARCH_SPACE_CAP = 10**6


class OracleError(RuntimeError):
    """Raised when an instance is too large to enumerate."""


def _nurse_cost_parts(inst, assignment) -> tuple[int, int]:
    """(preference cost, total uncovered shifts) from the raw model data."""
    n = len(inst.grade_of)
    pref = 0
    for i in range(n):
        j = int(assignment[i])
        if j not in set(int(v) for v in inst.feasible_sets[i]):
            raise ValueError("infeasible pattern")
        pref += int(inst.pref_cost[i][j])
    uncovered = 0
    for k in range(14):
        for s in range(1, inst.p + 1):
            supply = 0
            for i in range(n):
                if int(inst.grade_of[i]) <= s and inst.patterns[int(assignment[i])].cover[k]:
                    supply += 1
            short = int(inst.demand[k][s - 1]) - supply
            if short > 0:
                uncovered += short
    return pref, uncovered


def recompute_fitness(inst, assignment, w: float) -> float:
    """Nurse penalised cost recomputed from the raw model data."""
    pref, uncovered = _nurse_cost_parts(inst, assignment)
    return pref + w * uncovered


@dataclass
class NurseOracleResult:
    best_assignment: tuple[int, ...]
    best_penalised: float
    best_feasible_assignment: tuple[int, ...] | None
    best_feasible_cost: float | None


def brute_force_nurse(inst, w: float) -> NurseOracleResult:
    """Exhaust every combination of feasible patterns."""
    space = 1
    for fs in inst.feasible_sets:
        space *= max(len(fs), 1)
        if space > SEARCH_SPACE_CAP:
            raise OracleError("search space too large")
    best = None
    best_fit = None
    best_feas = None
    best_feas_cost = None
    for combo in itertools.product(*[list(int(v) for v in fs) for fs in inst.feasible_sets]):
        pref, uncovered = _nurse_cost_parts(inst, combo)
        fit = pref + w * uncovered
        if best_fit is None or fit < best_fit:
            best, best_fit = combo, fit
        if uncovered == 0 and (best_feas_cost is None or pref < best_feas_cost):
            best_feas, best_feas_cost = combo, pref
    return NurseOracleResult(best, best_fit, best_feas, best_feas_cost)


def recompute_rent(inst, layout, w: float) -> tuple[float, float, bool]:
    """Mall (rent, violation, feasible) recomputed from the raw model data."""
    layout = [int(g) for g in layout]
    groups = [set(g) for g in inst.groups_of]
    rent = 0.0
    shop_counts = [0] * inst.n_types
    size_totals = [0, 0, 0]  # small, medium, large
    for a in range(inst.n_areas):
        segment = layout[a * inst.locs_per_area : (a + 1) * inst.locs_per_area]
        runs = []
        for g in segment:
            if runs and runs[-1][0] == g:
                runs[-1][1] += 1
            else:
                runs.append([g, 1])
        prev = None
        for t, length in runs:
            large = length // 3
            medium = 1 if length % 3 == 2 else 0
            small = 1 if length % 3 == 1 else 0
            shops = small + medium + large
            shop_counts[t] += shops
            size_totals[0] += small
            size_totals[1] += medium
            size_totals[2] += large
            rent += shops * float(inst.fixed_rent[t][a])
            rent += float(inst.attract[a][t]) * (
                small * float(inst.size_rent[0])
                + medium * float(inst.size_rent[1])
                + large * float(inst.size_rent[2])
            )
            if shops > 1 and groups[t]:
                rent += (shops - 1) * inst.synergy
            if prev is not None and groups[prev] & groups[t]:
                rent += inst.synergy
            prev = t
    violation = 0
    for t in range(inst.n_types):
        rent += inst.count_rent(t, shop_counts[t])
        violation += max(int(inst.count_min[t]) - shop_counts[t], 0)
        violation += max(shop_counts[t] - int(inst.count_max[t]), 0)
    for c in range(3):
        violation += max(size_totals[c] - int(inst.size_limits[c]), 0)
    return rent, float(violation), violation == 0


@dataclass
class MallOracleResult:
    best_layout: tuple[int, ...]
    best_rent: float
    best_is_feasible: bool


def brute_force_mall(inst, w: float = 0.0) -> MallOracleResult:
    """Exhaust every layout; prefers the best feasible one, falling back to
    the best penalised layout when nothing is feasible."""
    if inst.n_types ** inst.n_locations > SEARCH_SPACE_CAP:
        raise OracleError("search space too large")
    best_feas = None
    best_feas_rent = None
    best_any = None
    best_any_score = None
    for combo in itertools.product(range(inst.n_types), repeat=inst.n_locations):
        rent, violation, feasible = recompute_rent(inst, combo, w)
        score = rent - w * violation
        if best_any_score is None or score > best_any_score:
            best_any, best_any_score = combo, score
        if feasible and (best_feas_rent is None or rent > best_feas_rent):
            best_feas, best_feas_rent = combo, rent
    if best_feas is not None:
        return MallOracleResult(best_feas, best_feas_rent, True)
    return MallOracleResult(best_any, best_any_score, False)


def random_nurse_assignment(inst, rng: np.random.Generator) -> list[int]:
    return [int(fs[rng.integers(len(fs))]) for fs in inst.feasible_sets]


def random_mall_layout(inst, rng: np.random.Generator) -> list[int]:
    return [int(v) for v in rng.integers(0, inst.n_types, inst.n_locations)]
