"""Memetic local search for nurse schedules.

Applied to "balanced" schedules only: ones with both a surplus and a
shortage inside the same day/night block, which pattern swaps can repair.
The search makes first-improvement passes of single-nurse reassignments,
pairwise pattern swaps and three-cycles until no move strictly lowers the
penalised cost.  A feasible schedule is never made infeasible, whatever the
penalised gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nurse import NurseInstance, _supply

EPS = 1e-9


@dataclass
class BalanceProfile:
    """Signed per-(shift, grade) staffing surplus of one schedule."""

    surplus: np.ndarray  # (14, p), supply - demand

    @property
    def uncovered(self) -> np.ndarray:
        return np.maximum(-self.surplus, 0)

    @classmethod
    def of(cls, inst: NurseInstance, assignment) -> "BalanceProfile":
        assignment = np.asarray(assignment, dtype=np.int64)
        return cls(_supply(inst, assignment) - inst.demand)


def is_balanced(inst: NurseInstance, assignment) -> bool:
    """True iff some day (or night) shift is overstaffed while another day
    (respectively night) shift is understaffed."""
    surplus = BalanceProfile.of(inst, assignment).surplus
    for block in (surplus[:7], surplus[7:]):
        if (block > 0).any() and (block < 0).any():
            return True
    return False


class _State:
    """Incrementally maintained cost terms of a working schedule."""

    def __init__(self, inst: NurseInstance, genes: np.ndarray, w: float):
        self.inst = inst
        self.genes = genes
        self.w = w
        self.cover = inst.cover_matrix
        self.pref = inst.pref_cost
        self.demand = inst.demand
        self.grade0 = inst.grade_of - 1
        self.supply = _supply(inst, genes)
        self.unc_total = int(np.maximum(self.demand - self.supply, 0).sum())
        self.pref_total = int(self.pref[np.arange(inst.n), genes].sum())

    @property
    def fitness(self) -> float:
        return self.pref_total + self.w * self.unc_total

    def try_moves(self, moves: list[tuple[int, int]]) -> bool:
        """Apply the reassignments if they strictly improve the penalised
        cost without breaking feasibility; returns True when applied."""
        dpref = 0
        for i, j_new in moves:
            dpref += int(self.pref[i, j_new]) - int(self.pref[i, self.genes[i]])
        same_supply = sorted(self.genes[i] for i, _ in moves) == sorted(j for _, j in moves) and (
            len({int(self.grade0[i]) for i, _ in moves}) == 1
        )
        if same_supply:
            dsupply = None
            new_unc = self.unc_total
        else:
            dsupply = np.zeros_like(self.supply)
            for i, j_new in moves:
                dcover = self.cover[j_new] - self.cover[self.genes[i]]
                dsupply[:, self.grade0[i] :] += dcover[:, None]
            new_unc = int(np.maximum(self.demand - self.supply - dsupply, 0).sum())
        if self.unc_total == 0 and new_unc > 0:
            return False
        if dpref + self.w * (new_unc - self.unc_total) >= -EPS:
            return False
        for i, j_new in moves:
            self.genes[i] = j_new
        if dsupply is not None:
            self.supply += dsupply
        self.unc_total = new_unc
        self.pref_total += dpref
        return True


def improve(inst: NurseInstance, assignment, w: float, max_chain: int = 3) -> np.ndarray:
    """First-improvement descent over reassignments, swaps and 3-cycles.

    Deterministic scan order by nurse index; the result never has a higher
    penalised cost than the input and stays feasible if the input was.
    """
    genes = np.array(assignment, dtype=np.int64)
    state = _State(inst, genes, w)
    n = inst.n
    fsets = [set(int(v) for v in fs) for fs in inst.feasible_sets]
    flists = [sorted(fs) for fs in fsets]
    moved = True
    while moved:
        moved = False
        for i in range(n):
            for j in flists[i]:
                if j != genes[i] and state.try_moves([(i, j)]):
                    moved = True
        for i1 in range(n):
            for i2 in range(i1 + 1, n):
                j1, j2 = int(genes[i1]), int(genes[i2])
                if j1 != j2 and j2 in fsets[i1] and j1 in fsets[i2]:
                    if state.try_moves([(i1, j2), (i2, j1)]):
                        moved = True
        if max_chain >= 3:
            for i1 in range(n):
                for i2 in range(i1 + 1, n):
                    for i3 in range(i2 + 1, n):
                        j1, j2, j3 = (int(genes[i]) for i in (i1, i2, i3))
                        for ja, jb, jc in ((j2, j3, j1), (j3, j1, j2)):
                            if ja == j1 and jb == j2 and jc == j3:
                                continue
                            if ja in fsets[i1] and jb in fsets[i2] and jc in fsets[i3]:
                                if state.try_moves([(i1, ja), (i2, jb), (i3, jc)]):
                                    moved = True
                                    break
    return genes


class NurseHillclimber:
    """Engine hook: gate on balance, then run :func:`improve`."""

    def __init__(self, max_chain: int = 3):
        self.max_chain = max_chain

    def applies_to(self, problem, assignment) -> bool:
        return is_balanced(problem.instance, assignment)

    def improve(self, problem, assignment, w: float) -> np.ndarray:
        return improve(problem.instance, assignment, w, self.max_chain)
