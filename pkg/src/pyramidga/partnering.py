"""Partner selection for fitness evaluation.

A partial solution cannot be scored against the full problem on its own.
These strategies pick agents from the complementary sub-populations, graft
them segment-wise into one full solution and award the agent its penalised
full fitness.  Strategy S skips partners entirely and scores the level's own
sub-fitness; the double strategies SR, BR and RR evaluate twice with
independently drawn partners and keep the better result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .engine import Genome, SubPopulation, rank_roulette_select

STRATEGIES = ("S", "R", "B", "D", "SR", "BR", "RR")
DOUBLE_DRAWS = {"SR": ("S", "R"), "BR": ("B", "R"), "RR": ("R", "R")}

NEIGHBOUR_OFFSETS = (
    (-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1),
)


class PartneringError(RuntimeError):
    """Raised when a strategy cannot produce a partner."""


@dataclass
class ToroidalGrid:
    """A single wrap-around grid shared by every sub-population.

    Capacity-100 levels occupy one agent per cell; larger levels stack agents
    round-robin.  The placement map is rebuilt each generation from the cell
    recorded on each genome.
    """

    width: int
    height: int
    placement: dict[tuple[str, int], tuple[int, int]] = field(default_factory=dict)
    _occupants: dict[str, dict[tuple[int, int], list[int]]] = field(
        default_factory=dict, repr=False
    )

    def wrap(self, x: int, y: int) -> tuple[int, int]:
        return x % self.width, y % self.height

    def neighbours(self, cell: tuple[int, int]) -> tuple[tuple[int, int], ...]:
        x, y = cell
        return tuple(self.wrap(x + dx, y + dy) for dx, dy in NEIGHBOUR_OFFSETS)

    def place_level_evenly(self, level_id: str, agents: Sequence[Genome]):
        cells = self.width * self.height
        for k, agent in enumerate(agents):
            agent.cell = self.wrap((k % cells) % self.width, (k % cells) // self.width)
        self.rebuild_level(level_id, agents)

    def rebuild_level(self, level_id: str, agents: Sequence[Genome]):
        occ: dict[tuple[int, int], list[int]] = {}
        for k, agent in enumerate(agents):
            if agent.cell is None:
                raise PartneringError(f"agent {k} of {level_id} has no grid cell")
            self.placement[(level_id, k)] = agent.cell
            occ.setdefault(agent.cell, []).append(k)
        self._occupants[level_id] = occ

    def cell_of(self, level_id: str, index: int) -> tuple[int, int]:
        return self.placement[(level_id, index)]

    def agents_at(self, level_id: str, cell: tuple[int, int]) -> list[int]:
        return self._occupants.get(level_id, {}).get(cell, [])


def pick_partner_S(pool: SubPopulation, rng: np.random.Generator) -> int:
    """Rank-roulette over the complement pool."""
    return rank_roulette_select(pool, rng)


def pick_partner_R(pool: SubPopulation, rng: np.random.Generator) -> int:
    """Uniform over the complement pool."""
    if not pool.agents:
        raise PartneringError("empty partner pool")
    return int(rng.integers(len(pool.agents)))


def pick_partner_B(pools: Sequence[tuple[int, SubPopulation]]) -> tuple[int, int]:
    """The best previously scored agent across the given pools.

    ``pools`` pairs each pool with its population index; fitness ties resolve
    to the lower population index, then the lower agent index.  Returns
    (population index, agent index).
    """
    best = None
    for order, pool in pools:
        if not pool.agents:
            continue
        idx = int(pool.rank_order()[0])
        key = (float(pool.fitness_array()[idx]), order, idx)
        if best is None or key < best:
            best = key
    if best is None:
        raise PartneringError("empty partner pool")
    return best[1], best[2]


def _ring_cells(grid: ToroidalGrid, cell: tuple[int, int], distance: int):
    x, y = cell
    seen = set()
    for dx in range(-distance, distance + 1):
        for dy in range(-distance, distance + 1):
            if max(abs(dx), abs(dy)) == distance:
                wrapped = grid.wrap(x + dx, y + dy)
                if wrapped not in seen:  # the torus can fold a ring onto itself
                    seen.add(wrapped)
                    yield wrapped


def pick_partner_D(
    agent_cell: tuple[int, int],
    pool: SubPopulation,
    grid: ToroidalGrid,
    rng: np.random.Generator,
    widen: bool = False,
) -> int:
    """Uniform among the pool's agents sharing the agent's grid cell, falling
    back to the eight surrounding cells.

    With ``widen`` the search keeps growing ring by ring instead of raising;
    population drift empties neighbourhoods occasionally, and a long run must
    survive that.
    """
    candidates = grid.agents_at(pool.level_id, agent_cell)
    distance = 1
    max_distance = max(grid.width, grid.height) if widen else 1
    while not candidates and distance <= max_distance:
        candidates = [
            idx
            for cell in _ring_cells(grid, agent_cell, distance)
            for idx in grid.agents_at(pool.level_id, cell)
        ]
        distance += 1
    if not candidates:
        raise PartneringError("sparse grid")
    return candidates[int(rng.integers(len(candidates)))]


def grid_insert_child(
    child: Genome,
    parent_cell: tuple[int, int],
    grid: ToroidalGrid,
    rng: np.random.Generator,
) -> tuple[int, int]:
    """Cell for a freshly created child: uniform among the parent's eight
    neighbouring cells."""
    return grid.neighbours(parent_cell)[int(rng.integers(8))]


def evaluate(
    agent: Genome,
    strategy: str,
    topology,
    pools: Mapping[str, SubPopulation],
    problem,
    penalty,
    grid: ToroidalGrid | None = None,
    rng: np.random.Generator | None = None,
    recorder: Callable | None = None,
) -> tuple[float, bool]:
    """Score one agent under a partnering strategy and cache the result.

    Full-length levels are scored directly (S keeps the grade-blind
    sub-fitness on the non-top full level).  Partial levels under S receive
    their sub-fitness; every other strategy assembles one full solution per
    evaluation, drawing one partner per complement level.
    """
    if strategy not in STRATEGIES:
        raise PartneringError(f"unknown strategy {strategy!r}")
    lvl = topology.level(agent.level_id)
    w = penalty.w
    comps = lvl.evaluation_complements

    def full_own() -> tuple[float, float, float, bool]:
        assignment = _to_entity(topology, agent.genes)
        result = problem.full_eval(assignment, w)
        if recorder is not None:
            recorder(assignment, *result)
        return result

    if not comps:
        if not topology.is_full_level(lvl.level_id):
            raise PartneringError(f"no evaluation complements for level {lvl.level_id!r}")
        if strategy == "S" and lvl.level_id != topology.top_level_id:
            result = problem.sub_eval(lvl.level_id, agent.genes, w)
        else:
            result = full_own()
    elif strategy == "S":
        result = problem.sub_eval(lvl.level_id, agent.genes, w)
    else:
        draws = DOUBLE_DRAWS.get(strategy, (strategy,))
        result = None
        for kind in draws:
            candidate = _composite(
                agent, kind, lvl, topology, pools, problem, w, grid, rng, recorder
            )
            if result is None or candidate[0] < result[0]:
                result = candidate
    agent.set_cache(result[0], result[1], result[2], result[3])
    return result[0], result[3]


def _to_entity(topology, full_genes):
    """Full slot-ordered genes -> assignment indexed by problem entity."""
    assignment = np.empty(topology.n_slots, dtype=np.int64)
    assignment[topology.slot_to_entity] = full_genes
    return assignment


def _composite(
    agent: Genome,
    draw_kind: str,
    lvl,
    topology,
    pools: Mapping[str, SubPopulation],
    problem,
    w: float,
    grid: ToroidalGrid | None,
    rng: np.random.Generator | None,
    recorder: Callable | None,
) -> tuple[float, float, float, bool]:
    full = np.empty(topology.n_slots, dtype=np.int64)
    full[lvl.positions] = agent.genes
    for comp_id in lvl.evaluation_complements:
        pool = pools[comp_id]
        if draw_kind == "R":
            pidx = pick_partner_R(pool, rng)
        elif draw_kind == "S":
            pidx = pick_partner_S(pool, rng)
        elif draw_kind == "B":
            _, pidx = pick_partner_B([(topology.level_order(comp_id), pool)])
        elif draw_kind == "D":
            if grid is None:
                raise PartneringError("missing grid for D")
            if agent.cell is None:
                raise PartneringError("agent has no grid cell")
            pidx = pick_partner_D(agent.cell, pool, grid, rng, widen=True)
        else:  # pragma: no cover - guarded by STRATEGIES check
            raise PartneringError(f"unknown draw kind {draw_kind!r}")
        comp_lvl = topology.level(comp_id)
        full[comp_lvl.positions] = pool.agents[pidx].genes
    assignment = _to_entity(topology, full)
    result = problem.full_eval(assignment, w)
    if recorder is not None:
        recorder(assignment, *result)
    return result
