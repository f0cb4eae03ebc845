"""Generational coevolution engine.

Holds the shared genome/population types, the five generational operators
(rank-roulette selection, parameterised uniform crossover, domain-respecting
mutation, elitist truncation replacement and the stagnation stop rule) and
the :class:`CoevolutionEngine` loop that drives all sub-populations of a
pyramid through selection, crossover, mutation, partnered evaluation,
replacement and penalty adaptation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from . import penalty as penalty_mod


class EngineError(RuntimeError):
    """Raised when an engine operation is misused."""


def _ceil(x: float) -> int:
    return math.ceil(x - 1e-9)


def _floor(x: float) -> int:
    return math.floor(x + 1e-9)


@dataclass(slots=True)
class Genome:
    """A (partial) solution string owned by one sub-population level."""

    level_id: str
    genes: np.ndarray
    cached_fitness: float | None = None
    cached_feasible: bool | None = None
    cached_raw: float | None = None
    cached_violation: float | None = None
    cell: tuple[int, int] | None = None
    hc_done: bool = False

    def clear_cache(self):
        self.cached_fitness = None
        self.cached_feasible = None
        self.cached_raw = None
        self.cached_violation = None
        self.hc_done = False

    def set_cache(self, fitness: float, raw: float, violation: float, feasible: bool):
        self.cached_fitness = fitness
        self.cached_raw = raw
        self.cached_violation = violation
        self.cached_feasible = feasible


@dataclass
class SubPopulation:
    """Fixed-capacity agent pool of one level."""

    level_id: str
    agents: list[Genome]
    capacity: int
    _cache: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def dirty(self):
        self._cache.clear()

    def fitness_array(self) -> np.ndarray:
        if "fit" not in self._cache:
            vals = [a.cached_fitness for a in self.agents]
            if any(v is None for v in vals):
                raise EngineError("unevaluated agent in sub-population")
            self._cache["fit"] = np.asarray(vals, dtype=np.float64)
        return self._cache["fit"]

    def feasible_array(self) -> np.ndarray:
        if "feas" not in self._cache:
            self._cache["feas"] = np.asarray(
                [bool(a.cached_feasible) for a in self.agents], dtype=bool
            )
        return self._cache["feas"]

    def rank_order(self) -> np.ndarray:
        """Agent indices from best to worst fitness, ties to the lower index."""
        if "order" not in self._cache:
            self._cache["order"] = np.argsort(self.fitness_array(), kind="stable")
        return self._cache["order"]


@dataclass
class EngineConfig:
    """Knobs of the generational loop."""

    uniform_inherit_prob: float = 0.66
    mutation_rate: float = 0.01
    replacement_fraction: float = 0.9
    stagnation_window: int = 50
    cross_level_fraction: float = 0.5
    max_generations: int = 2000
    rng_seed: int = 0
    elitist_pool: bool = False  # if set, children compete with all parents
    audit: bool = False

    def __post_init__(self):
        if not (0 < self.uniform_inherit_prob < 1):
            raise EngineError("uniform_inherit_prob must lie in (0, 1)")
        if not (0 <= self.mutation_rate <= 1):
            raise EngineError("mutation_rate must lie in [0, 1]")
        if not (0 < self.replacement_fraction <= 1):
            raise EngineError("replacement_fraction must lie in (0, 1]")
        if self.stagnation_window < 1 or self.max_generations < 1:
            raise EngineError("stagnation_window and max_generations must be positive")
        if not (0 <= self.cross_level_fraction <= 1):
            raise EngineError("cross_level_fraction must lie in [0, 1]")
        if not (0 <= self.rng_seed < 2**64):
            raise EngineError("rng_seed must be a 64-bit unsigned integer")


class DomainTable:
    """Per-slot feasible gene values, padded for vectorised draws."""

    def __init__(self, sets: Sequence[np.ndarray]):
        self.sets = [np.asarray(s, dtype=np.int64) for s in sets]
        if any(len(s) == 0 for s in self.sets):
            raise EngineError("infeasible slot domain")
        self.n_slots = len(self.sets)
        self.sizes = np.array([len(s) for s in self.sets], dtype=np.int64)
        width = int(self.sizes.max(initial=1))
        self.padded = np.zeros((self.n_slots, width), dtype=np.int64)
        for i, s in enumerate(self.sets):
            self.padded[i, : len(s)] = s
        self._rows = np.arange(self.n_slots, dtype=np.int64)

    @classmethod
    def ensure(cls, domains) -> "DomainTable":
        return domains if isinstance(domains, cls) else cls(domains)

    def draw_all(self, rng: np.random.Generator) -> np.ndarray:
        if self.n_slots == 0:
            return np.empty(0, dtype=np.int64)
        return self.padded[self._rows, rng.integers(0, self.sizes)]

    def contains(self, genes: np.ndarray) -> bool:
        return all(int(g) in set(s.tolist()) for g, s in zip(genes, self.sets))


_RANK_CUMSUM: dict[int, np.ndarray] = {}


def _rank_cumsum(capacity: int) -> np.ndarray:
    if capacity not in _RANK_CUMSUM:
        # Rank r (1 = best) carries weight capacity - r + 1.
        _RANK_CUMSUM[capacity] = np.cumsum(np.arange(capacity, 0, -1, dtype=np.float64))
    return _RANK_CUMSUM[capacity]


def rank_roulette_select(subpop: SubPopulation, rng: np.random.Generator) -> int:
    """Roulette wheel over fitness ranks: the best of C agents has weight C,
    the worst weight 1; fitness ties rank the lower agent index better."""
    n = len(subpop.agents)
    if n == 0:
        raise EngineError("empty population")
    if n == 1:
        return 0
    cumw = _rank_cumsum(n)
    pos = int(np.searchsorted(cumw, rng.random() * cumw[-1], side="right"))
    return int(subpop.rank_order()[pos])


def uniform_crossover(
    a: Genome, b: Genome, p: float, rng: np.random.Generator
) -> tuple[Genome, Genome]:
    """Two-parent two-children parameterised uniform crossover: each position
    of the first child comes from ``a`` with probability ``p``, the second
    child takes the complementary gene everywhere."""
    if a.level_id != b.level_id or len(a.genes) != len(b.genes):
        raise EngineError("incompatible genomes")
    mask = rng.random(len(a.genes)) < p
    child1 = Genome(a.level_id, np.where(mask, a.genes, b.genes))
    child2 = Genome(a.level_id, np.where(mask, b.genes, a.genes))
    return child1, child2


def mutate(g: Genome, rate: float, domains, rng: np.random.Generator) -> Genome:
    """Re-initialise each gene with probability ``rate`` by a uniform draw
    from its slot's feasible set (the draw may repeat the current value).
    The fitness cache survives when no gene actually changed."""
    table = DomainTable.ensure(domains)
    if table.n_slots != len(g.genes):
        raise EngineError("domains must cover every slot")
    mask = rng.random(len(g.genes)) < rate
    out = Genome(g.level_id, g.genes, cell=g.cell)
    if mask.any():
        idx = np.flatnonzero(mask)
        draws = rng.integers(0, table.sizes[idx])
        new = g.genes.copy()
        new[idx] = table.padded[idx, draws]
        out.genes = new
        if (new[idx] != g.genes[idx]).any():
            return out
    out.set_cache(g.cached_fitness, g.cached_raw, g.cached_violation, g.cached_feasible)
    out.genes = g.genes.copy()
    return out


def _replacement_pick(
    subpop: SubPopulation, children: Sequence[Genome], fraction: float, elitist_pool: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Indices of surviving parents and of promoted children."""
    cap = subpop.capacity
    n_replace = _ceil(fraction * cap)
    n_keep = cap - n_replace
    if len(children) < n_replace:
        raise EngineError("underfilled generation")
    child_fit = np.asarray([c.cached_fitness for c in children], dtype=np.float64)
    if elitist_pool:
        pooled = np.concatenate([subpop.fitness_array(), child_fit])
        order = np.argsort(pooled, kind="stable")[:cap]
        return order[order < cap], order[order >= cap] - cap
    keep = subpop.rank_order()[:n_keep]
    best_children = np.argsort(child_fit, kind="stable")[:n_replace]
    return keep, best_children


def replace_generation(
    subpop: SubPopulation,
    children: Sequence[Genome],
    fraction: float,
    elitist_pool: bool = False,
) -> SubPopulation:
    """Elitist truncation: the best (1 - fraction) share of parents survives,
    the best children fill the replaced slots (ties to the lower index)."""
    keep, promote = _replacement_pick(subpop, children, fraction, elitist_pool)
    agents = [subpop.agents[i] for i in sorted(keep.tolist())]
    agents.extend(children[i] for i in sorted(promote.tolist()))
    return SubPopulation(subpop.level_id, agents, subpop.capacity)


def check_stop(
    best_history: Sequence[float], window: int, max_generations: int, current_gen: int
) -> bool:
    """Stop once the rolling best has not improved on the pre-window best for
    a full window, or the generation cap is reached."""
    if current_gen >= max_generations:
        return True
    if len(best_history) < window + 1:
        return False
    hist = np.asarray(best_history, dtype=np.float64)
    return bool(hist[-window:].min() >= hist[:-window].min())


class BestTracker:
    """Best full solutions seen across every full evaluation of a run."""

    __slots__ = ("best_penalised", "best_feasible_raw", "best_feasible_assignment", "evaluations")

    def __init__(self):
        self.best_penalised = math.inf
        self.best_feasible_raw: float | None = None
        self.best_feasible_assignment: np.ndarray | None = None
        self.evaluations = 0

    def record(self, assignment, penalised, raw, violation, feasible):
        self.evaluations += 1
        if penalised < self.best_penalised:
            self.best_penalised = penalised
        if feasible and (self.best_feasible_raw is None or raw < self.best_feasible_raw):
            self.best_feasible_raw = raw
            self.best_feasible_assignment = np.array(assignment, dtype=np.int64)


class LocalSearch(Protocol):
    """Optional memetic refinement applied to top-level agents."""

    def applies_to(self, problem, assignment: np.ndarray) -> bool: ...

    def improve(self, problem, assignment: np.ndarray, w: float) -> np.ndarray: ...


@dataclass
class RunResult:
    generations: int
    evaluations: int
    best_feasible_raw: float | None
    best_feasible_assignment: np.ndarray | None
    best_penalised: float
    history: list[float]
    feasible_history: list[float | None]


LOCAL_SEARCH_SHARE = 0.05  # best share of the top level offered to the hillclimber


class CoevolutionEngine:
    """One seeded, fully deterministic coevolution run."""

    def __init__(
        self,
        problem,
        topology,
        strategy: str,
        config: EngineConfig | None = None,
        *,
        local_search: LocalSearch | None = None,
        penalty_beta: float = 1.1,
        penalty_w0_scale: float = 1.0,
        grid_dims: tuple[int, int] = (10, 10),
        recorder: Callable | None = None,
    ):
        from . import partnering  # deferred: partnering imports engine types
        from .pyramid import fixed_point_crossover

        if strategy not in partnering.STRATEGIES:
            raise EngineError(f"unknown strategy {strategy!r}")
        self._partnering = partnering
        self._fixed_point_crossover = fixed_point_crossover
        self.problem = problem
        self.topology = topology
        self.strategy = strategy
        self.config = config or EngineConfig()
        self.local_search = local_search
        self.rng = np.random.default_rng(self.config.rng_seed)
        self.tracker = BestTracker()
        self._extra_recorder = recorder
        self.generation = 0
        self.history: list[float] = []
        self.feasible_history: list[float | None] = []
        self.stats = {"cross_children": {}, "uniform_children": {}}

        self.populations: dict[str, SubPopulation] = {}
        self.penalties: dict[str, penalty_mod.PenaltyState] = {}
        self._domains: dict[str, DomainTable] = {}
        scale = problem.penalty_scale()
        for lvl in topology.levels:
            entities = topology.slot_to_entity[lvl.positions]
            problem.bind_level(
                lvl.level_id, lvl.scope, entities, full=lvl.level_id == topology.top_level_id
            )
            table = DomainTable([problem.domain_of(int(e)) for e in entities])
            self._domains[lvl.level_id] = table
            agents = [
                Genome(lvl.level_id, table.draw_all(self.rng)) for _ in range(lvl.capacity)
            ]
            self.populations[lvl.level_id] = SubPopulation(lvl.level_id, agents, lvl.capacity)
            self.penalties[lvl.level_id] = penalty_mod.make_state(
                scale, beta=penalty_beta, w0_scale=penalty_w0_scale
            )
            self.stats["cross_children"][lvl.level_id] = 0
            self.stats["uniform_children"][lvl.level_id] = 0

        self.grid = None
        if strategy == "D":
            self.grid = partnering.ToroidalGrid(*grid_dims)
            for lvl in topology.levels:
                self.grid.place_level_evenly(lvl.level_id, self.populations[lvl.level_id].agents)

        self._bootstrap()
        self._record_generation()

    # -- evaluation ---------------------------------------------------------

    def _record(self, assignment, penalised, raw, violation, feasible):
        self.tracker.record(assignment, penalised, raw, violation, feasible)
        if self._extra_recorder is not None:
            self._extra_recorder(assignment, penalised, raw, violation, feasible)

    def _evaluate(self, agent: Genome, strategy: str):
        self._partnering.evaluate(
            agent,
            strategy,
            self.topology,
            self.populations,
            self.problem,
            self.penalties[agent.level_id],
            grid=self.grid,
            rng=self.rng,
            recorder=self._record,
        )

    def _bootstrap(self):
        """Initial fitness pass: every agent first receives its own level's
        sub-fitness so that rank- and best-based partner picks have scores to
        work from, then partner-dependent levels are re-scored under the
        configured strategy."""
        for lvl in self.topology.levels:
            for agent in self.populations[lvl.level_id].agents:
                self._evaluate(agent, "S")
        if self.strategy != "S":
            for lvl in self.topology.levels:
                if not lvl.evaluation_complements:
                    continue  # partner-free fitness is strategy-independent
                subpop = self.populations[lvl.level_id]
                for agent in subpop.agents:
                    self._evaluate(agent, self.strategy)
                subpop.dirty()

    # -- one generation -----------------------------------------------------

    def _spawn_children(self, lvl) -> list[Genome]:
        cfg = self.config
        subpop = self.populations[lvl.level_id]
        n_children = _ceil(cfg.replacement_fraction * subpop.capacity)
        n_cross = _floor(n_children * cfg.cross_level_fraction) if lvl.crossover_sources else 0
        n_uniform = n_children - n_cross
        rng = self.rng
        grid = self.grid
        raw: list[Genome] = []
        while len(raw) < n_uniform:
            pa = subpop.agents[rank_roulette_select(subpop, rng)]
            pb = subpop.agents[rank_roulette_select(subpop, rng)]
            c1, c2 = uniform_crossover(pa, pb, cfg.uniform_inherit_prob, rng)
            if grid is not None:
                c1.cell = self._partnering.grid_insert_child(c1, pa.cell, grid, rng)
                c2.cell = self._partnering.grid_insert_child(c2, pb.cell, grid, rng)
            raw.extend((c1, c2))
        del raw[n_uniform:]
        self.stats["uniform_children"][lvl.level_id] += len(raw)
        for _ in range(n_cross):
            pa = subpop.agents[rank_roulette_select(subpop, rng)]
            src = lvl.crossover_sources[int(rng.integers(len(lvl.crossover_sources)))]
            src_pop = self.populations[src]
            pb = src_pop.agents[rank_roulette_select(src_pop, rng)]
            child = self._fixed_point_crossover(pb, pa, self.topology)
            if grid is not None:
                child.cell = self._partnering.grid_insert_child(child, pa.cell, grid, rng)
            raw.append(child)
        self.stats["cross_children"][lvl.level_id] += n_cross
        table = self._domains[lvl.level_id]
        children = []
        for ch in raw:
            mutated = mutate(ch, cfg.mutation_rate, table, rng)
            if mutated.cached_fitness is None:
                self._evaluate(mutated, self.strategy)
            children.append(mutated)
        return children

    def step(self):
        """One full generation over every sub-population."""
        cfg = self.config
        children_of = {
            lvl.level_id: self._spawn_children(lvl) for lvl in self.topology.levels
        }
        for lvl in self.topology.levels:
            self.populations[lvl.level_id] = replace_generation(
                self.populations[lvl.level_id],
                children_of[lvl.level_id],
                cfg.replacement_fraction,
                cfg.elitist_pool,
            )
        if self.grid is not None:
            for lvl in self.topology.levels:
                self.grid.rebuild_level(lvl.level_id, self.populations[lvl.level_id].agents)
        if self.local_search is not None:
            self._apply_local_search()
        self.generation += 1
        self._record_generation()
        if cfg.audit:
            self.audit()

    def _apply_local_search(self):
        top_id = self.topology.top_level_id
        top = self.populations[top_id]
        w = self.penalties[top_id].w
        k = max(1, _floor(LOCAL_SEARCH_SHARE * top.capacity))
        entities = self.topology.slot_to_entity
        changed = False
        for idx in top.rank_order()[:k].tolist():
            agent = top.agents[idx]
            if agent.hc_done:
                continue
            agent.hc_done = True
            assignment = np.empty_like(agent.genes)
            assignment[entities] = agent.genes
            if not self.local_search.applies_to(self.problem, assignment):
                continue
            improved = self.local_search.improve(self.problem, assignment, w)
            if np.array_equal(improved, assignment):
                continue
            agent.genes = improved[entities]
            pen, raw, viol, feas = self.problem.full_eval(improved, w)
            agent.set_cache(pen, raw, viol, feas)
            agent.hc_done = True
            self._record(improved, pen, raw, viol, feas)
            changed = True
        if changed:
            top.dirty()

    def _record_generation(self):
        for lvl in self.topology.levels:
            subpop = self.populations[lvl.level_id]
            fit = subpop.fitness_array()
            feas = subpop.feasible_array()
            best = float(fit.min())
            best_feasible = float(fit[feas].min()) if feas.any() else None
            self.penalties[lvl.level_id] = penalty_mod.update(
                self.penalties[lvl.level_id], best, best_feasible
            )
        top_fit = self.populations[self.topology.top_level_id].fitness_array()
        self.history.append(float(top_fit.min()))
        self.feasible_history.append(self.tracker.best_feasible_raw)

    def audit(self):
        """Debug check: every agent is slot-feasible and correctly sized."""
        for lvl in self.topology.levels:
            subpop = self.populations[lvl.level_id]
            if len(subpop.agents) != subpop.capacity:
                raise EngineError(f"population size drifted in {lvl.level_id}")
            table = self._domains[lvl.level_id]
            for agent in subpop.agents:
                if agent.level_id != lvl.level_id or len(agent.genes) != lvl.slot_count:
                    raise EngineError(f"mis-shaped genome in {lvl.level_id}")
                if not table.contains(agent.genes):
                    raise EngineError(f"slot-infeasible gene in {lvl.level_id}")

    def should_stop(self) -> bool:
        return check_stop(
            self.history,
            self.config.stagnation_window,
            self.config.max_generations,
            self.generation,
        )

    def run(self) -> RunResult:
        while not self.should_stop():
            self.step()
        return RunResult(
            generations=self.generation,
            evaluations=self.tracker.evaluations,
            best_feasible_raw=self.tracker.best_feasible_raw,
            best_feasible_assignment=self.tracker.best_feasible_assignment,
            best_penalised=self.tracker.best_penalised,
            history=list(self.history),
            feasible_history=list(self.feasible_history),
        )
