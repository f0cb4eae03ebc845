"""Pyramid topologies: which slots each sub-population level evolves.

Levels own segments of a global slot ordering (problem entities reordered so
every level is a union of contiguous blocks).  Lower levels evolve shorter
strings; fixed-point crossover grafts a lower-level string into a higher one,
and evaluation complements name the levels whose agents complete a partial
string into a full solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Genome


class TopologyError(ValueError):
    """Raised for malformed level structures."""


@dataclass
class LevelSpec:
    """One sub-population level of the pyramid."""

    level_id: str
    segments: tuple[tuple[int, int], ...]  # half-open global slot ranges
    capacity: int
    crossover_sources: tuple[str, ...]
    evaluation_complements: tuple[str, ...]
    scope: tuple[int, ...]  # problem payload: grades (nurse) or areas (mall)

    @property
    def slot_count(self) -> int:
        return sum(stop - start for start, stop in self.segments)

    @property
    def positions(self) -> np.ndarray:
        """Global slot indices in gene order."""
        if not hasattr(self, "_positions"):
            parts = [np.arange(start, stop, dtype=np.int64) for start, stop in self.segments]
            self._positions = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
        return self._positions


@dataclass
class Topology:
    """All levels of one pyramid plus the slot-to-entity ordering."""

    levels: list[LevelSpec]  # bottom-up; the last entry is the top level
    slot_to_entity: np.ndarray
    by_id: dict[str, LevelSpec] = field(init=False)
    _local: dict[str, np.ndarray] = field(init=False, default_factory=dict)
    _graft: dict[tuple[str, str], np.ndarray] = field(init=False, default_factory=dict)

    def __post_init__(self):
        self.slot_to_entity = np.asarray(self.slot_to_entity, dtype=np.int64)
        self.by_id = {lvl.level_id: lvl for lvl in self.levels}
        if len(self.by_id) != len(self.levels):
            raise TopologyError("duplicate level ids")

    @property
    def n_slots(self) -> int:
        return len(self.slot_to_entity)

    @property
    def top_level_id(self) -> str:
        return self.levels[-1].level_id

    @property
    def total_capacity(self) -> int:
        return sum(lvl.capacity for lvl in self.levels)

    def level(self, level_id: str) -> LevelSpec:
        try:
            return self.by_id[level_id]
        except KeyError:
            raise TopologyError(f"unknown level {level_id!r}") from None

    def level_order(self, level_id: str) -> int:
        """Position of the level in the bottom-up sequence (population index)."""
        self.level(level_id)
        return next(i for i, lvl in enumerate(self.levels) if lvl.level_id == level_id)

    def is_full_level(self, level_id: str) -> bool:
        return self.level(level_id).slot_count == self.n_slots

    def local_index(self, level_id: str) -> np.ndarray:
        """Global slot -> gene position within the level, -1 where uncovered."""
        if level_id not in self._local:
            lvl = self.level(level_id)
            local = np.full(self.n_slots, -1, dtype=np.int64)
            local[lvl.positions] = np.arange(lvl.slot_count, dtype=np.int64)
            self._local[level_id] = local
        return self._local[level_id]

    def graft_index(self, lower_id: str, higher_id: str) -> np.ndarray:
        """Gene positions inside the higher level for each lower-level gene."""
        key = (lower_id, higher_id)
        if key not in self._graft:
            lower, higher = self.level(lower_id), self.level(higher_id)
            idx = self.local_index(higher_id)[lower.positions]
            if (idx < 0).any() or lower.slot_count >= higher.slot_count:
                raise TopologyError("non-nested levels")
            self._graft[key] = idx
        return self._graft[key]

    def validate(self):
        covered = np.zeros(self.n_slots, dtype=np.int64)
        for lvl in self.levels:
            if lvl.capacity < 1:
                raise TopologyError(f"level {lvl.level_id} has no capacity")
            for start, stop in lvl.segments:
                if not (0 <= start <= stop <= self.n_slots):
                    raise TopologyError(f"segment out of range in level {lvl.level_id}")
            pos = lvl.positions
            if len(np.unique(pos)) != len(pos):
                raise TopologyError(f"overlapping segments in level {lvl.level_id}")
        top = self.levels[-1]
        if top.slot_count != self.n_slots:
            raise TopologyError("top level must cover every slot")
        if sorted(self.slot_to_entity.tolist()) != list(range(self.n_slots)):
            raise TopologyError("slot order must be a permutation of the entities")
        for lvl in self.levels:
            own = set(lvl.positions.tolist())
            for src in lvl.crossover_sources:
                src_slots = set(self.level(src).positions.tolist())
                if not (src_slots < own):
                    raise TopologyError(
                        f"crossover source {src} of {lvl.level_id} is not a strict sub-level"
                    )
            covered[:] = 0
            covered[lvl.positions] += 1
            for comp in lvl.evaluation_complements:
                covered[self.level(comp).positions] += 1
            if lvl.evaluation_complements or not self.is_full_level(lvl.level_id):
                if not (covered == 1).all():
                    raise TopologyError(
                        f"complements of {lvl.level_id} do not partition the slots"
                    )


def complement_levels(level_id: str, topology: Topology) -> tuple[str, ...]:
    """The configured evaluation complements; empty for full-length levels."""
    return topology.level(level_id).evaluation_complements


def fixed_point_crossover(lower: Genome, higher: Genome, topology: Topology) -> Genome:
    """Graft a lower-level string into a higher-level parent.

    The child lives at the higher level: genes on the lower level's slots are
    copied from the lower parent, everything else from the higher parent.
    """
    idx = topology.graft_index(lower.level_id, higher.level_id)
    genes = higher.genes.copy()
    genes[idx] = lower.genes
    return Genome(level_id=higher.level_id, genes=genes)


def build_nurse_topology(instance) -> Topology:
    """The eight-level nurse pyramid.

    Single-grade levels feed the two-grade levels, which feed the grade-blind
    full level; the top level draws cross-level parents from every strict
    sub-level.  Nurses are reordered grade-contiguously; the grade-3+1 level
    is realised as two segments.
    """
    if instance.p != 3:
        raise TopologyError("nurse topology requires three grades")
    order = np.argsort(instance.grade_of, kind="stable").astype(np.int64)
    counts = [int((instance.grade_of == g).sum()) for g in (1, 2, 3)]
    o1, o2 = counts[0], counts[0] + counts[1]
    n = int(instance.n)
    seg = {1: (0, o1), 2: (o1, o2), 3: (o2, n)}
    levels = [
        LevelSpec("g1", (seg[1],), 100, (), ("g23",), (1,)),
        LevelSpec("g2", (seg[2],), 100, (), ("g31",), (2,)),
        LevelSpec("g3", (seg[3],), 100, (), ("g12",), (3,)),
        LevelSpec("g12", (seg[1], seg[2]), 100, ("g1", "g2"), ("g3",), (1, 2)),
        LevelSpec("g23", (seg[2], seg[3]), 100, ("g2", "g3"), ("g1",), (2, 3)),
        LevelSpec("g31", (seg[3], seg[1]), 100, ("g3", "g1"), ("g2",), (3, 1)),
        LevelSpec("g123", ((0, n),), 100, ("g1", "g2", "g3", "g12", "g23", "g31"), (), (1, 2, 3)),
        LevelSpec(
            "all", ((0, n),), 300, ("g1", "g2", "g3", "g12", "g23", "g31"), (), (1, 2, 3)
        ),
    ]
    # Empty grades can make a source level cover the same slots as its
    # target; such sources are dropped to keep the strict-subset invariant.
    slot_sets = {lvl.level_id: set(lvl.positions.tolist()) for lvl in levels}
    for i, lvl in enumerate(levels):
        kept = tuple(
            src for src in lvl.crossover_sources if slot_sets[src] < slot_sets[lvl.level_id]
        )
        if kept != lvl.crossover_sources:
            levels[i] = LevelSpec(
                lvl.level_id, lvl.segments, lvl.capacity, kept, lvl.evaluation_complements, lvl.scope
            )
    topo = Topology(levels, order)
    topo.validate()
    return topo


def build_mall_topology(instance) -> Topology:
    """Five area levels of 100 agents plus a 500-agent full level."""
    if instance.n_areas != 5:
        raise TopologyError("mall topology requires five areas")
    lpa = instance.locs_per_area
    area_ids = tuple(f"a{a + 1}" for a in range(5))
    levels = []
    for a in range(5):
        comps = tuple(area_ids[b] for b in range(5) if b != a)
        levels.append(LevelSpec(area_ids[a], ((a * lpa, (a + 1) * lpa),), 100, (), comps, (a,)))
    levels.append(LevelSpec("all", ((0, instance.n_locations),), 500, area_ids, (), tuple(range(5))))
    topo = Topology(levels, np.arange(instance.n_locations, dtype=np.int64))
    topo.validate()
    return topo


def build_single_topology(n_entities: int, scope: tuple[int, ...], capacity: int = 1000) -> Topology:
    """Degenerate one-population configuration (the plain-GA baseline)."""
    levels = [LevelSpec("all", ((0, n_entities),), capacity, (), (), scope)]
    topo = Topology(levels, np.arange(n_entities, dtype=np.int64))
    topo.validate()
    return topo


def describe(topology: Topology) -> str:
    """Human-readable level table."""
    header = f"{'level':<8}{'capacity':>9}{'slots':>7}  {'segments':<22}{'sources':<28}{'complements'}"
    lines = [header, "-" * len(header)]
    for lvl in topology.levels:
        segs = ",".join(f"[{a},{b})" for a, b in lvl.segments)
        lines.append(
            f"{lvl.level_id:<8}{lvl.capacity:>9}{lvl.slot_count:>7}  {segs:<22}"
            f"{','.join(lvl.crossover_sources) or '-':<28}{','.join(lvl.evaluation_complements) or '-'}"
        )
    lines.append(f"total capacity: {topology.total_capacity}, slots: {topology.n_slots}")
    return "\n".join(lines)
