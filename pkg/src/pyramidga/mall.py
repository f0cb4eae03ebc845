"""Mall tenant selection: rent model, size decomposition and constraints.

A layout assigns one shop type to each location.  Locations are grouped into
areas; contiguous same-type runs inside an area merge into larger shops
(small/medium/large occupy 1/2/3 locations, longest shops carved out first).
Rent combines a fixed amount per shop, an area-attractiveness multiple of the
size rent, synergy between neighbouring shops sharing a group, and a per-type
bonus that peaks at the ideal shop count.  Constraints are global: per-type
shop counts must stay within [min, max] and the mall-wide size-class totals
below their limits.

All rent tables hold integers or quarter units, so every rent total is an
exact float and independent implementations agree bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

SMALL, MEDIUM, LARGE = 0, 1, 2
SIZE_NAMES = ("small", "medium", "large")


class MallModelError(ValueError):
    """Raised for invalid mall instances or layouts."""


def quarter(x: float) -> float:
    """Snap to the nearest quarter unit (ties to even)."""
    return round(x * 4) / 4


@dataclass
class MallInstance:
    """Rent tables and constraint bounds for one mall."""

    name: str
    n_areas: int
    locs_per_area: int
    n_types: int
    groups_of: list[tuple[int, ...]]  # group ids per type
    attract: np.ndarray  # (areas, types) quarter units
    size_rent: np.ndarray  # (3,) small/medium/large, integers
    synergy: float  # bonus per adjacent same-group shop pair
    fixed_rent: np.ndarray  # (types, areas) integers
    count_min: np.ndarray  # (types,)
    count_ideal: np.ndarray
    count_max: np.ndarray
    count_peak: np.ndarray  # (types,) quarter units
    size_limits: np.ndarray  # (3,) max small/medium/large shops mall-wide

    def __post_init__(self):
        self.attract = np.asarray(self.attract, dtype=np.float64)
        self.size_rent = np.asarray(self.size_rent, dtype=np.float64)
        self.fixed_rent = np.asarray(self.fixed_rent, dtype=np.float64)
        self.count_min = np.asarray(self.count_min, dtype=np.int64)
        self.count_ideal = np.asarray(self.count_ideal, dtype=np.int64)
        self.count_max = np.asarray(self.count_max, dtype=np.int64)
        self.count_peak = np.asarray(self.count_peak, dtype=np.float64)
        self.size_limits = np.asarray(self.size_limits, dtype=np.int64)
        self._caches: dict = {}

    @property
    def n_locations(self) -> int:
        return self.n_areas * self.locs_per_area

    def area_of(self, location: int) -> int:
        return location // self.locs_per_area

    def validate(self):
        T = self.n_types
        if len(self.groups_of) != T:
            raise MallModelError("one group tuple required per type")
        if self.attract.shape != (self.n_areas, T) or self.fixed_rent.shape != (T, self.n_areas):
            raise MallModelError("rent table shapes do not match areas x types")
        for arr in (self.count_min, self.count_ideal, self.count_max, self.count_peak):
            if arr.shape != (T,):
                raise MallModelError("count bound arrays must have one entry per type")
        if ((self.count_min > self.count_ideal) | (self.count_ideal > self.count_max)).any():
            raise MallModelError("count bounds must satisfy min <= ideal <= max")
        if self.size_limits.shape != (3,) or (self.size_limits < 0).any():
            raise MallModelError("three non-negative size limits required")
        for table in (self.attract, self.size_rent, self.fixed_rent, self.count_peak):
            if not np.isfinite(table).all():
                raise MallModelError("rent tables must be finite")

    def count_rent(self, type_id: int, count: int) -> float:
        """Per-type rent bonus: peaks at the ideal count, falls linearly to
        zero at the min and max bounds, zero outside them."""
        lo, ideal, hi = (
            int(self.count_min[type_id]),
            int(self.count_ideal[type_id]),
            int(self.count_max[type_id]),
        )
        peak = float(self.count_peak[type_id])
        if count < lo or count > hi:
            return 0.0
        if count == ideal:
            return peak
        if count < ideal:
            return quarter(peak * (count - lo) / (ideal - lo))
        return quarter(peak * (hi - count) / (hi - ideal))

    @property
    def count_table(self) -> np.ndarray:
        """(types, width) lookup of count_rent values; the last column holds
        the value for any count beyond the largest max bound."""
        if "count_table" not in self._caches:
            width = int(self.count_max.max(initial=0)) + 2
            tab = np.zeros((self.n_types, width))
            for t in range(self.n_types):
                for c in range(width - 1):
                    tab[t, c] = self.count_rent(t, c)
            self._caches["count_table"] = tab
        return self._caches["count_table"]

    @property
    def group_share(self) -> np.ndarray:
        """(types, types) boolean: do two types share at least one group?"""
        if "group_share" not in self._caches:
            T = self.n_types
            share = np.zeros((T, T), dtype=bool)
            sets = [set(g) for g in self.groups_of]
            for a in range(T):
                for b in range(T):
                    share[a, b] = bool(sets[a] & sets[b])
            self._caches["group_share"] = share
        return self._caches["group_share"]


def _area_runs(genes) -> list[tuple[int, int]]:
    """(type, run length) for contiguous same-type runs along one area."""
    runs = []
    for g in genes:
        if runs and runs[-1][0] == g:
            runs[-1] = (g, runs[-1][1] + 1)
        else:
            runs.append((int(g), 1))
    return runs


def _split_run(length: int) -> tuple[int, int, int]:
    """Greedy size split of one run: (small, medium, large) shop counts."""
    large, rem = divmod(length, 3)
    return (1 if rem == 1 else 0, 1 if rem == 2 else 0, large)


@dataclass
class SizeDecomposition:
    """Shop counts per (area, type, size class); size axis is S/M/L."""

    counts: np.ndarray  # (areas, types, 3)

    def totals_by_size(self) -> np.ndarray:
        return self.counts.sum(axis=(0, 1))

    def totals_by_type(self) -> np.ndarray:
        return self.counts.sum(axis=(0, 2))


def decompose_sizes(inst: MallInstance, layout) -> SizeDecomposition:
    """Split each area's same-type runs greedily into large, medium and small
    shops (a run of five becomes one large plus one medium, and so on)."""
    layout = np.asarray(layout, dtype=np.int64)
    counts = np.zeros((inst.n_areas, inst.n_types, 3), dtype=np.int64)
    for a in range(inst.n_areas):
        genes = layout[a * inst.locs_per_area : (a + 1) * inst.locs_per_area]
        for t, length in _area_runs(genes):
            s, m, l = _split_run(length)
            counts[a, t, SMALL] += s
            counts[a, t, MEDIUM] += m
            counts[a, t, LARGE] += l
    return SizeDecomposition(counts)


@dataclass
class MallFitness:
    rent: float
    violation: float
    feasible: bool
    penalised: float  # rent - w * violation (maximise)


def full_rent(inst: MallInstance, layout, w: float) -> MallFitness:
    """Total rent, constraint violation and feasibility of a full layout."""
    layout = np.asarray(layout, dtype=np.int64)
    if layout.shape != (inst.n_locations,):
        raise MallModelError("layout must assign every location")
    if (layout < 0).any() or (layout >= inst.n_types).any():
        raise MallModelError("layout contains an invalid shop type")
    share = inst.group_share
    rent = 0.0
    shop_counts = np.zeros(inst.n_types, dtype=np.int64)
    size_totals = np.zeros(3, dtype=np.int64)
    for a in range(inst.n_areas):
        genes = layout[a * inst.locs_per_area : (a + 1) * inst.locs_per_area]
        runs = _area_runs(genes)
        prev_type = None
        for t, length in runs:
            s, m, l = _split_run(length)
            n_shops = s + m + l
            shop_counts[t] += n_shops
            size_totals += (s, m, l)
            rent += n_shops * float(inst.fixed_rent[t, a])
            rent += float(inst.attract[a, t]) * (
                s * float(inst.size_rent[SMALL])
                + m * float(inst.size_rent[MEDIUM])
                + l * float(inst.size_rent[LARGE])
            )
            # Adjacent shops carved from one run share a type, hence a group.
            if n_shops > 1 and share[t, t]:
                rent += (n_shops - 1) * inst.synergy
            if prev_type is not None and share[prev_type, t]:
                rent += inst.synergy
            prev_type = t
    for t in range(inst.n_types):
        rent += inst.count_rent(t, int(shop_counts[t]))
    violation = int(
        np.maximum(inst.count_min - shop_counts, 0).sum()
        + np.maximum(shop_counts - inst.count_max, 0).sum()
        + np.maximum(size_totals - inst.size_limits, 0).sum()
    )
    return MallFitness(rent, float(violation), violation == 0, rent - w * violation)


def area_sub_fitness(inst: MallInstance, partial, w: float, area: int = 0) -> float:
    """Rent generated inside a single area: fixed, attractiveness-weighted
    size rent and synergy.  Global count bonuses and mall-wide limits are
    ignored; there are no area-local constraints in this model, so the
    penalty term is zero."""
    partial = np.asarray(partial, dtype=np.int64)
    if partial.shape != (inst.locs_per_area,):
        raise MallModelError("partial layout must cover exactly one area")
    share = inst.group_share
    rent = 0.0
    prev_type = None
    for t, length in _area_runs(partial):
        s, m, l = _split_run(length)
        n_shops = s + m + l
        rent += n_shops * float(inst.fixed_rent[t, area])
        rent += float(inst.attract[area, t]) * (
            s * float(inst.size_rent[SMALL])
            + m * float(inst.size_rent[MEDIUM])
            + l * float(inst.size_rent[LARGE])
        )
        if n_shops > 1 and share[t, t]:
            rent += (n_shops - 1) * inst.synergy
        if prev_type is not None and share[prev_type, t]:
            rent += inst.synergy
        prev_type = t
    return rent


# ---------------------------------------------------------------------------
# Instance text format
# ---------------------------------------------------------------------------
#
#   name <id>
#   size <areas> <locs_per_area> <types> <groups>
#   sizerent <small> <medium> <large>
#   synergy <value>
#   sizelimits <small> <medium> <large>
#   type <min> <ideal> <max> <peak> <group,group,...>   (types lines)
#   attract <types quarter values>                      (areas lines)
#   fixed <areas integers>                              (types lines)


def _fmt(x: float) -> str:
    return f"{float(x):.2f}"


def write_mall_instance(inst: MallInstance, path: str | Path):
    lines = [
        f"name {inst.name}",
        f"size {inst.n_areas} {inst.locs_per_area} {inst.n_types} "
        f"{max((g for gs in inst.groups_of for g in gs), default=-1) + 1}",
        "sizerent " + " ".join(str(int(v)) for v in inst.size_rent),
        f"synergy {int(inst.synergy)}",
        "sizelimits " + " ".join(str(int(v)) for v in inst.size_limits),
    ]
    for t in range(inst.n_types):
        groups = ",".join(str(g) for g in inst.groups_of[t])
        lines.append(
            f"type {int(inst.count_min[t])} {int(inst.count_ideal[t])} "
            f"{int(inst.count_max[t])} {_fmt(inst.count_peak[t])} {groups}"
        )
    for a in range(inst.n_areas):
        lines.append("attract " + " ".join(_fmt(v) for v in inst.attract[a]))
    for t in range(inst.n_types):
        lines.append("fixed " + " ".join(str(int(v)) for v in inst.fixed_rent[t]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_mall_instance(path: str | Path) -> MallInstance:
    raw = [
        ln.strip()
        for ln in Path(path).read_text().splitlines()
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    rows = iter(raw)

    def expect(tag: str) -> list[str]:
        line = next(rows, None)
        if line is None or not line.startswith(tag + " "):
            raise MallModelError(f"malformed mall instance: expected {tag!r} line")
        return line.split()[1:]

    name = expect("name")[0]
    n_areas, lpa, n_types, _ = (int(v) for v in expect("size"))
    size_rent = np.array([int(v) for v in expect("sizerent")], dtype=np.int64)
    synergy = int(expect("synergy")[0])
    size_limits = np.array([int(v) for v in expect("sizelimits")], dtype=np.int64)
    groups, cmin, cideal, cmax, cpeak = [], [], [], [], []
    for _ in range(n_types):
        fields = expect("type")
        cmin.append(int(fields[0]))
        cideal.append(int(fields[1]))
        cmax.append(int(fields[2]))
        cpeak.append(float(fields[3]))
        groups.append(tuple(int(g) for g in fields[4].split(",")) if fields[4] else ())
    attract = np.array([[float(v) for v in expect("attract")] for _ in range(n_areas)])
    fixed = np.array([[int(v) for v in expect("fixed")] for _ in range(n_types)], dtype=np.int64)
    inst = MallInstance(
        name=name,
        n_areas=n_areas,
        locs_per_area=lpa,
        n_types=n_types,
        groups_of=groups,
        attract=attract,
        size_rent=size_rent,
        synergy=float(synergy),
        fixed_rent=fixed,
        count_min=np.array(cmin),
        count_ideal=np.array(cideal),
        count_max=np.array(cmax),
        count_peak=np.array(cpeak),
        size_limits=size_limits,
    )
    inst.validate()
    return inst


# ---------------------------------------------------------------------------
# Engine adapter
# ---------------------------------------------------------------------------


@njit(cache=True)
def _rent_kernel(
    layout,
    lpa,
    fixed,
    attract,
    size_rent,
    synergy,
    share,
    count_table,
    count_min,
    count_max,
    size_limits,
):
    """Single-pass run scan; every term is an exact quarter unit, so the
    result matches the reference implementation bit-for-bit."""
    n = len(layout)
    T = fixed.shape[0]
    rent = 0.0
    counts = np.zeros(T, dtype=np.int64)
    sizes = np.zeros(3, dtype=np.int64)
    i = 0
    prev_type = -1
    while i < n:
        t = layout[i]
        a = i // lpa
        j = i + 1
        while j < n and j % lpa != 0 and layout[j] == t:
            j += 1
        length = j - i
        large = length // 3
        rem = length - 3 * large
        small = 1 if rem == 1 else 0
        med = 1 if rem == 2 else 0
        shops = small + med + large
        counts[t] += shops
        sizes[0] += small
        sizes[1] += med
        sizes[2] += large
        rent += shops * fixed[t, a]
        rent += attract[a, t] * (
            small * size_rent[0] + med * size_rent[1] + large * size_rent[2]
        )
        if shops > 1 and share[t, t]:
            rent += (shops - 1) * synergy
        if i % lpa != 0 and prev_type >= 0 and share[prev_type, t]:
            rent += synergy
        prev_type = t
        i = j
    width = count_table.shape[1]
    violation = 0
    for t in range(T):
        c = counts[t]
        rent += count_table[t, min(c, width - 1)]
        if c < count_min[t]:
            violation += count_min[t] - c
        if c > count_max[t]:
            violation += c - count_max[t]
    for s in range(3):
        if sizes[s] > size_limits[s]:
            violation += sizes[s] - size_limits[s]
    return rent, violation


class MallProblem:
    """Engine-facing adapter; internally minimises the negated rent."""

    kind = "mall"
    censored_score = 0.0
    maximise = True

    def __init__(self, inst: MallInstance):
        inst.validate()
        self.instance = inst
        self._types = np.arange(inst.n_types, dtype=np.int64)
        self._levels: dict[str, tuple] = {}
        self._fixed = np.ascontiguousarray(inst.fixed_rent, dtype=np.float64)
        self._attract = np.ascontiguousarray(inst.attract, dtype=np.float64)
        self._size_rent = np.ascontiguousarray(inst.size_rent, dtype=np.float64)
        self._share = np.ascontiguousarray(inst.group_share)
        self._count_table = np.ascontiguousarray(inst.count_table)

    @property
    def n_entities(self) -> int:
        return self.instance.n_locations

    def domain_of(self, entity: int) -> np.ndarray:
        return self._types

    def penalty_scale(self) -> float:
        return max(float(np.abs(self.instance.fixed_rent).mean()), 1.0)

    def full_eval(self, layout: np.ndarray, w: float) -> tuple[float, float, float, bool]:
        """(penalised, raw, violation, feasible); raw is the negated rent."""
        inst = self.instance
        rent, violation = _rent_kernel(
            layout,
            inst.locs_per_area,
            self._fixed,
            self._attract,
            self._size_rent,
            inst.synergy,
            self._share,
            self._count_table,
            inst.count_min,
            inst.count_max,
            inst.size_limits,
        )
        return -rent + w * violation, -rent, float(violation), violation == 0

    def bind_level(
        self, level_id: str, scope: tuple[int, ...], entities: np.ndarray, full: bool = False
    ):
        # Area levels carry their area index; the full level maps to full_eval.
        if full:
            self._levels[level_id] = ("full", np.asarray(entities, dtype=np.int64))
        elif len(scope) == 1:
            self._levels[level_id] = ("area", int(scope[0]))
        else:
            raise MallModelError(f"mall level {level_id!r} must cover one area or the whole mall")

    def sub_eval(self, level_id: str, genes: np.ndarray, w: float) -> tuple[float, float, float, bool]:
        kind, payload = self._levels[level_id]
        if kind == "full":
            layout = np.empty(self.instance.n_locations, dtype=np.int64)
            layout[payload] = genes
            return self.full_eval(layout, w)
        rent = area_sub_fitness(self.instance, genes, w, area=payload)
        return -rent, -rent, 0.0, True

    def score_of(self, raw_objective: float) -> float:
        """Reported score: positive rent."""
        return -raw_objective

    def random_assignment(self, rng) -> np.ndarray:
        return rng.integers(0, self.instance.n_types, self.instance.n_locations, dtype=np.int64)
