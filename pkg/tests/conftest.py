import numpy as np
import pytest

from pyramidga.mall import MallInstance
from pyramidga.nurse import NurseInstance, ShiftPattern


def day_pattern(*days: int) -> ShiftPattern:
    cover = [0] * 14
    for k in days:
        cover[k] = 1
    return ShiftPattern(tuple(cover), "day")


def night_pattern(*nights: int) -> ShiftPattern:
    cover = [0] * 14
    for k in nights:
        cover[7 + k] = 1
    return ShiftPattern(tuple(cover), "night")


@pytest.fixture
def six_nurse_instance() -> NurseInstance:
    """Two nurses per grade, two day + two night patterns, mild demand."""
    patterns = [
        day_pattern(0, 1),
        day_pattern(1, 2),
        night_pattern(0, 1),
        night_pattern(1, 2),
    ]
    demand = np.zeros((14, 3), dtype=np.int64)
    demand[1] = (1, 1, 2)  # Tuesday day shift
    demand[8] = (0, 1, 1)  # Tuesday night shift
    return NurseInstance(
        name="six",
        patterns=patterns,
        grade_of=np.array([1, 1, 2, 2, 3, 3]),
        p=3,
        pref_cost=np.arange(24, dtype=np.int64).reshape(6, 4) % 7,
        shifts_required=np.tile([2, 2, 2], (6, 1)),
        demand=demand,
    )


@pytest.fixture
def oracle_fixture_instance() -> NurseInstance:
    """3 nurses x 4 feasible patterns each: 64 assignments, enumerable."""
    patterns = [
        day_pattern(0, 1),
        day_pattern(2, 3),
        night_pattern(0, 1),
        night_pattern(2, 3),
    ]
    demand = np.zeros((14, 3), dtype=np.int64)
    demand[0] = (0, 1, 1)
    demand[7] = (0, 0, 1)
    pref = np.array(
        [
            [3, 9, 14, 20],
            [0, 4, 30, 12],
            [7, 2, 1, 25],
        ],
        dtype=np.int64,
    )
    return NurseInstance(
        name="oracle-fixture",
        patterns=patterns,
        grade_of=np.array([1, 2, 3]),
        p=3,
        pref_cost=pref,
        shifts_required=np.tile([2, 2, 2], (3, 1)),
        demand=demand,
    )


@pytest.fixture
def tiny_mall_instance() -> MallInstance:
    """2 areas x 2 locations, 2 types: 16 layouts, enumerable."""
    return MallInstance(
        name="tiny-mall",
        n_areas=2,
        locs_per_area=2,
        n_types=2,
        groups_of=[(0,), (0, 1)],
        attract=np.array([[1.0, 0.5], [0.25, 2.0]]),
        size_rent=np.array([2, 5, 9]),
        synergy=3.0,
        fixed_rent=np.array([[4, 6], [5, 3]]),
        count_min=np.array([1, 0]),
        count_ideal=np.array([2, 1]),
        count_max=np.array([3, 2]),
        count_peak=np.array([8.0, 6.0]),
        size_limits=np.array([4, 2, 1]),
    )


@pytest.fixture
def flat_mall_instance() -> MallInstance:
    """Alternating layouts give 100 singleton shops of unit fixed rent."""
    T = 2
    return MallInstance(
        name="flat-mall",
        n_areas=5,
        locs_per_area=20,
        n_types=T,
        groups_of=[() for _ in range(T)],
        attract=np.ones((5, T)),
        size_rent=np.zeros(3),
        synergy=0.0,
        fixed_rent=np.ones((T, 5)),
        count_min=np.zeros(T, dtype=np.int64),
        count_ideal=np.zeros(T, dtype=np.int64),
        count_max=np.full(T, 100, dtype=np.int64),
        count_peak=np.zeros(T),
        size_limits=np.full(3, 100, dtype=np.int64),
    )
