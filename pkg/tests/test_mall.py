import itertools

import numpy as np
import pytest

from pyramidga.harness import MallGenParams, generate_mall_instance
from pyramidga.mall import (
    LARGE,
    MEDIUM,
    SMALL,
    MallModelError,
    MallProblem,
    area_sub_fitness,
    decompose_sizes,
    full_rent,
    read_mall_instance,
    write_mall_instance,
)


def greedy_reference_split(length):
    """Independent statement of the size rule: carve threes, then a two."""
    large = 0
    while length >= 3:
        large += 1
        length -= 3
    return {"large": large, "medium": 1 if length == 2 else 0, "small": 1 if length == 1 else 0}


class TestDecomposition:
    def test_run_of_five_is_large_plus_medium(self, tiny_mall_instance):
        inst = generate_mall_instance(MallGenParams(), 1)
        layout = np.zeros(inst.n_locations, dtype=np.int64)
        layout[:] = 1
        layout[:5] = 0  # five same-type locations at the head of area 1
        counts = decompose_sizes(inst, layout).counts
        assert counts[0, 0, LARGE] == 1
        assert counts[0, 0, MEDIUM] == 1
        assert counts[0, 0, SMALL] == 0

    @pytest.mark.parametrize(
        "length,expected",
        [(1, (0, 0, 1)), (4, (1, 0, 1)), (7, (2, 0, 1))],
    )
    def test_quoted_splits(self, length, expected):
        from pyramidga.mall import _split_run

        small, medium, large = _split_run(length)
        assert (large, medium, small) == expected

    def test_exhaustive_run_lengths_match_greedy_rule(self):
        from pyramidga.mall import _split_run

        for length in range(1, 21):
            small, medium, large = _split_run(length)
            ref = greedy_reference_split(length)
            assert large == ref["large"] and medium == ref["medium"] and small == ref["small"]
            assert 3 * large + 2 * medium + small == length

    def test_counts_depend_on_runs_only(self, tiny_mall_instance):
        inst = generate_mall_instance(MallGenParams(), 2)
        rng = np.random.default_rng(0)
        layout = rng.integers(0, inst.n_types, inst.n_locations)
        mirrored = layout.copy()
        for a in range(inst.n_areas):
            seg = slice(a * 20, (a + 1) * 20)
            mirrored[seg] = layout[seg][::-1]
        assert np.array_equal(
            np.sort(decompose_sizes(inst, layout).counts, axis=None),
            np.sort(decompose_sizes(inst, mirrored).counts, axis=None),
        )


class TestFullRent:
    def test_hundred_singleton_shops(self, flat_mall_instance):
        layout = np.tile([0, 1], 50)
        res = full_rent(flat_mall_instance, layout, 1.0)
        assert res.rent == 100.0
        assert res.feasible

    def test_single_type_area_matches_oracle(self):
        from pyramidga import oracle

        inst = generate_mall_instance(MallGenParams(), 5)
        rng = np.random.default_rng(4)
        layout = rng.integers(0, inst.n_types, inst.n_locations)
        layout[:20] = 3  # one full area of a single type: 6 large + 1 medium
        counts = decompose_sizes(inst, layout).counts
        assert counts[0, 3, LARGE] == 6 and counts[0, 3, MEDIUM] == 1
        ours = full_rent(inst, layout, 2.0)
        rent, violation, feasible = oracle.recompute_rent(inst, layout, 2.0)
        assert ours.rent == rent and ours.violation == violation and ours.feasible == feasible

    def test_count_below_min_infeasible(self, tiny_mall_instance):
        layout = np.array([1, 1, 1, 1])  # type 0 absent but has min 1
        res = full_rent(tiny_mall_instance, layout, 1.0)
        assert not res.feasible
        assert res.violation > 0
        assert res.penalised == res.rent - 1.0 * res.violation

    def test_adapter_matches_reference_and_oracle(self):
        from pyramidga import oracle

        inst = generate_mall_instance(MallGenParams(types_min=10, types_max=15), 9)
        prob = MallProblem(inst)
        rng = np.random.default_rng(1)
        for _ in range(100):
            lay = prob.random_assignment(rng)
            ours = full_rent(inst, lay, 3.25)
            pen, raw, viol, feas = prob.full_eval(lay, 3.25)
            rent_o, viol_o, feas_o = oracle.recompute_rent(inst, lay, 3.25)
            assert ours.rent == -raw == rent_o
            assert ours.violation == viol == viol_o
            assert ours.feasible == feas == feas_o
            assert pen == -ours.penalised

    def test_layout_validation(self, tiny_mall_instance):
        with pytest.raises(MallModelError):
            full_rent(tiny_mall_instance, np.array([0, 0, 0]), 1.0)
        with pytest.raises(MallModelError):
            full_rent(tiny_mall_instance, np.array([0, 0, 0, 9]), 1.0)


class TestAreaSubFitness:
    def test_distinct_types_make_singletons(self):
        inst = generate_mall_instance(MallGenParams(types_min=20, types_max=25), 3)
        partial = np.arange(20, dtype=np.int64)
        rent = area_sub_fitness(inst, partial, 5.0, area=0)
        expected = sum(
            float(inst.fixed_rent[t, 0]) + float(inst.attract[0, t]) * float(inst.size_rent[SMALL])
            for t in range(20)
        )
        synergies = sum(
            inst.synergy
            for a, b in zip(range(19), range(1, 20))
            if inst.group_share[a, b]
        )
        assert rent == expected + synergies

    def test_area_decomposition_identity(self):
        inst = generate_mall_instance(MallGenParams(), 6)
        rng = np.random.default_rng(2)
        for _ in range(25):
            layout = rng.integers(0, inst.n_types, inst.n_locations)
            full = full_rent(inst, layout, 0.0).rent
            local = sum(
                area_sub_fitness(inst, layout[a * 20 : (a + 1) * 20], 0.0, area=a)
                for a in range(5)
            )
            counts = decompose_sizes(inst, layout).totals_by_type()
            global_terms = sum(inst.count_rent(t, int(c)) for t, c in enumerate(counts))
            assert full == local + global_terms

    def test_reversal_invariance_without_synergy(self):
        inst = generate_mall_instance(MallGenParams(), 8)
        inst.synergy = 0.0
        rng = np.random.default_rng(3)
        partial = rng.integers(0, inst.n_types, 20)
        assert area_sub_fitness(inst, partial, 1.0, 2) == area_sub_fitness(
            inst, partial[::-1].copy(), 1.0, 2
        )

    def test_wrong_length_rejected(self, tiny_mall_instance):
        with pytest.raises(MallModelError):
            area_sub_fitness(tiny_mall_instance, np.array([0]), 1.0, 0)


class TestOrientation:
    def test_feasible_argmax_rent_is_argmin_internal(self, tiny_mall_instance):
        inst = tiny_mall_instance
        prob = MallProblem(inst)
        best_rent, best_internal = None, None
        for combo in itertools.product(range(2), repeat=4):
            lay = np.array(combo, dtype=np.int64)
            res = full_rent(inst, lay, 4.0)
            pen, raw, viol, feas = prob.full_eval(lay, 4.0)
            if res.feasible:
                if best_rent is None or res.rent > best_rent:
                    best_rent = res.rent
                if best_internal is None or raw < best_internal:
                    best_internal = raw
        assert best_rent == -best_internal


class TestInstanceIO:
    def test_round_trip(self, tmp_path):
        inst = generate_mall_instance(MallGenParams(), 12)
        path = tmp_path / "m.txt"
        write_mall_instance(inst, path)
        back = read_mall_instance(path)
        assert back.name == inst.name
        assert back.n_types == inst.n_types
        assert back.groups_of == inst.groups_of
        assert np.array_equal(back.attract, inst.attract)
        assert np.array_equal(back.fixed_rent, inst.fixed_rent)
        assert np.array_equal(back.count_min, inst.count_min)
        assert np.array_equal(back.count_ideal, inst.count_ideal)
        assert np.array_equal(back.count_max, inst.count_max)
        assert np.array_equal(back.count_peak, inst.count_peak)
        assert np.array_equal(back.size_limits, inst.size_limits)
        assert back.synergy == inst.synergy
        # identical fitness behaviour after the round trip
        rng = np.random.default_rng(5)
        lay = rng.integers(0, inst.n_types, inst.n_locations)
        assert full_rent(back, lay, 2.0) == full_rent(inst, lay, 2.0)

    def test_validation_rejects_bad_bounds(self, tiny_mall_instance):
        tiny_mall_instance.count_min[0] = 5  # above ideal
        with pytest.raises(MallModelError):
            tiny_mall_instance.validate()


def test_count_rent_shape(tiny_mall_instance):
    inst = tiny_mall_instance
    # peak at ideal, linear to zero at the bounds, zero outside
    assert inst.count_rent(0, 2) == 8.0
    assert inst.count_rent(0, 1) == 0.0
    assert inst.count_rent(0, 3) == 0.0
    assert inst.count_rent(0, 4) == 0.0
    assert inst.count_rent(1, 1) == 6.0
    assert 0.0 < inst.count_rent(1, 2) < 6.0 or inst.count_rent(1, 2) == 0.0
