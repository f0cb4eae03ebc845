import numpy as np
import pytest

from pyramidga.harness import NurseGenParams, generate_nurse_instance
from pyramidga.nurse import (
    NurseModelError,
    NurseProblem,
    ShiftPattern,
    full_fitness,
    is_feasible,
    read_nurse_instance,
    sub_fitness,
    write_nurse_instance,
)

from conftest import day_pattern, night_pattern


def one_nurse_instance():
    """One grade-1 nurse whose only pattern works all seven days at cost 5."""
    from pyramidga.nurse import NurseInstance

    all_days = ShiftPattern(tuple([1] * 7 + [0] * 7), "day")
    return NurseInstance(
        name="one",
        patterns=[all_days],
        grade_of=np.array([1]),
        p=3,
        pref_cost=np.array([[5]]),
        shifts_required=np.array([[7, 7, 7]]),
        demand=np.zeros((14, 3), dtype=np.int64),
    )


class TestFullFitness:
    def test_zero_demand_totals_preferences(self, six_nurse_instance):
        inst = six_nurse_instance
        inst.demand[:] = 0
        assignment = np.array([0, 1, 2, 3, 0, 1])
        bd = full_fitness(inst, assignment, 10.0)
        expected = sum(int(inst.pref_cost[i, assignment[i]]) for i in range(6))
        assert bd.total == bd.preference_cost == expected
        assert bd.uncovered.sum() == 0

    def test_single_nurse_covers_own_grade_demand(self):
        demand = np.zeros((14, 3), dtype=np.int64)
        demand[:7, 0] = 1  # grade-1 cover wanted every day
        inst = one_nurse_instance()
        inst.demand = demand
        bd = full_fitness(inst, np.array([0]), 10.0)
        assert bd.total == 5
        assert bd.uncovered.sum() == 0

    def test_higher_grade_substitutes_lower(self):
        demand = np.zeros((14, 3), dtype=np.int64)
        demand[:7, 2] = 1  # grade-3 band demand, grade-1 nurse counts for it
        inst = one_nurse_instance()
        inst.demand = demand
        bd = full_fitness(inst, np.array([0]), 10.0)
        assert bd.total == 5

    def test_uncovered_is_charged(self):
        demand = np.zeros((14, 3), dtype=np.int64)
        demand[7:, 2] = 1  # nights, which the all-days pattern cannot cover
        inst = one_nurse_instance()
        inst.demand = demand
        bd = full_fitness(inst, np.array([0]), 10.0)
        assert bd.uncovered.sum() == 7
        assert bd.total == 5 + 10.0 * 7

    def test_infeasible_pattern_rejected(self, six_nurse_instance):
        with pytest.raises(NurseModelError, match="infeasible pattern"):
            full_fitness(six_nurse_instance, np.array([0, 0, 0, 0, 0, 9]), 1.0)

    def test_monotone_in_weight(self, six_nurse_instance):
        inst = six_nurse_instance
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = np.array([fs[rng.integers(len(fs))] for fs in inst.feasible_sets])
            totals = [full_fitness(inst, a, w).total for w in (0.0, 1.0, 5.0, 50.0)]
            assert totals == sorted(totals)
            if is_feasible(inst, a):
                assert len(set(totals)) == 1

    def test_supply_superset_never_hurts(self, six_nurse_instance):
        # Moving a nurse to a pattern covering a superset of shifts can only
        # reduce shortfalls, whatever the demand.
        from pyramidga.nurse import _supply

        inst = six_nurse_instance
        inst.patterns.append(day_pattern(0, 1, 2))  # superset of pattern 0
        inst.demand[:] = 2
        base = np.array([0, 0, 2, 3, 0, 1])
        wider = base.copy()
        wider[0] = 4
        u_base = np.maximum(inst.demand - _supply(inst, base), 0)
        u_wide = np.maximum(inst.demand - _supply(inst, wider), 0)
        assert (u_wide <= u_base).all()


class TestSubFitness:
    def test_single_grade_with_zero_demand_is_pure_preference(self, six_nurse_instance):
        inst = six_nurse_instance
        inst.demand[:, 1] = 0
        partial = np.array([2, 3])  # nurses 2 and 3 hold grade 2
        value = sub_fitness(inst, partial, {2}, 10.0)
        assert value == int(inst.pref_cost[2, 2] + inst.pref_cost[3, 3])

    def test_grade3_demand_invisible_to_grade12(self, six_nurse_instance):
        inst = six_nurse_instance
        partial = np.array([0, 1, 2, 3])
        before = sub_fitness(inst, partial, {1, 2}, 10.0)
        inst.demand[5, 2] += 4  # grade-3 band only
        after = sub_fitness(inst, partial, {1, 2}, 10.0)
        assert before == after

    def test_full_grade_set_is_grade_blind(self, six_nurse_instance):
        inst = six_nurse_instance
        # Only total-staff demand: grade-blind scoring equals the full formula.
        inst.demand[:, 0] = 0
        inst.demand[:, 1] = 0
        assignment = np.array([0, 2, 1, 3, 2, 3])
        value = sub_fitness(inst, assignment, {1, 2, 3}, 7.0)
        assert value == full_fitness(inst, assignment, 7.0).total

    def test_restriction_blocks_outside_substitution(self, six_nurse_instance):
        inst = six_nurse_instance
        # Grade-2 band demand on Tuesday day; within {2} only the two
        # grade-2 nurses may supply it even though grade 1 could substitute
        # in the full problem.
        inst.demand[:] = 0
        inst.demand[1, 1] = 2
        partial = np.array([2, 3])  # both grade-2 nurses on night patterns
        value = sub_fitness(inst, partial, {2}, 1.0)
        assert value == int(inst.pref_cost[2, 2] + inst.pref_cost[3, 3]) + 2

    def test_rejects_wrong_cover(self, six_nurse_instance):
        with pytest.raises(NurseModelError):
            sub_fitness(six_nurse_instance, np.array([0]), {2}, 1.0)


class TestFeasibility:
    def test_zero_demand_always_feasible(self, six_nurse_instance):
        inst = six_nurse_instance
        inst.demand[:] = 0
        assert is_feasible(inst, np.array([0, 1, 2, 3, 0, 1]))

    def test_excess_demand_never_feasible(self):
        inst = one_nurse_instance()
        inst.demand = np.zeros((14, 3), dtype=np.int64)
        inst.demand[0, 0] = 2  # two grade-1 nurses wanted, one exists
        assert not is_feasible(inst, np.array([0]))

    def test_exhaustively_infeasible_when_demand_exceeds_workforce(self, six_nurse_instance):
        inst = six_nurse_instance
        inst.demand[:] = 0
        inst.demand[1, 2] = 7  # seven nurses wanted on Tuesday day, six exist
        from itertools import product

        for combo in product(range(4), repeat=6):
            assert not is_feasible(inst, np.array(combo))


class TestAdapter:
    def test_full_eval_matches_reference(self):
        inst = generate_nurse_instance(
            NurseGenParams(n=8, day_patterns=5, night_patterns=5, tier="medium"), 11
        )
        prob = NurseProblem(inst)
        rng = np.random.default_rng(3)
        for _ in range(100):
            a = prob.random_assignment(rng)
            bd = full_fitness(inst, a, 4.5)
            pen, raw, viol, feas = prob.full_eval(a, 4.5)
            assert pen == bd.total
            assert raw == bd.preference_cost
            assert viol == bd.uncovered.sum()
            assert feas == is_feasible(inst, a)

    def test_sub_eval_matches_reference(self):
        inst = generate_nurse_instance(
            NurseGenParams(n=9, day_patterns=4, night_patterns=4, tier="loose"), 5
        )
        from pyramidga.harness import build_problem

        prob, topo = build_problem("nurse", inst, "RR")
        for lvl in topo.levels:
            prob.bind_level(
                lvl.level_id,
                lvl.scope,
                topo.slot_to_entity[lvl.positions],
                full=lvl.level_id == topo.top_level_id,
            )
        rng = np.random.default_rng(8)
        for lvl in topo.levels:
            entities = topo.slot_to_entity[lvl.positions]
            scope = set(lvl.scope)
            for _ in range(20):
                genes = np.array(
                    [inst.feasible_sets[e][rng.integers(len(inst.feasible_sets[e]))] for e in entities]
                )
                got = prob.sub_eval(lvl.level_id, genes, 2.5)[0]
                if lvl.level_id == "all":
                    assignment = np.empty(inst.n, dtype=np.int64)
                    assignment[entities] = genes
                    assert got == full_fitness(inst, assignment, 2.5).total
                else:
                    assert got == sub_fitness(inst, genes, scope, 2.5, nurses=entities)


class TestInstanceIO:
    def test_round_trip(self, tmp_path):
        inst = generate_nurse_instance(NurseGenParams(n=6, day_patterns=4, night_patterns=3), 77)
        path = tmp_path / "n.txt"
        write_nurse_instance(inst, path)
        back = read_nurse_instance(path)
        assert back.name == inst.name
        assert back.n == inst.n and back.m == inst.m and back.p == inst.p
        assert np.array_equal(back.pref_cost, inst.pref_cost)
        assert np.array_equal(back.demand, inst.demand)
        assert np.array_equal(back.grade_of, inst.grade_of)
        assert all(
            np.array_equal(a, b) for a, b in zip(back.feasible_sets, inst.feasible_sets)
        )
        assert [p.cover for p in back.patterns] == [p.cover for p in inst.patterns]

    def test_validation_rejects_foreign_feasible_set(self, six_nurse_instance, tmp_path):
        inst = six_nurse_instance
        inst.feasible_sets[0] = np.array([0])  # contract says {0, 1} for days
        with pytest.raises(NurseModelError, match="feasible set"):
            inst.validate()

    def test_pattern_kind_consistency_enforced(self):
        with pytest.raises(NurseModelError):
            ShiftPattern(tuple([1] * 14), "day")

    def test_gene_count_is_nurse_count(self, six_nurse_instance):
        with pytest.raises(NurseModelError):
            full_fitness(six_nurse_instance, np.array([0, 1]), 1.0)


def test_generated_planted_solution_is_feasible_small():
    # Tiers derive demand from a planted schedule; brute force on a tiny
    # instance must find a feasible optimum.
    from pyramidga.oracle import brute_force_nurse

    for tier in ("loose", "medium", "tight"):
        inst = generate_nurse_instance(
            NurseGenParams(n=4, day_patterns=3, night_patterns=3, tier=tier), 13
        )
        res = brute_force_nurse(inst, 10.0)
        assert res.best_feasible_assignment is not None
