import numpy as np
import pytest

from pyramidga.penalty import PenaltyError, PenaltyState, make_state, penalised, update


def state(w=10.0, w_min=1e-3, w_max=1e6, beta=1.5):
    return PenaltyState(w=w, w_min=w_min, w_max=w_max, beta=beta)


class TestUpdate:
    def test_no_feasible_agent_raises_weight(self):
        st = update(state(), best=50.0, best_feasible=None)
        assert st.w == 15.0

    def test_infeasible_best_raises_weight(self):
        st = update(state(), best=50.0, best_feasible=60.0)
        assert st.w == 15.0

    def test_feasible_best_lowers_weight(self):
        st = update(state(w=15.0), best=50.0, best_feasible=50.0)
        assert st.w == 10.0

    def test_clamped_at_max(self):
        st = update(state(w=1e6), best=1.0, best_feasible=None)
        assert st.w == 1e6

    def test_clamped_at_min(self):
        st = update(state(w=1e-3), best=1.0, best_feasible=1.0)
        assert st.w == 1e-3

    def test_rejects_feasible_below_best(self):
        with pytest.raises(PenaltyError):
            update(state(), best=5.0, best_feasible=4.0)

    def test_gap_history_recorded(self):
        st = update(state(), best=1.0, best_feasible=3.0)
        st = update(st, best=1.0, best_feasible=None)
        assert st.history[-2:] == (2.0, float("inf"))

    def test_strictly_increases_while_infeasible(self):
        st = state(w=1.0, beta=1.1)
        for _ in range(10):
            before = st.w
            st = update(st, best=10.0, best_feasible=None)
            assert st.w > before


class TestPenalised:
    def test_zero_violation_returns_raw(self):
        assert penalised(42.5, 0.0, state()) == 42.5

    def test_linear_in_weight(self):
        st1, st2 = state(w=5.0), state(w=10.0)
        raw, viol = 7.0, 3.0
        assert penalised(raw, viol, st2) - raw == 2 * (penalised(raw, viol, st1) - raw)

    def test_matches_nurse_breakdown(self, six_nurse_instance):
        from pyramidga.nurse import full_fitness

        inst = six_nurse_instance
        st = state(w=9.0)
        assignment = np.array([0, 0, 2, 2, 3, 3])
        bd = full_fitness(inst, assignment, st.w)
        assert penalised(bd.preference_cost, bd.uncovered.sum(), st) == bd.total

    def test_rejects_negative_violation(self):
        with pytest.raises(PenaltyError):
            penalised(1.0, -0.5, state())


class TestInvariants:
    def test_feasible_ordering_invariant_under_weight(self):
        a_raw, b_raw = 10.0, 20.0
        for w in (0.001, 1.0, 1000.0):
            st = state(w=w)
            assert penalised(a_raw, 0.0, st) < penalised(b_raw, 0.0, st)

    def test_weight_growth_eventually_prefers_feasible(self):
        st = state(w=0.5, beta=2.0)
        feasible, infeasible = (30.0, 0.0), (10.0, 2.0)
        while penalised(*infeasible, st) <= penalised(*feasible, st):
            st = update(st, best=penalised(*infeasible, st), best_feasible=None)
        assert penalised(*infeasible, st) > penalised(*feasible, st)

    def test_state_validation(self):
        with pytest.raises(PenaltyError):
            PenaltyState(w=1.0, w_min=0.0, w_max=2.0, beta=1.5)
        with pytest.raises(PenaltyError):
            PenaltyState(w=1.0, w_min=0.5, w_max=2.0, beta=1.0)
        with pytest.raises(PenaltyError):
            PenaltyState(w=3.0, w_min=0.5, w_max=2.0, beta=1.5)

    def test_make_state_defaults(self):
        st = make_state(20.0)
        assert st.w == 20.0
        assert st.w_min == pytest.approx(0.02)
        assert st.w_max == pytest.approx(2e7)
        assert st.beta == 1.1
