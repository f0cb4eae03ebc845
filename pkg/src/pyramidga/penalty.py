"""Adaptive constraint-penalty weight, one controller per sub-population.

The weight reacts to the gap between the best agent and the best feasible
agent: while the cheapest agent is infeasible (or no feasible agent exists)
the weight grows multiplicatively, and once the best agent is feasible it
decays again, always clamped to [w_min, w_max].
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

HISTORY_CAP = 100


class PenaltyError(ValueError):
    """Raised for invalid penalty parameters or inputs."""


@dataclass
class PenaltyState:
    """Current weight plus its adaptation parameters."""

    w: float
    w_min: float
    w_max: float
    beta: float
    history: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.beta <= 1.0:
            raise PenaltyError("beta must exceed 1")
        if not (0 < self.w_min <= self.w_max):
            raise PenaltyError("need 0 < w_min <= w_max")
        if not (self.w_min <= self.w <= self.w_max):
            raise PenaltyError("w must lie within [w_min, w_max]")


def make_state(scale: float, beta: float = 1.1, w0_scale: float = 1.0) -> PenaltyState:
    """Default controller: the initial weight is the instance's per-unit
    objective scale, bounded three decades below and six above."""
    w0 = scale * w0_scale
    return PenaltyState(w=w0, w_min=1e-3 * w0, w_max=1e6 * w0, beta=beta)


def update(state: PenaltyState, best: float, best_feasible: float | None) -> PenaltyState:
    """Adapt the weight from this generation's best / best-feasible gap.

    No feasible agent, or a feasible optimum strictly above the overall best:
    raise the weight.  Best agent itself feasible: lower it.  Both moves are
    clamped to the configured bounds.
    """
    if best_feasible is not None and best_feasible < best:
        raise PenaltyError("best fitness cannot exceed the best feasible fitness")
    gap = float("inf") if best_feasible is None else best_feasible - best
    if best_feasible is None or gap > 0:
        w = min(state.w * state.beta, state.w_max)
    else:
        w = max(state.w / state.beta, state.w_min)
    history = (state.history + (gap,))[-HISTORY_CAP:]
    return replace(state, w=w, history=history)


def penalised(raw_objective: float, violation: float, state: PenaltyState) -> float:
    """Internal minimisation fitness: objective plus weighted violation."""
    if violation < 0:
        raise PenaltyError("violation must be non-negative")
    return raw_objective + state.w * violation
