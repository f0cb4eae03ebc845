"""Pyramidal coevolutionary GA with pluggable evaluation partnering."""

from .engine import (
    CoevolutionEngine,
    EngineConfig,
    Genome,
    SubPopulation,
    check_stop,
    mutate,
    rank_roulette_select,
    replace_generation,
    uniform_crossover,
)
from .harness import ExperimentSpec, ResultRow, run_experiment
from .mall import MallInstance, MallProblem, decompose_sizes, full_rent
from .nurse import NurseInstance, NurseProblem, full_fitness, is_feasible, sub_fitness
from .partnering import STRATEGIES, ToroidalGrid, evaluate
from .penalty import PenaltyState, penalised, update
from .pyramid import (
    Topology,
    build_mall_topology,
    build_nurse_topology,
    build_single_topology,
    fixed_point_crossover,
)

__version__ = "0.1.0"

__all__ = [
    "CoevolutionEngine",
    "EngineConfig",
    "ExperimentSpec",
    "Genome",
    "MallInstance",
    "MallProblem",
    "NurseInstance",
    "NurseProblem",
    "PenaltyState",
    "ResultRow",
    "STRATEGIES",
    "SubPopulation",
    "Topology",
    "ToroidalGrid",
    "build_mall_topology",
    "build_nurse_topology",
    "build_single_topology",
    "check_stop",
    "decompose_sizes",
    "evaluate",
    "fixed_point_crossover",
    "full_fitness",
    "full_rent",
    "is_feasible",
    "mutate",
    "penalised",
    "rank_roulette_select",
    "replace_generation",
    "run_experiment",
    "sub_fitness",
    "uniform_crossover",
    "update",
    "__version__",
]
