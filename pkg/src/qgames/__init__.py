"""Social welfare of equilibria in non-cooperative binary games with classical and quantum advice."""
from .game_model import GameFamily, GameSpec, build_game, game_at_ratio, payoff, social_welfare
from .correlation import (ConditionalDistribution, MixedSolution, NashReport, PureSolution,
                          canonicalize, check_canonical_nash, check_membership_local,
                          check_nonsignalling, induce_distribution)
from .quantum_sim import (POVMSet, QuantumSolution, QuantumState, born_distribution,
                          check_dev_equilibrium, deviated_solution, graph_state,
                          pseudo_telepathic_solution, pwin_table)
from .equilibrium import best_response, check_quantum_equilibrium, payoff_operators
from .classical_opt import (communication_equilibrium_lp, correlated_equilibrium_lp,
                            enumerate_pure_nash, nonsignalling_equilibrium_lp)
from .npa import build_monomial_basis, canonical_moment, npa_upper_bound
from .seesaw import SeesawConfig, seesaw_optimize

__version__ = "0.1.0"

__all__ = [
    "GameFamily", "GameSpec", "build_game", "game_at_ratio", "payoff", "social_welfare",
    "ConditionalDistribution", "MixedSolution", "NashReport", "PureSolution", "canonicalize",
    "check_canonical_nash", "check_membership_local", "check_nonsignalling", "induce_distribution",
    "POVMSet", "QuantumSolution", "QuantumState", "born_distribution", "check_dev_equilibrium",
    "deviated_solution", "graph_state", "pseudo_telepathic_solution", "pwin_table",
    "best_response", "check_quantum_equilibrium", "payoff_operators",
    "communication_equilibrium_lp", "correlated_equilibrium_lp", "enumerate_pure_nash",
    "nonsignalling_equilibrium_lp", "build_monomial_basis", "canonical_moment", "npa_upper_bound",
    "SeesawConfig", "seesaw_optimize",
]
