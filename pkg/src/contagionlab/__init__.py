"""Noisy threshold contagion on cycle-union and empirical graphs."""

__version__ = "0.1.0"

from .activation import (FractionalThreshold, Logit, NoisyThreshold, Probit, Simple,
                         activation_probability, make_activation)
from .dynamics import (CYCLE1_ONLY, ContagionState, DynamicsConfig, NodeStatus, RunOutcome, run,
                       seed_adjacent_pair, step)
from .graphs import (EdgeLabel, Graph, cycle_power, cycle_union_random, erdos_renyi,
                     eta_rewired_c2, graph_stats, load_edge_list, union, watts_strogatz,
                     write_edge_list)
from .interventions import (InterventionSpec, add_random, add_triad_closing,
                            common_neighbor_count, rewire)
from .oracle import deterministic_closure, edge_monotonicity_check, exact_expected_time
