"""Optimal measurement sampling for finite-state Markov chains observed in noise.

The main entry points:

* :class:`~optsample.models.SamplingModel` with the filter and order predicates,
* :func:`~optsample.costs.build_qd_costs` / :func:`~optsample.costs.build_action_costs`,
* :func:`~optsample.solver.value_iterate` on a :func:`~optsample.solver.make_grid` grid,
* :mod:`~optsample.bounds` for assumption checks and myopic bound policies,
* :mod:`~optsample.analysis` for cross-model comparisons,
* :mod:`~optsample.sim` for Monte Carlo evaluation.
"""

from .costs import (ActionCostVectors, CostSpec, a7_alpha, build_action_costs, build_qd_costs,
                    transform_bar, transform_underline)
from .models import (ModelError, ObservationModel, OrderVerdict, SamplingModel, StructureError,
                     ZeroLikelihoodError, blackwell_geq, change_time_pmf, discrete_observations,
                     discretize_observations, filter_update, fosd_compare, gaussian_observations,
                     is_tp2, mlr_compare, poisson_observations, predict, transition_order_geq)
from .solver import (BeliefGrid, ConvergenceError, Policy, Solution, analyze_stopping_set,
                     extract_thresholds, make_grid, policy_evaluate, value_iterate)

__version__ = "0.1.0"
