"""
Equilibrium selection for generalized Nash equilibrium problems.

The lower-level variational GNEP is encoded as the fixed-point set of an
averaged forward-backward-forward operator; the hybrid steepest descent
method then picks the equilibrium that solves an upper-level variational
inequality over that set.
"""

from .games import (LinearCoupling, LowerGame, UpperSelector, consensus_selector, consensus_upper_gradient,
                    coupled_game, coupled_game_pseudo_gradient, cycle_selector, cycle_upper_gradient,
                    estimate_lipschitz, implicit_set_game, implicit_set_pseudo_gradient, lift_upper_selector,
                    zero_selector)
from .hsdm import (DivergenceError, IterationTrace, SolverConfig, evaluate_upper_costs, hsdm_step,
                   lambda_harmonic, run_fbf, run_hsdm)
from .oracles import (BudgetError, CycleTuple, best_approximation_pair, box_distance, cycle_residual,
                      finite_difference_gradient, pocs_cycle, zero_inclusion_check)
from .sets import BallSet, BoxSet, ConvexSet, UpperBoundedSet, WholeSpaceSet, distance, project
from .spaces import (BlockVector, PrimalDualPoint, SpaceSignature, StructuralError, axpy, circular_shift_right,
                     inner, norm, substitute)
from .splitting import (SplittingContext, StepSizeError, player_by_player_step, fix_residual, operator_A, resolvent_B,
                        safeguarded_t, t_alpha, t_fb, t_fbf)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
