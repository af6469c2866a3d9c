"""Limit models on a chosen time scale, with averaging of fast subsystems."""

from .assemble import NotClosed, to_hybrid
from .averaging import (Averager, EmptyStateSpace, Equilibrium, FastGenerator, MultiScaleFastBlock,
                        NotIrreducible, TruncationFailed, averaged_intensity, averaged_limit_model,
                        fast_generator, stationary_distribution)
from .closed_forms import (GOUTSIAS_AUX, NoRootInRange, alpha_moment_closure, goutsias_alpha,
                           goutsias_first_scale, goutsias_g2_model, goutsias_mu, goutsias_second_scale,
                           mastny_reduced_model, michaelis_menten_rhs, phi_pair)
from .limit import (FastBlock, InadmissibleScaleWarning, LimitModel, LimitVariable, NotInK2,
                    ReductionError, TermClass, TermKind, VariableKind, build_limit_model, classify_gap,
                    default_aux, limit_rate, normalized_initial)
from .serialize import RECIPES, ReducedModelMismatch, format_reduced, parse_reduced, reduce_network

__all__ = [name for name in dir() if not name.startswith("_")]
