"""Multiscale analysis, reduction and simulation of stochastic reaction networks."""

from .core import (ConservationLaw, Network, Reaction, Species, apply_reaction, classical_ode_rhs,
                   conservation_laws, intensity, validate)
from .parse import ParseError, format_network, format_scaling, parse_network, parse_scaling
from .scaling import (BalanceReport, ScalingSpec, check_collective_balance, check_species_balance,
                      compute_k2_r2, enumerate_sign_classes, propose_alpha, scc_decompose,
                      species_timescale, theta_timescale, verify_all_balance)

__version__ = "0.1.0"
__all__ = [name for name in dir() if not name.startswith("_")]
