"""Exact, deterministic and hybrid simulation with ensemble statistics."""

from .compare import Comparison, GridMismatch, compare_models, hitting_table
from .ensemble import EnsembleStats, OdeProcess, ReplicateError, run_ensemble
from .hybrid import HybridControls, HybridModel, HybridProcess, JumpChannel, simulate_hybrid
from .ode import OdeControls, StepSizeUnderflow, integrate_ode, ode_steps
from .rng import RngStream
from .ssa import (DEFAULT_EVENT_CAP, Exploded, LinearPredicate, ScaledProcess, SSAProcess, Trajectory,
                  compile_network, hitting_time, scaled_process, simulate_ssa)

__all__ = [name for name in dir() if not name.startswith("_")]
