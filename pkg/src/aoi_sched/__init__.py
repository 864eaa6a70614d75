"""Optimal switch/skip scheduling of status updates on a multi-slot link."""

__version__ = "0.1.0"

from .core import Action, Params, State, TabularPolicy, ThresholdPolicy, default_delta_m, epoch_coords, tail_delta_m
from .mdp import SolveConfig, evaluate_stationary, extract_thresholds, solve_rvi, solve_structured
from .renewal import EpochStats, eval_threshold_exact, myopic_closed_form
from .sim import SimConfig, SimReport, simulate, sweep
