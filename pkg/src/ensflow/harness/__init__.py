"""Experiment driver: scenarios, simulated sensing, measurement policies, LOOCV, timing."""

from .scenarios import Scenario, reference_scenario, hotspot_scenario
from .sensing import HeldOutTruth, simulate_measurement
from .policies import PolicyConfig, next_measurement_position, default_subspace_rect
from .loocv import TrialReport, run_loocv, run_policy_trial
from .bench import run_timing_bench

__all__ = [
    "Scenario",
    "reference_scenario",
    "hotspot_scenario",
    "HeldOutTruth",
    "simulate_measurement",
    "PolicyConfig",
    "next_measurement_position",
    "default_subspace_rect",
    "TrialReport",
    "run_loocv",
    "run_policy_trial",
    "run_timing_bench",
]
