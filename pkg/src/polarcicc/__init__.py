"""Polar coding for the two-user cognitive interference channel with a
confidential message at the cognitive transmitter."""

from .construction import (
    Construction, ChainingPlan, RateInfeasible, build_chaining_plan, build_construction,
)
from .dist import CiccInstance, JointDist, MarkovViolation
from .harness import ExperimentConfig, MetricsReport, run_experiment
from .instance_io import load_instance, parse_instance
from .polarizer import classify_case
from .region import RateTuple, RegionBounds, evaluate_region, membership

__version__ = "0.1.0"

__all__ = [
    "ChainingPlan", "CiccInstance", "Construction", "ExperimentConfig", "JointDist",
    "MarkovViolation", "MetricsReport", "RateInfeasible", "RateTuple", "RegionBounds",
    "build_chaining_plan", "build_construction", "classify_case", "evaluate_region",
    "load_instance", "membership", "parse_instance", "run_experiment",
]
