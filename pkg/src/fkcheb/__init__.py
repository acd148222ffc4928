"""Inf-stationarity analysis of free-knot Chebyshev spline approximations."""
from .cli import cli
from .config import AnalysisConfig
from .deviation import DeviationProfile, ExtremePoint, deviation_profile
from .pipelines.analysis_pipeline import AnalysisPipeline, AnalysisReport
from .problem import ProblemSpec, ProblemValidationError, load_problem
from .solvers import best_fixed_knot_spline, best_polynomial, meinardus_fit
from .spline import SplineModel, classify_knots, evaluate
from .stationarity import analyze_stationarity, characterization_check, find_stationary_interval
from .targets import TargetFunction

__version__ = "0.1.0"

__all__ = [
    "cli",
    "AnalysisConfig",
    "AnalysisPipeline",
    "AnalysisReport",
    "DeviationProfile",
    "ExtremePoint",
    "ProblemSpec",
    "ProblemValidationError",
    "SplineModel",
    "TargetFunction",
    "analyze_stationarity",
    "best_fixed_knot_spline",
    "best_polynomial",
    "characterization_check",
    "classify_knots",
    "deviation_profile",
    "evaluate",
    "find_stationary_interval",
    "load_problem",
    "meinardus_fit",
]
