"""Exact simulation of linear-optics Bell-state analyzers with realistic detectors."""

from .analyzer import (Metrics, PostSelectionPlan, SchemeSpec, build_plan, build_spdc_plan, evaluate,
                       evaluate_spdc, exact_crossover, ideal_metrics, max_success_rate, outcome_count,
                       output_term_counts, spdc_per_n_rates)
from .approx import approx_rates, approx_vs_exact_report, crossover, rate_formula
from .arrays import (array_false_positive, array_rate, array_rate_lossy, categorize, exact_array_simulate,
                     flow_matrix)
from .detection import DetectorModel, conditional_table, model_map
from .errors import ConfigError, ResourceLimitError
from .fock import BellState, hilbert_dim, hilbert_dim_upto, mean_pair_number, spdc_weights
from .ideal import SchemeKind

__all__ = [
    "BellState", "ConfigError", "DetectorModel", "Metrics", "PostSelectionPlan", "ResourceLimitError",
    "SchemeKind", "SchemeSpec", "approx_rates", "approx_vs_exact_report", "array_false_positive",
    "array_rate", "array_rate_lossy", "build_plan", "build_spdc_plan", "categorize", "conditional_table",
    "crossover", "evaluate", "evaluate_spdc", "exact_array_simulate", "exact_crossover", "flow_matrix",
    "hilbert_dim", "hilbert_dim_upto", "ideal_metrics", "max_success_rate", "mean_pair_number",
    "model_map", "outcome_count", "output_term_counts", "rate_formula", "spdc_per_n_rates", "spdc_weights",
]
