"""Safe single-photon bounds for decoy-state sources with intensity errors.

The package has three layers:

* source_model / bound_engine / key_rate: the analytic pipeline. Photon
  number distributions with interval coefficients, worst-case lower bounds
  on single-photon contributions, and key-rate evaluation.
* attack_sim: a deterministic pulse-level Monte Carlo simulator, including
  a block-correlated intensity drift paired with a matching channel attack.
* verify_oracle: compares the analytic bounds against simulator ground
  truth, which knows what each pulse actually carried.
"""
from .exceptions import ParameterError, PreconditionError, RecordError
from .source_model import (
    BoundedDistribution,
    CoherentWindow,
    ConditionReport,
    ErrorPattern,
    PhotonDistribution,
    check_condition_14,
    check_condition_53,
    coherent_bounds,
    custom_pattern,
    default_cutoff,
    exact_pattern,
    pattern_extremes,
    pattern_intensity,
    per_pulse_pattern,
    poisson_distribution,
    require_pattern_in_windows,
    two_block_pattern,
)
from .bound_engine import (
    D1Result,
    ErrorFreeResult,
    ObservedRates,
    SingletBound,
    d1_lower,
    delta1_bounds,
    errorfree_s1_lower,
    vacuum_count_bounds,
)
from .key_rate import (
    CAPTION,
    CONVENTIONS,
    CSV_COLUMNS,
    DARK_CORRECTED,
    KeyRateInput,
    SweepRow,
    binary_entropy,
    format_csv,
    key_rate_hz,
    key_rate_per_count,
    parse_csv,
    single_photon_qber,
    sweep_delta_m,
)
from .attack_sim import (
    ChannelModel,
    SimTally,
    SimTrace,
    detected_index_sets,
    empirical_subclass_rates,
    linear_channel,
    per_block_random_channel,
    s1_ratio_estimate,
    simulate,
    source_posterior,
    two_block_attack_channel,
    two_block_s1_ratio,
)
from .verify_oracle import (
    GroundTruth,
    SafetyReport,
    Scenario,
    SuiteResult,
    UnsafeBaselineResult,
    check_safety,
    extract_ground_truth,
    find_unsafe_baseline,
    random_scenario,
    run_scenario,
    run_scenarios,
)
from .records import ExperimentRecord, bundled_record_path, load_record, record_from_dict
from .plotting import render_sweep_figure

__version__ = "0.1.0"

__all__ = [
    "ParameterError", "PreconditionError", "RecordError",
    "BoundedDistribution", "CoherentWindow", "ConditionReport", "ErrorPattern",
    "PhotonDistribution", "check_condition_14", "check_condition_53",
    "coherent_bounds", "custom_pattern", "default_cutoff", "exact_pattern",
    "pattern_extremes",
    "pattern_intensity", "per_pulse_pattern", "poisson_distribution",
    "require_pattern_in_windows", "two_block_pattern",
    "D1Result", "ErrorFreeResult", "ObservedRates", "SingletBound",
    "d1_lower", "delta1_bounds", "errorfree_s1_lower", "vacuum_count_bounds",
    "CAPTION", "CONVENTIONS", "CSV_COLUMNS", "DARK_CORRECTED",
    "KeyRateInput", "SweepRow", "binary_entropy", "format_csv",
    "key_rate_hz", "key_rate_per_count", "parse_csv", "single_photon_qber",
    "sweep_delta_m",
    "ChannelModel", "SimTally", "SimTrace", "detected_index_sets",
    "empirical_subclass_rates", "linear_channel", "per_block_random_channel",
    "s1_ratio_estimate", "simulate", "source_posterior",
    "two_block_attack_channel", "two_block_s1_ratio",
    "GroundTruth", "SafetyReport", "Scenario", "SuiteResult",
    "UnsafeBaselineResult", "check_safety", "extract_ground_truth",
    "find_unsafe_baseline", "random_scenario", "run_scenario", "run_scenarios",
    "ExperimentRecord", "bundled_record_path", "load_record",
    "record_from_dict",
    "render_sweep_figure",
    "__version__",
]
