"""Change-point detection in a stream of two-level quantum states.

A source emits ``n`` photons, all |H> up to an unknown position ``k`` and a
partially overlapping rotated state from there on.  This package simulates
and compares detection strategies for ``k`` -- a fixed-basis local strategy,
an adaptive Bayesian agent, and the optimal global measurement -- and
includes an event-level model of the photon-counting pipeline (triggers,
chopper bins, strict-window coincidences) that real counting hardware would
apply before any of those strategies see a bit.
"""

__version__ = "0.1.0"

from .qubit import (
    ATOL,
    BinaryMeasurement,
    H_STATE,
    Operator2,
    QubitState,
    V_STATE,
    computational_basis,
    eigen_sym2,
    helstrom_measurement,
    make_mutated_state,
    outcome_probabilities,
)
from .strategies import (
    ImpossibleOutcomeError,
    PriorVector,
    SourceConfig,
    TrialRecord,
    apply_outcome_noise,
    bi_hypothesis_weights,
    bi_likelihood,
    bi_replay,
    bi_run,
    bi_update,
    bl_guess,
    bl_run,
    bl_success_closed_form,
    guess_from_prior,
    srm_conditional_probabilities,
    srm_optimal_probability,
)
from .experiments import (
    DEFAULT_OVERLAP_GRID,
    EstimateWithError,
    SweepRow,
    SweepTable,
    distance_table,
    exact_bi_success,
    exact_bl_success,
    read_sweep_csv,
    simulate_success,
    sweep_k,
    sweep_n,
    sweep_overlap,
    trial_seed_words,
    write_sweep_csv,
)
from .events import (
    BinOutcome,
    Channel,
    Classification,
    DetectionEvent,
    InvalidTrialError,
    StreamFormatError,
    TimingConfig,
    classify_effective,
    coincident,
    generate_stream,
    postselect_bins,
    read_events_csv,
    run_strategy_on_stream,
    write_events_csv,
)

__all__ = [
    "ATOL",
    "BinaryMeasurement",
    "BinOutcome",
    "Channel",
    "Classification",
    "DEFAULT_OVERLAP_GRID",
    "DetectionEvent",
    "EstimateWithError",
    "H_STATE",
    "ImpossibleOutcomeError",
    "InvalidTrialError",
    "Operator2",
    "PriorVector",
    "QubitState",
    "SourceConfig",
    "StreamFormatError",
    "SweepRow",
    "SweepTable",
    "TimingConfig",
    "TrialRecord",
    "V_STATE",
    "apply_outcome_noise",
    "bi_hypothesis_weights",
    "bi_likelihood",
    "bi_replay",
    "bi_run",
    "bi_update",
    "bl_guess",
    "bl_run",
    "bl_success_closed_form",
    "classify_effective",
    "coincident",
    "computational_basis",
    "distance_table",
    "eigen_sym2",
    "exact_bi_success",
    "exact_bl_success",
    "generate_stream",
    "guess_from_prior",
    "helstrom_measurement",
    "make_mutated_state",
    "outcome_probabilities",
    "postselect_bins",
    "read_events_csv",
    "read_sweep_csv",
    "run_strategy_on_stream",
    "simulate_success",
    "srm_conditional_probabilities",
    "srm_optimal_probability",
    "sweep_k",
    "sweep_n",
    "sweep_overlap",
    "trial_seed_words",
    "write_events_csv",
    "write_sweep_csv",
]
