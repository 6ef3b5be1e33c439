"""Differentially private multi-concept learning at desk scale.

Finite-universe concept classes, exact-distribution DP mechanisms, synthetic
data sanitizers, multi-concept learners, fingerprinting-code tracing attacks,
and a reproducible experiment harness.
"""

from .domain import (
    Concept,
    ConceptClass,
    Distribution,
    EmptyDatabaseError,
    LabeledDistribution,
    LabeledView,
    MultiLabeledDatabase,
    Universe,
    UniverseMismatchError,
    dichotomy_projection,
    empirical_error,
    evaluate,
    evaluate_many,
    generalization_error,
    load_database,
    parity,
    point,
    sample_database,
    save_database,
    thresh,
    vc_sample_size,
    xor_evaluate,
    zero,
)
from .mechanisms import (
    PrivacyLedger,
    PrivacyParams,
    ScoredCandidate,
    compose_advanced,
    compose_basic,
    dp_bound_holds,
    exponential_mechanism,
    exponential_mechanism_pmf,
    laplace_sample,
    stable_argmax,
    stable_argmax_over,
    stable_argmax_pmf,
)
from .sanitize import (
    EnumerationBudgetError,
    SanitizedAnswers,
    SyntheticDatabase,
    answers_to_synthetic,
    sanitize_error,
    sanitize_exhaustive,
    sanitize_points,
)
from .learners import (
    LearnResult,
    direct_sum_learner,
    erm_multi,
    generic_multi_learner,
    generic_privacy_total,
    gf2_solve,
    nearest_parity,
    parity_learner,
    point_learner,
    secrecy_amplification,
    subsampled_learner,
)
from .fingerprint import (
    AttackReport,
    Codebook,
    attack_experiment,
    code_length,
    feasible,
    gen_codebook,
    pirate_word,
    trace_word,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    TrialReport,
    emit,
    parse_config,
    plan_sample_size,
    run_experiment,
)
from .rng import stream
