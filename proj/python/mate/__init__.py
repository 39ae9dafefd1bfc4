"""Factor-count estimation for incomplete high-dimensional panels."""

from mate._core import (
    EdgeResult,
    IncompleteMatrix,
    MateError,
    MateResult,
    Regime,
    SpectrumResult,
    apply_mcar,
    baseline_m_ed,
    baseline_m_er,
    baseline_m_gr,
    count_identifiable,
    feature_edge,
    generate_complete,
    mate_anisotropic,
    mate_isotropic,
    moment_of_matrix,
    mp_edge,
    per_feature_rates,
    per_sample_rates,
    psi_feature,
    rmse_rank_validation,
    sample_cov_eigs,
    sample_cov_eigs_dense,
    sample_edge,
    select_epsilon,
    spike_limit_feature,
    standardize,
    trimmed_moments,
)

__all__ = [
    "EdgeResult",
    "IncompleteMatrix",
    "MateError",
    "MateResult",
    "Regime",
    "SpectrumResult",
    "apply_mcar",
    "baseline_m_ed",
    "baseline_m_er",
    "baseline_m_gr",
    "count_identifiable",
    "feature_edge",
    "generate_complete",
    "mate_anisotropic",
    "mate_isotropic",
    "moment_of_matrix",
    "mp_edge",
    "per_feature_rates",
    "per_sample_rates",
    "psi_feature",
    "rmse_rank_validation",
    "sample_cov_eigs",
    "sample_cov_eigs_dense",
    "sample_edge",
    "select_epsilon",
    "spike_limit_feature",
    "standardize",
    "trimmed_moments",
]
