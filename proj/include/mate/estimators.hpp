#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "mate/datagen.hpp"
#include "mate/edges.hpp"
#include "mate/spectra.hpp"
#include "mate/types.hpp"

namespace mate {

struct MateConfig {
    double beta = 0.1;            // null-quantile level
    int monte_carlo_copies = 500; // M
    int r_max = 10;               // spike-count cap (8 for isotropic simulations)
    std::optional<double> epsilon_override;
    int max_iterations = 10;

    /// Unit-variance null calibration shared across replications of one
    /// setting; computed internally when absent.
    std::shared_ptr<const struct NullCalibration> calibration;

    void validate() const;
};

enum class Regime { homogeneous, feature, sample, anisotropic };

struct MateResult {
    int r_hat = 0;
    double v = 0.0;          // asymptotic edge at the final noise estimate
    double epsilon_n = 0.0;  // margin actually added to v
    double theta_hat = kInf; // +inf = isotropic
    double sigma2_hat = 0.0;
    int iterations = 0;
    Regime regime = Regime::homogeneous;
    bool converged = true;
};

/// Number of eigenvalues strictly exceeding v + eps.
int threshold_count(const SpectrumResult& eigs, double v, double eps);

/// Largest eigenvalues of M null datasets at sigma^2 = 1 under `pattern`,
/// sorted ascending. Null eigenvalues scale exactly linearly in sigma^2, so
/// one table serves every noise level.
struct NullCalibration {
    std::vector<double> lambda1_sorted;
    double mean = 0.0;

    /// (1-beta) upper quantile (order statistic, no interpolation).
    double upper_quantile(double beta) const;
    /// Mean-centered quantile margin of Algorithm-2 form.
    double epsilon(double beta) const { return upper_quantile(beta) - mean; }
};

NullCalibration simulate_null_calibration(const MissingnessSpec& pattern, Index d, Index n,
                                          const MateConfig& config, std::uint64_t seed);

/// epsilon_n = (1-beta)-quantile of {lambda*_1(m) - mean_m lambda*_1} over M
/// null datasets with Sigma = sigma2 I and the given missingness pattern.
double select_epsilon(const MissingnessSpec& pattern, Index d, Index n, double sigma2,
                      const MateConfig& config, std::uint64_t seed);

/// Isotropic MATE. Estimates block rates at the requested grouping, iterates
/// the noise-level estimate to a fixed point, and thresholds the spectrum at
/// the matched-null (1-beta)-quantile scaled by the noise estimate.
MateResult mate_isotropic(const IncompleteMatrix& x, const Grouping& grouping,
                          const MateConfig& config, std::uint64_t seed);

struct MomentEstimate {
    double theta = kInf;   // +inf sentinel = isotropic boundary
    double sigma2 = 0.0;
    bool isotropic_sentinel = false;
};

/// Inversion of the feature-specific limiting moments:
/// sigma2 = b1 / P1, theta = P2 / ((b2/b1^2 - gamma) P1^2 - P2)
/// with P1 = d^{-1} sum p_k d_k, P2 = d^{-1} sum p_k^2 d_k.
MomentEstimate moment_estimators_feature(double b1, double b2, std::span<const double> rates,
                                         std::span<const Index> sizes, double gamma);

/// Sample-specific mirror with Q1 = n^{-1} sum q_l n_l, Q2 = n^{-1} sum q_l^2 n_l:
/// sigma2 = b1 / Q1, theta = Q1^2 / ((b2/b1^2 - 1) Q1^2 - gamma Q2).
MomentEstimate moment_estimators_sample(double b1, double b2, std::span<const double> rates,
                                        std::span<const Index> sizes, double gamma);

/// (1-beta)-quantile of the largest eigenvalue over M null datasets with
/// diagonal Gamma(theta, theta/sigma2) noise (constant sigma2 when theta is
/// the isotropic sentinel) and fresh Bernoulli masks at the per-feature rates.
double null_quantile_T(const Vector& feature_rates, double theta, double sigma2, Index n,
                       const MateConfig& config, std::uint64_t seed);

/// Anisotropic MATE (iterative): trim -> moment estimates -> null quantile ->
/// recount, until the count stabilizes. Oscillations resolve to the smaller
/// count with converged = false.
MateResult mate_anisotropic(const IncompleteMatrix& x, const MateConfig& config,
                            std::uint64_t seed);

/// Eigenvalue-ratio rule on the 1/p^2-rescaled spectrum.
int baseline_m_er(const SpectrumResult& eigs, double p_hat, int r_max);

/// Growth-ratio rule on cumulative tail sums.
int baseline_m_gr(const SpectrumResult& eigs, double p_hat, int r_max);

/// Eigenvalue-difference rule with the iterative regression calibration of
/// the difference threshold.
int baseline_m_ed(const SpectrumResult& eigs, double p_hat, int r_max);

}  // namespace mate
