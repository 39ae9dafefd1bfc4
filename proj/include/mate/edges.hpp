#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mate/types.hpp"

namespace mate {

/// Finitely supported probability measure on (0, inf); drives the
/// psi-function and the self-consistent edge systems.
struct DiscreteMeasure {
    std::vector<double> atoms;
    std::vector<double> weights;

    void validate() const;
    double max_atom() const;

    static DiscreteMeasure point_mass(double atom) { return {{atom}, {1.0}}; }
    /// Atoms scaled elementwise by c (edge problems are exactly linear in scale).
    DiscreteMeasure scaled(double c) const;
};

enum class EdgeMethod { closed_form, psi_root, system_root, duality };

struct EdgeResult {
    double lambda_plus = 0.0;                  // rightmost bulk edge (sample scale)
    std::optional<double> alpha_plus;          // population cutoff, homogeneous/feature case
    std::optional<double> s2_edge;             // s2(a1), sample-specific case
    EdgeMethod method = EdgeMethod::closed_form;

    /// Population identification cutoff: alpha_plus when present, else
    /// -1/s2(a1) for the sample-specific system.
    double population_threshold() const;
};

/// Homogeneous closed form: lambda_+ = p sigma^2 (1+sqrt(gamma))^2,
/// alpha_+ = p sigma^2 (1+sqrt(gamma)).
EdgeResult mp_edge(double p, double sigma2, double gamma);

/// psi(alpha) = alpha + gamma * sum_j w_j alpha t_j / (alpha - t_j).
double psi_feature(double alpha, double gamma, const DiscreteMeasure& m);

/// psi'(alpha) = 1 - gamma * sum_j w_j t_j^2 / (alpha - t_j)^2.
double psi_feature_derivative(double alpha, double gamma, const DiscreteMeasure& m);

/// Rightmost edge of the feature-specific bulk: alpha_+ is the unique root of
/// psi' right of the support, lambda_+ = psi(alpha_+).
EdgeResult feature_edge(double gamma, const DiscreteMeasure& m);

/// Inverse of psi on (alpha_+, inf); y below the edge maps to alpha_+.
double psi_feature_inverse(double y, double gamma, const DiscreteMeasure& m,
                           const EdgeResult& edge);

/// Limiting sample location psi(tilde_lambda) of an identifiable spike.
/// Throws if tilde_lambda <= alpha_+.
double spike_limit_feature(double tilde_lambda, double gamma, const DiscreteMeasure& m);

/// Sample-specific rightmost edge a1 for isotropic noise. Primary route is
/// the transpose duality (feature_edge at aspect 1/gamma on atoms
/// sigma2 * q_l, scaled back by gamma); the direct (f, df/ds) system solver
/// cross-checks and supplies s2(a1). Disagreement beyond 1e-6 relative throws.
EdgeResult sample_edge(double gamma, const DiscreteMeasure& mq, double sigma2);

/// Stieltjes branch value s2(z) for real z right of the bulk; used to invert
/// sample-specific spike locations via lambda = -1/s2(lambda_hat).
double sample_s2_at(double z, double gamma, const DiscreteMeasure& mq, double sigma2);

/// Number of spikes strictly above the population cutoff.
int count_identifiable(std::span<const double> spikes, double threshold);

}  // namespace mate
