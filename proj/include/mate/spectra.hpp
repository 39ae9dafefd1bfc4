#pragma once

#include <utility>

#include "mate/types.hpp"

namespace mate {

struct SpectrumResult {
    Vector eigenvalues;  // length d, nonincreasing, >= 0
    Index d = 0;
    Index n = 0;
    double gamma_n = 0.0;
};

/// Eigenvalues of (1/n) X^o X^{o T} with missing entries as zero, sorted
/// descending. Always solved on the smaller Gram side and zero-padded to d;
/// round-off negatives within 1e-10 * lambda_1 are clamped.
SpectrumResult sample_cov_eigs(const IncompleteMatrix& x);

/// Same on a raw zero-filled matrix (null simulations skip the mask object).
SpectrumResult sample_cov_eigs(const Matrix& zero_filled);

/// Largest eigenvalue of (1/n) X X^T only.
double largest_cov_eig(const Matrix& zero_filled);

/// Top eigenpairs of (1/n) X^o X^{o T}: returns (d x k eigenvectors, k eigenvalues).
std::pair<Matrix, Vector> top_cov_eigenpairs(const Matrix& zero_filled, Index k);

/// Bulk-only averages of eigenvalues and squared eigenvalues, excluding the
/// top r_hat: ((d-r)^{-1} sum_{i>r} w_i, (d-r)^{-1} sum_{i>r} w_i^2).
std::pair<double, double> trimmed_moments(const SpectrumResult& spec, Index r_hat);

/// beta_k(A) = tr(A^k) / dim(A) for k in {1, 2}.
double moment_of_matrix(const Matrix& a, int k);

}  // namespace mate
