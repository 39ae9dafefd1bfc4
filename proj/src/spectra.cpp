#include "mate/spectra.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace mate {

namespace {

// Gram matrix on the smaller side: (1/n) X X^T if d <= n, else (1/n) X^T X.
Matrix small_gram(const Matrix& x) {
    const Index d = x.rows(), n = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    Matrix s;
    if (d <= n) {
        s.noalias() = x * x.transpose();
    } else {
        s.noalias() = x.transpose() * x;
    }
    s *= inv_n;
    return s;
}

Vector clamp_and_sort_desc(Vector ascending, Index d) {
    Vector w = ascending.reverse();
    const double top = w.size() > 0 ? std::abs(w[0]) : 0.0;
    const double floor = -1e-10 * top;
    for (Index i = 0; i < w.size(); ++i) {
        if (w[i] < 0.0) {
            if (w[i] < floor - 1e-8 * top)
                throw NumericalError("sample covariance eigenvalue " + std::to_string(w[i]) +
                                     " far below zero (top " + std::to_string(top) + ")");
            w[i] = 0.0;
        }
    }
    if (w.size() < d) {
        Vector padded = Vector::Zero(d);
        padded.head(w.size()) = w;
        return padded;
    }
    return w;
}

}  // namespace

SpectrumResult sample_cov_eigs(const Matrix& zero_filled) {
    const Index d = zero_filled.rows(), n = zero_filled.cols();
    if (d < 1 || n < 1) throw DimensionError("sample_cov_eigs: empty matrix");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(small_gram(zero_filled),
                                                 Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigensolver failed to converge on the " +
                             std::to_string(std::min(d, n)) + "-dim Gram side");
    SpectrumResult out;
    out.eigenvalues = clamp_and_sort_desc(solver.eigenvalues(), d);
    out.d = d;
    out.n = n;
    out.gamma_n = static_cast<double>(d) / static_cast<double>(n);
    return out;
}

SpectrumResult sample_cov_eigs(const IncompleteMatrix& x) {
    x.validate();
    return sample_cov_eigs(x.values);
}

double largest_cov_eig(const Matrix& zero_filled) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(small_gram(zero_filled),
                                                 Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigensolver failed to converge");
    const Vector& w = solver.eigenvalues();
    return std::max(0.0, w[w.size() - 1]);
}

std::pair<Matrix, Vector> top_cov_eigenpairs(const Matrix& zero_filled, Index k) {
    const Index d = zero_filled.rows(), n = zero_filled.cols();
    if (k < 1 || k > std::min(d, n))
        throw DimensionError("top_cov_eigenpairs: k outside [1, min(d, n)]");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(small_gram(zero_filled));
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigensolver failed to converge");
    const Index m = solver.eigenvalues().size();
    Vector vals(k);
    Matrix vecs(d, k);
    for (Index t = 0; t < k; ++t) {
        vals[t] = std::max(0.0, solver.eigenvalues()[m - 1 - t]);
        if (d <= n) {
            vecs.col(t) = solver.eigenvectors().col(m - 1 - t);
        } else {
            // Lift right-singular directions back to feature space.
            Vector u = zero_filled * solver.eigenvectors().col(m - 1 - t);
            const double norm = u.norm();
            vecs.col(t) = norm > 0.0 ? Vector(u / norm) : Vector(Vector::Zero(d));
        }
    }
    return {vecs, vals};
}

std::pair<double, double> trimmed_moments(const SpectrumResult& spec, Index r_hat) {
    const Index d = spec.d;
    if (r_hat < 0 || r_hat >= d)
        throw ParameterError("trimmed_moments: r_hat " + std::to_string(r_hat) +
                             " outside [0, d)");
    double s1 = 0.0, s2 = 0.0;
    for (Index i = r_hat; i < d; ++i) {
        const double w = spec.eigenvalues[i];
        s1 += w;
        s2 += w * w;
    }
    const double denom = static_cast<double>(d - r_hat);
    return {s1 / denom, s2 / denom};
}

double moment_of_matrix(const Matrix& a, int k) {
    if (a.rows() != a.cols()) throw DimensionError("moment_of_matrix: matrix is not square");
    if (k != 1 && k != 2) throw ParameterError("moment_of_matrix: k must be 1 or 2");
    const double dim = static_cast<double>(a.rows());
    if (k == 1) return a.trace() / dim;
    return a.cwiseProduct(a.transpose()).sum() / dim;
}

}  // namespace mate
