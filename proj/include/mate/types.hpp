#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "mate/errors.hpp"

namespace mate {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Noise specification: isotropic sigma^2 I, or a diagonal with i.i.d.
// Gamma(theta, theta/sigma2) entries, optionally truncated to
// [sigma2*t1, sigma2*t2].
// ---------------------------------------------------------------------------

struct Isotropic {
    double sigma2 = 1.0;
};

struct GammaDiagonal {
    double theta = 1.0;
    double sigma2 = 1.0;
    double t1 = 0.0;    // lower truncation multiple; 0 = none
    double t2 = kInf;   // upper truncation multiple; inf = none
};

using NoiseSpec = std::variant<Isotropic, GammaDiagonal>;

void validate(const NoiseSpec& noise);
double mean_noise_variance(const NoiseSpec& noise);

// ---------------------------------------------------------------------------
// Missingness: homogeneous rate, feature-block rates, or sample-block rates.
// Rates live in (0, 1]; block sizes must partition the matching dimension.
// ---------------------------------------------------------------------------

struct Homogeneous {
    double rate = 1.0;
};

struct FeatureBlocks {
    std::vector<double> rates;
    std::vector<Index> sizes;
};

struct SampleBlocks {
    std::vector<double> rates;
    std::vector<Index> sizes;
};

using MissingnessSpec = std::variant<Homogeneous, FeatureBlocks, SampleBlocks>;

/// Throws ParameterError / DimensionError if the spec cannot mask a d x n matrix.
void validate(const MissingnessSpec& spec, Index d, Index n);

/// Expected observation rate of entry (i, j).
double rate_at(const MissingnessSpec& spec, Index i, Index j);

/// Overall expected observed fraction.
double overall_rate(const MissingnessSpec& spec, Index d, Index n);

// ---------------------------------------------------------------------------
// Factor model: Sigma = diag(spikes, noise diagonal); X = Sigma^{1/2} Y with
// Y i.i.d. standard normal. `rotate` conjugates Sigma by a random orthogonal
// matrix (spectrum-preserving; used by invariance tests only).
// ---------------------------------------------------------------------------

struct FactorModelSpec {
    Index d = 0;
    Index n = 0;
    std::vector<double> spikes;  // nonincreasing, > 0, fewer than d
    NoiseSpec noise = Isotropic{1.0};
    bool rotate = false;

    double gamma_n() const { return static_cast<double>(d) / static_cast<double>(n); }
};

void validate(const FactorModelSpec& spec);

// ---------------------------------------------------------------------------
// Incomplete data: zero-filled values plus an observation mask.
// Invariant: !mask(i,j) implies values(i,j) == 0.
// ---------------------------------------------------------------------------

struct IncompleteMatrix {
    Matrix values;
    BoolMatrix mask;

    Index d() const { return values.rows(); }
    Index n() const { return values.cols(); }
    Index observed_count() const { return mask.count(); }
    double observed_fraction() const {
        return static_cast<double>(observed_count()) / (static_cast<double>(d()) * n());
    }

    static IncompleteMatrix fully_observed(Matrix x) {
        IncompleteMatrix out;
        out.mask = BoolMatrix::Constant(x.rows(), x.cols(), true);
        out.values = std::move(x);
        return out;
    }

    void validate() const;
};

}  // namespace mate
