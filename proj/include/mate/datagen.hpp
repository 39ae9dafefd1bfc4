#pragma once

#include <string>

#include "mate/types.hpp"

namespace mate {

/// Draws X = Sigma^{1/2} Y for the factor model. Deterministic given
/// (spec, seed); the noise-diagonal draw, the optional rotation and the Y
/// draw use independent substreams so `rotate` does not perturb Y.
Matrix generate_complete(const FactorModelSpec& spec, std::uint64_t seed);

/// Observes each entry independently at its block rate, zeroing the rest.
IncompleteMatrix apply_mcar(const Matrix& x, const MissingnessSpec& spec, std::uint64_t seed);

struct CsvOptions {
    std::string missing_token = "NA";
    bool skip_header = false;
    bool transpose = false;  // set when samples are in rows
};

/// Reads a rectangular numeric CSV; rows are features, columns samples.
/// Cells equal to the missing token (or empty, or "NA"/"NaN") become
/// unobserved. Throws IngestError with the row/column of the offence.
IncompleteMatrix ingest_csv(const std::string& path, const CsvOptions& opts = {});

/// Writes values as CSV with `missing_token` in unobserved cells.
void write_csv(const std::string& path, const IncompleteMatrix& x,
               const std::string& missing_token = "NA");

/// Per-feature zero-mean unit-variance rescaling over observed entries only
/// (n-1 denominator). Throws DegenerateFeatureError naming the first bad row.
IncompleteMatrix standardize(const IncompleteMatrix& x);

/// Observed fraction of each feature row.
Vector per_feature_rates(const IncompleteMatrix& x);

/// Observed fraction of each sample column.
Vector per_sample_rates(const IncompleteMatrix& x);

/// Grouping shape requested for rate estimation.
struct Grouping {
    enum class Kind { homogeneous, feature_blocks, sample_blocks };
    Kind kind = Kind::homogeneous;
    std::vector<Index> sizes;  // used by the block kinds

    static Grouping homogeneous() { return {Kind::homogeneous, {}}; }
    static Grouping feature(std::vector<Index> sizes) { return {Kind::feature_blocks, std::move(sizes)}; }
    static Grouping sample(std::vector<Index> sizes) { return {Kind::sample_blocks, std::move(sizes)}; }
    /// One block per feature row (Algorithm-style per-feature rates).
    static Grouping per_feature(Index d) { return feature(std::vector<Index>(d, 1)); }
    static Grouping per_sample(Index n) { return sample(std::vector<Index>(n, 1)); }
};

/// Mask-count rates at the requested granularity.
MissingnessSpec estimate_rates(const IncompleteMatrix& x, const Grouping& grouping);

}  // namespace mate
