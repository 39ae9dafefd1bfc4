#include "mate/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mate/rng.hpp"

namespace mate {

namespace {

// Substream tags so the noise draw, the rotation and the Y draw are
// independent; `rotate` must not perturb the Y stream.
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kRotationStream = 2;
constexpr std::uint64_t kValueStream = 3;
constexpr std::uint64_t kMaskStream = 4;

void check_blocks(const std::vector<double>& rates, const std::vector<Index>& sizes,
                  Index total, const char* what) {
    if (rates.empty() || rates.size() != sizes.size())
        throw DimensionError(std::string(what) + ": rates and sizes must be nonempty and equal length");
    Index sum = 0;
    for (std::size_t k = 0; k < rates.size(); ++k) {
        if (!(rates[k] > 0.0 && rates[k] <= 1.0))
            throw ParameterError(std::string(what) + ": rate " + std::to_string(rates[k]) +
                                 " outside (0, 1]");
        if (sizes[k] <= 0) throw DimensionError(std::string(what) + ": nonpositive block size");
        sum += sizes[k];
    }
    if (sum != total)
        throw DimensionError(std::string(what) + ": block sizes sum to " + std::to_string(sum) +
                             ", expected " + std::to_string(total));
}

bool is_missing_token(const std::string& cell, const std::string& token) {
    if (cell.empty() || cell == token || cell == "NA" || cell == "NaN" || cell == "nan") return true;
    return false;
}

std::string trim_ws(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void validate(const NoiseSpec& noise) {
    if (const auto* iso = std::get_if<Isotropic>(&noise)) {
        if (!(iso->sigma2 > 0.0)) throw ParameterError("isotropic noise: sigma2 must be positive");
        return;
    }
    const auto& g = std::get<GammaDiagonal>(noise);
    if (!(g.sigma2 > 0.0)) throw ParameterError("gamma noise: sigma2 must be positive");
    if (!(g.theta > 0.0)) throw ParameterError("gamma noise: theta must be positive");
    if (!(g.t1 >= 0.0 && g.t1 < g.t2)) throw ParameterError("gamma noise: need 0 <= t1 < t2");
}

double mean_noise_variance(const NoiseSpec& noise) {
    if (const auto* iso = std::get_if<Isotropic>(&noise)) return iso->sigma2;
    return std::get<GammaDiagonal>(noise).sigma2;
}

void validate(const MissingnessSpec& spec, Index d, Index n) {
    if (const auto* h = std::get_if<Homogeneous>(&spec)) {
        if (!(h->rate > 0.0 && h->rate <= 1.0))
            throw ParameterError("homogeneous rate outside (0, 1]");
        return;
    }
    if (const auto* f = std::get_if<FeatureBlocks>(&spec)) {
        check_blocks(f->rates, f->sizes, d, "feature blocks");
        return;
    }
    const auto& s = std::get<SampleBlocks>(spec);
    check_blocks(s.rates, s.sizes, n, "sample blocks");
}

double rate_at(const MissingnessSpec& spec, Index i, Index j) {
    if (const auto* h = std::get_if<Homogeneous>(&spec)) return h->rate;
    if (const auto* f = std::get_if<FeatureBlocks>(&spec)) {
        Index upto = 0;
        for (std::size_t k = 0; k < f->sizes.size(); ++k) {
            upto += f->sizes[k];
            if (i < upto) return f->rates[k];
        }
        throw DimensionError("feature blocks do not cover row " + std::to_string(i));
    }
    const auto& s = std::get<SampleBlocks>(spec);
    Index upto = 0;
    for (std::size_t k = 0; k < s.sizes.size(); ++k) {
        upto += s.sizes[k];
        if (j < upto) return s.rates[k];
    }
    throw DimensionError("sample blocks do not cover column " + std::to_string(j));
}

double overall_rate(const MissingnessSpec& spec, Index d, Index n) {
    if (const auto* h = std::get_if<Homogeneous>(&spec)) return h->rate;
    if (const auto* f = std::get_if<FeatureBlocks>(&spec)) {
        double sum = 0.0;
        for (std::size_t k = 0; k < f->sizes.size(); ++k) sum += f->rates[k] * f->sizes[k];
        return sum / static_cast<double>(d);
    }
    const auto& s = std::get<SampleBlocks>(spec);
    double sum = 0.0;
    for (std::size_t k = 0; k < s.sizes.size(); ++k) sum += s.rates[k] * s.sizes[k];
    return sum / static_cast<double>(n);
}

void validate(const FactorModelSpec& spec) {
    if (spec.d < 1 || spec.n < 1) throw DimensionError("factor model: need d >= 1 and n >= 1");
    if (static_cast<Index>(spec.spikes.size()) >= spec.d)
        throw DimensionError("factor model: spike count must be smaller than d");
    double prev = kInf;
    for (double s : spec.spikes) {
        if (!(s > 0.0)) throw ParameterError("factor model: spikes must be positive");
        if (s > prev) throw ParameterError("factor model: spikes must be nonincreasing");
        prev = s;
    }
    validate(spec.noise);
}

void IncompleteMatrix::validate() const {
    if (values.rows() != mask.rows() || values.cols() != mask.cols())
        throw DimensionError("incomplete matrix: values and mask shapes differ");
    for (Index j = 0; j < values.cols(); ++j)
        for (Index i = 0; i < values.rows(); ++i)
            if (!mask(i, j) && values(i, j) != 0.0)
                throw ParameterError("incomplete matrix: nonzero value at unobserved entry");
}

Matrix generate_complete(const FactorModelSpec& spec, std::uint64_t seed) {
    validate(spec);
    const Index d = spec.d, n = spec.n;
    const Index r = static_cast<Index>(spec.spikes.size());

    Vector lambda(d);
    for (Index i = 0; i < r; ++i) lambda[i] = spec.spikes[i];
    if (const auto* iso = std::get_if<Isotropic>(&spec.noise)) {
        lambda.segment(r, d - r).setConstant(iso->sigma2);
    } else {
        const auto& g = std::get<GammaDiagonal>(spec.noise);
        Rng noise_rng(split_seed(seed, kNoiseStream));
        const double scale = g.sigma2 / g.theta;
        const bool truncated = g.t1 > 0.0 || std::isfinite(g.t2);
        for (Index i = r; i < d; ++i)
            lambda[i] = truncated
                            ? noise_rng.truncated_gamma(g.theta, scale, g.sigma2 * g.t1, g.sigma2 * g.t2)
                            : noise_rng.gamma(g.theta, scale);
    }

    Rng value_rng(split_seed(seed, kValueStream));
    Matrix x(d, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < d; ++i) x(i, j) = value_rng.normal();
    x.array().colwise() *= lambda.array().sqrt();

    if (spec.rotate) {
        Rng rot_rng(split_seed(seed, kRotationStream));
        Matrix g(d, d);
        for (Index j = 0; j < d; ++j)
            for (Index i = 0; i < d; ++i) g(i, j) = rot_rng.normal();
        Eigen::HouseholderQR<Matrix> qr(g);
        Matrix q = qr.householderQ();
        const Vector diag = qr.matrixQR().diagonal();
        for (Index j = 0; j < d; ++j)
            if (diag[j] < 0.0) q.col(j) = -q.col(j);
        x = q * x;
    }
    return x;
}

IncompleteMatrix apply_mcar(const Matrix& x, const MissingnessSpec& spec, std::uint64_t seed) {
    validate(spec, x.rows(), x.cols());
    Rng rng(split_seed(seed, kMaskStream));
    IncompleteMatrix out;
    out.values = Matrix::Zero(x.rows(), x.cols());
    out.mask = BoolMatrix::Constant(x.rows(), x.cols(), false);
    for (Index j = 0; j < x.cols(); ++j) {
        for (Index i = 0; i < x.rows(); ++i) {
            if (rng.bernoulli(rate_at(spec, i, j))) {
                out.mask(i, j) = true;
                out.values(i, j) = x(i, j);
            }
        }
    }
    return out;
}

IncompleteMatrix ingest_csv(const std::string& path, const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    std::vector<std::vector<double>> vals;
    std::vector<std::vector<bool>> obs;
    std::string line;
    Index row = 0;
    bool first = true;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        if (first && opts.skip_header) {
            first = false;
            continue;
        }
        first = false;
        if (trim_ws(line).empty()) continue;
        std::vector<double> v;
        std::vector<bool> o;
        std::stringstream ss(line);
        std::string cell;
        Index col = 0;
        while (std::getline(ss, cell, ',')) {
            cell = trim_ws(cell);
            if (is_missing_token(cell, opts.missing_token)) {
                v.push_back(0.0);
                o.push_back(false);
            } else {
                double parsed = 0.0;
                const char* begin = cell.data();
                const char* end = begin + cell.size();
                auto [ptr, ec] = std::from_chars(begin, end, parsed);
                if (ec != std::errc() || ptr != end)
                    throw IngestError("unparseable cell '" + cell + "' at row " +
                                      std::to_string(row) + ", column " + std::to_string(col));
                if (std::isnan(parsed)) {
                    v.push_back(0.0);
                    o.push_back(false);
                } else {
                    v.push_back(parsed);
                    o.push_back(true);
                }
            }
            ++col;
        }
        if (!line.empty() && line.back() == ',') {  // trailing empty cell
            v.push_back(0.0);
            o.push_back(false);
        }
        if (vals.empty()) {
            width = v.size();
        } else if (v.size() != width) {
            throw IngestError("ragged row " + std::to_string(row) + ": got " +
                              std::to_string(v.size()) + " cells, expected " + std::to_string(width));
        }
        vals.push_back(std::move(v));
        obs.push_back(std::move(o));
        ++row;
    }
    if (vals.empty()) throw IngestError(path + " contains no data rows");

    const Index rows = static_cast<Index>(vals.size());
    const Index cols = static_cast<Index>(width);
    IncompleteMatrix out;
    if (!opts.transpose) {
        out.values = Matrix::Zero(rows, cols);
        out.mask = BoolMatrix::Constant(rows, cols, false);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) {
                out.values(i, j) = vals[i][j];
                out.mask(i, j) = obs[i][j];
            }
    } else {
        out.values = Matrix::Zero(cols, rows);
        out.mask = BoolMatrix::Constant(cols, rows, false);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) {
                out.values(j, i) = vals[i][j];
                out.mask(j, i) = obs[i][j];
            }
    }
    return out;
}

void write_csv(const std::string& path, const IncompleteMatrix& x, const std::string& missing_token) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write " + path);
    out.precision(17);
    for (Index i = 0; i < x.d(); ++i) {
        for (Index j = 0; j < x.n(); ++j) {
            if (j) out << ',';
            if (x.mask(i, j))
                out << x.values(i, j);
            else
                out << missing_token;
        }
        out << '\n';
    }
}

IncompleteMatrix standardize(const IncompleteMatrix& x) {
    x.validate();
    IncompleteMatrix out = x;
    for (Index i = 0; i < x.d(); ++i) {
        Index count = 0;
        double sum = 0.0;
        for (Index j = 0; j < x.n(); ++j)
            if (x.mask(i, j)) {
                ++count;
                sum += x.values(i, j);
            }
        if (count < 2)
            throw DegenerateFeatureError("feature row " + std::to_string(i) +
                                         " has fewer than 2 observed entries");
        const double mean = sum / count;
        double ss = 0.0;
        for (Index j = 0; j < x.n(); ++j)
            if (x.mask(i, j)) {
                const double dlt = x.values(i, j) - mean;
                ss += dlt * dlt;
            }
        const double var = ss / (count - 1);
        if (!(var > 0.0))
            throw DegenerateFeatureError("feature row " + std::to_string(i) + " is constant");
        const double inv_sd = 1.0 / std::sqrt(var);
        for (Index j = 0; j < x.n(); ++j)
            if (x.mask(i, j)) out.values(i, j) = (x.values(i, j) - mean) * inv_sd;
    }
    return out;
}

Vector per_feature_rates(const IncompleteMatrix& x) {
    Vector rates(x.d());
    for (Index i = 0; i < x.d(); ++i) {
        Index count = 0;
        for (Index j = 0; j < x.n(); ++j) count += x.mask(i, j);
        rates[i] = static_cast<double>(count) / x.n();
    }
    return rates;
}

Vector per_sample_rates(const IncompleteMatrix& x) {
    Vector rates(x.n());
    for (Index j = 0; j < x.n(); ++j) {
        Index count = 0;
        for (Index i = 0; i < x.d(); ++i) count += x.mask(i, j);
        rates[j] = static_cast<double>(count) / x.d();
    }
    return rates;
}

MissingnessSpec estimate_rates(const IncompleteMatrix& x, const Grouping& grouping) {
    if (grouping.kind == Grouping::Kind::homogeneous)
        return Homogeneous{x.observed_fraction()};

    const bool feature = grouping.kind == Grouping::Kind::feature_blocks;
    const Index total = feature ? x.d() : x.n();
    Index sum = 0;
    for (Index s : grouping.sizes) sum += s;
    if (sum != total)
        throw DimensionError("grouping sizes sum to " + std::to_string(sum) + ", expected " +
                             std::to_string(total));

    std::vector<double> rates;
    rates.reserve(grouping.sizes.size());
    Index start = 0;
    for (Index size : grouping.sizes) {
        Index count = 0;
        if (feature) {
            for (Index i = start; i < start + size; ++i)
                for (Index j = 0; j < x.n(); ++j) count += x.mask(i, j);
            rates.push_back(static_cast<double>(count) / (static_cast<double>(size) * x.n()));
        } else {
            for (Index j = start; j < start + size; ++j)
                for (Index i = 0; i < x.d(); ++i) count += x.mask(i, j);
            rates.push_back(static_cast<double>(count) / (static_cast<double>(size) * x.d()));
        }
        start += size;
    }
    if (feature) return FeatureBlocks{std::move(rates), grouping.sizes};
    return SampleBlocks{std::move(rates), grouping.sizes};
}

}  // namespace mate
