#include "mate/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mate/parallel.hpp"
#include "mate/rng.hpp"

namespace mate {

namespace {

constexpr std::uint64_t kCalibrationStream = 0xCA11;
constexpr std::uint64_t kNullTStream = 0x7E57;

// Per-entry observation rates reduced to one vector along the blocked axis.
struct PatternRates {
    Vector row;   // empty unless feature-style
    Vector col;   // empty unless sample-style
};

PatternRates pattern_rates(const MissingnessSpec& pattern, Index d, Index n) {
    PatternRates out;
    if (const auto* h = std::get_if<Homogeneous>(&pattern)) {
        out.row = Vector::Constant(d, h->rate);
        return out;
    }
    if (const auto* f = std::get_if<FeatureBlocks>(&pattern)) {
        out.row = Vector(d);
        Index at = 0;
        for (std::size_t k = 0; k < f->sizes.size(); ++k)
            for (Index i = 0; i < f->sizes[k]; ++i) out.row[at++] = f->rates[k];
        return out;
    }
    const auto& s = std::get<SampleBlocks>(pattern);
    out.col = Vector(n);
    Index at = 0;
    for (std::size_t k = 0; k < s.sizes.size(); ++k)
        for (Index j = 0; j < s.sizes[k]; ++j) out.col[at++] = s.rates[k];
    return out;
}

// Masked unit-variance Gaussian draw; row rates or column rates.
Matrix null_draw(Index d, Index n, const PatternRates& rates, Rng& rng) {
    Matrix x = Matrix::Zero(d, n);
    if (rates.row.size() > 0) {
        for (Index j = 0; j < n; ++j)
            for (Index i = 0; i < d; ++i)
                if (rng.bernoulli(rates.row[i])) x(i, j) = rng.normal();
    } else {
        for (Index j = 0; j < n; ++j) {
            const double q = rates.col[j];
            for (Index i = 0; i < d; ++i)
                if (rng.bernoulli(q)) x(i, j) = rng.normal();
        }
    }
    return x;
}

int cap_count(const SpectrumResult& eigs, double tau, int r_max) {
    return std::min(threshold_count(eigs, tau, 0.0), r_max);
}

struct BlockInfo {
    std::vector<double> rates;
    std::vector<Index> sizes;
    Regime regime = Regime::homogeneous;
    double p1 = 0.0;  // size-weighted mean rate along the blocked axis
};

BlockInfo block_info(const MissingnessSpec& est, Index d, Index n) {
    BlockInfo out;
    if (const auto* h = std::get_if<Homogeneous>(&est)) {
        out.rates = {h->rate};
        out.sizes = {d};
        out.regime = Regime::homogeneous;
        out.p1 = h->rate;
        return out;
    }
    if (const auto* f = std::get_if<FeatureBlocks>(&est)) {
        out.rates = f->rates;
        out.sizes = f->sizes;
        out.regime = Regime::feature;
        double sum = 0.0;
        for (std::size_t k = 0; k < f->rates.size(); ++k) sum += f->rates[k] * f->sizes[k];
        out.p1 = sum / static_cast<double>(d);
        return out;
    }
    const auto& s = std::get<SampleBlocks>(est);
    out.rates = s.rates;
    out.sizes = s.sizes;
    out.regime = Regime::sample;
    double sum = 0.0;
    for (std::size_t k = 0; k < s.rates.size(); ++k) sum += s.rates[k] * s.sizes[k];
    out.p1 = sum / static_cast<double>(n);
    return out;
}

DiscreteMeasure blocks_measure(const BlockInfo& info, double scale) {
    DiscreteMeasure m;
    Index total = 0;
    for (Index s : info.sizes) total += s;
    for (std::size_t k = 0; k < info.rates.size(); ++k) {
        m.atoms.push_back(info.rates[k] * scale);
        m.weights.push_back(static_cast<double>(info.sizes[k]) / total);
    }
    // merge duplicate atoms so psi poles stay simple
    DiscreteMeasure merged;
    for (std::size_t k = 0; k < m.atoms.size(); ++k) {
        bool found = false;
        for (std::size_t l = 0; l < merged.atoms.size(); ++l) {
            if (std::abs(merged.atoms[l] - m.atoms[k]) < 1e-15 * merged.atoms[l]) {
                merged.weights[l] += m.weights[k];
                found = true;
                break;
            }
        }
        if (!found) {
            merged.atoms.push_back(m.atoms[k]);
            merged.weights.push_back(m.weights[k]);
        }
    }
    return merged;
}

}  // namespace

void MateConfig::validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("mate config: beta outside (0, 1)");
    if (monte_carlo_copies < 1) throw ParameterError("mate config: need at least one Monte Carlo copy");
    if (r_max < 1) throw ParameterError("mate config: r_max must be >= 1");
    if (max_iterations < 1) throw ParameterError("mate config: max_iterations must be >= 1");
}

int threshold_count(const SpectrumResult& eigs, double v, double eps) {
    const double tau = v + eps;
    int count = 0;
    for (Index i = 0; i < eigs.eigenvalues.size(); ++i)
        if (eigs.eigenvalues[i] > tau) ++count;
    return count;
}

double NullCalibration::upper_quantile(double beta) const {
    const auto m = static_cast<std::int64_t>(lambda1_sorted.size());
    if (m == 0) throw ParameterError("null calibration is empty");
    auto idx = static_cast<std::int64_t>(std::ceil((1.0 - beta) * static_cast<double>(m)));
    idx = std::clamp<std::int64_t>(idx, 1, m);
    return lambda1_sorted[static_cast<std::size_t>(idx - 1)];
}

NullCalibration simulate_null_calibration(const MissingnessSpec& pattern, Index d, Index n,
                                          const MateConfig& config, std::uint64_t seed) {
    config.validate();
    validate(pattern, d, n);
    const PatternRates rates = pattern_rates(pattern, d, n);
    const int m = config.monte_carlo_copies;
    NullCalibration cal;
    cal.lambda1_sorted.resize(m);
    parallel_for(m, [&](std::int64_t i) {
        Rng rng(split_seed(seed, kCalibrationStream, static_cast<std::uint64_t>(i)));
        cal.lambda1_sorted[i] = largest_cov_eig(null_draw(d, n, rates, rng));
    });
    std::sort(cal.lambda1_sorted.begin(), cal.lambda1_sorted.end());
    cal.mean = std::accumulate(cal.lambda1_sorted.begin(), cal.lambda1_sorted.end(), 0.0) / m;
    return cal;
}

double select_epsilon(const MissingnessSpec& pattern, Index d, Index n, double sigma2,
                      const MateConfig& config, std::uint64_t seed) {
    if (!(sigma2 > 0.0)) throw ParameterError("select_epsilon: sigma2 must be positive");
    const NullCalibration cal = simulate_null_calibration(pattern, d, n, config, seed);
    // null eigenvalues are exactly linear in sigma2
    return sigma2 * cal.epsilon(config.beta);
}

MomentEstimate moment_estimators_feature(double b1, double b2, std::span<const double> rates,
                                         std::span<const Index> sizes, double gamma) {
    if (!(b1 > 0.0)) throw ParameterError("moment estimators: b1 must be positive");
    if (rates.size() != sizes.size() || rates.empty())
        throw DimensionError("moment estimators: rates/sizes mismatch");
    double total = 0.0, p1 = 0.0, p2 = 0.0;
    for (std::size_t k = 0; k < rates.size(); ++k) {
        total += static_cast<double>(sizes[k]);
        p1 += rates[k] * sizes[k];
        p2 += rates[k] * rates[k] * sizes[k];
    }
    p1 /= total;
    p2 /= total;
    MomentEstimate out;
    out.sigma2 = b1 / p1;
    const double den = (b2 / (b1 * b1) - gamma) * p1 * p1 - p2;
    if (den <= 0.0 || !std::isfinite(den)) {
        out.theta = kInf;
        out.isotropic_sentinel = true;
        return out;
    }
    out.theta = p2 / den;
    if (!(out.theta > 0.0) || !std::isfinite(out.theta)) {
        out.theta = kInf;
        out.isotropic_sentinel = true;
    }
    return out;
}

MomentEstimate moment_estimators_sample(double b1, double b2, std::span<const double> rates,
                                        std::span<const Index> sizes, double gamma) {
    if (!(b1 > 0.0)) throw ParameterError("moment estimators: b1 must be positive");
    if (rates.size() != sizes.size() || rates.empty())
        throw DimensionError("moment estimators: rates/sizes mismatch");
    double total = 0.0, q1 = 0.0, q2 = 0.0;
    for (std::size_t k = 0; k < rates.size(); ++k) {
        total += static_cast<double>(sizes[k]);
        q1 += rates[k] * sizes[k];
        q2 += rates[k] * rates[k] * sizes[k];
    }
    q1 /= total;
    q2 /= total;
    MomentEstimate out;
    out.sigma2 = b1 / q1;
    const double den = (b2 / (b1 * b1) - 1.0) * q1 * q1 - gamma * q2;
    if (den <= 0.0 || !std::isfinite(den)) {
        out.theta = kInf;
        out.isotropic_sentinel = true;
        return out;
    }
    out.theta = q1 * q1 / den;
    if (!(out.theta > 0.0) || !std::isfinite(out.theta)) {
        out.theta = kInf;
        out.isotropic_sentinel = true;
    }
    return out;
}

double null_quantile_T(const Vector& feature_rates, double theta, double sigma2, Index n,
                       const MateConfig& config, std::uint64_t seed) {
    config.validate();
    if (!(sigma2 > 0.0)) throw ParameterError("null_quantile_T: sigma2 must be positive");
    const bool isotropic = !std::isfinite(theta);
    if (!isotropic && !(theta > 0.0))
        throw ParameterError("null_quantile_T: theta must be positive or the isotropic sentinel");
    const Index d = feature_rates.size();
    const int m = config.monte_carlo_copies;
    std::vector<double> l1(m);
    parallel_for(m, [&](std::int64_t i) {
        Rng rng(split_seed(seed, kNullTStream, static_cast<std::uint64_t>(i)));
        Vector sd(d);
        if (isotropic) {
            sd.setConstant(std::sqrt(sigma2));
        } else {
            const double scale = sigma2 / theta;
            for (Index r = 0; r < d; ++r) sd[r] = std::sqrt(rng.gamma(theta, scale));
        }
        Matrix x = Matrix::Zero(d, n);
        for (Index j = 0; j < n; ++j)
            for (Index r = 0; r < d; ++r)
                if (rng.bernoulli(feature_rates[r])) x(r, j) = sd[r] * rng.normal();
        l1[i] = largest_cov_eig(x);
    });
    std::sort(l1.begin(), l1.end());
    NullCalibration cal;
    cal.lambda1_sorted = std::move(l1);
    return cal.upper_quantile(config.beta);
}

// ---------------------------------------------------------------------------
// Isotropic MATE.
//
// The noise level is driven to a fixed point of
//   sigma2(r) = (trimmed-moment inversion + spike-deflated trace inversion)/2,
// the two bracketing the truth from below (trimming ignores the bulk mass the
// detected spikes displaced) and above (finite-sample spike positions sit
// slightly under their limits). The spectrum is then thresholded at the
// matched-null (1-beta)-quantile scaled by sigma2, which equals the
// asymptotic edge plus a margin absorbing the finite-sample edge offset.
// ---------------------------------------------------------------------------

MateResult mate_isotropic(const IncompleteMatrix& x, const Grouping& grouping,
                          const MateConfig& config, std::uint64_t seed) {
    config.validate();
    x.validate();
    const Index d = x.d(), n = x.n();
    const int r_max = config.r_max;
    if (d <= r_max + 1)
        throw DimensionError("mate_isotropic: need d > r_max + 1");
    const double gamma_n = static_cast<double>(d) / static_cast<double>(n);

    const MissingnessSpec est = estimate_rates(x, grouping);
    const BlockInfo blocks = block_info(est, d, n);
    for (double r : blocks.rates)
        if (r <= 0.0)
            throw ParameterError("mate_isotropic: a block is fully missing; its rate is unidentifiable");

    const SpectrumResult spectrum = sample_cov_eigs(x);
    const double trace = spectrum.eigenvalues.sum();
    if (!(trace > 0.0)) {
        MateResult null_out;
        null_out.regime = blocks.regime;
        null_out.iterations = 1;
        return null_out;
    }

    // Matched null at unit variance; per-feature (per-sample) granularity.
    std::shared_ptr<const NullCalibration> cal = config.calibration;
    if (!cal) {
        MissingnessSpec pattern;
        if (blocks.regime == Regime::sample) {
            const Vector qr = per_sample_rates(x);
            pattern = SampleBlocks{{qr.data(), qr.data() + n}, std::vector<Index>(n, 1)};
        } else {
            const Vector pr = per_feature_rates(x);
            pattern = FeatureBlocks{{pr.data(), pr.data() + d}, std::vector<Index>(d, 1)};
        }
        cal = std::make_shared<NullCalibration>(
            simulate_null_calibration(pattern, d, n, config, split_seed(seed, 0xE5)));
    }
    const double q1_unit = cal->upper_quantile(config.beta);

    const auto edge_at = [&](double s2) -> EdgeResult {
        switch (blocks.regime) {
            case Regime::homogeneous:
                return mp_edge(blocks.rates[0], s2, gamma_n);
            case Regime::feature:
                return feature_edge(gamma_n, blocks_measure(blocks, s2));
            default:
                return sample_edge(gamma_n, blocks_measure(blocks, 1.0), s2);
        }
    };
    const auto tau_at = [&](double s2, const EdgeResult* edge) {
        if (config.epsilon_override) {
            const EdgeResult e = edge ? *edge : edge_at(s2);
            return e.lambda_plus + *config.epsilon_override;
        }
        return s2 * q1_unit;
    };
    const auto sigma2_trimmed = [&](int r) {
        return trimmed_moments(spectrum, r).first / blocks.p1;
    };
    const auto sigma2_refined = [&](int r) -> double {
        const double s2t = sigma2_trimmed(r);
        if (!(s2t > 0.0) || r == 0) return s2t;
        double spike_mass = 0.0;
        if (blocks.regime == Regime::sample) {
            const EdgeResult e = edge_at(s2t);
            const DiscreteMeasure mq = blocks_measure(blocks, 1.0);
            for (int i = 0; i < r; ++i) {
                const double y = spectrum.eigenvalues[i];
                spike_mass += y > e.lambda_plus * (1.0 + 1e-9)
                                  ? -1.0 / sample_s2_at(y, gamma_n, mq, s2t)
                                  : e.population_threshold();
            }
            const double s2d = (trace / blocks.p1 - spike_mass) / static_cast<double>(d - r);
            return 0.5 * (s2t + s2d);
        }
        const DiscreteMeasure m = blocks_measure(blocks, s2t);
        const EdgeResult e = blocks.regime == Regime::homogeneous
                                 ? mp_edge(blocks.rates[0], s2t, gamma_n)
                                 : feature_edge(gamma_n, m);
        EdgeResult e_psi = e;
        if (blocks.regime == Regime::homogeneous) e_psi = feature_edge(gamma_n, m);
        for (int i = 0; i < r; ++i)
            spike_mass += psi_feature_inverse(spectrum.eigenvalues[i], gamma_n, m, e_psi);
        const double s2d = (trace - spike_mass) / (blocks.p1 * static_cast<double>(d - r));
        return 0.5 * (s2t + s2d);
    };

    double s2 = sigma2_trimmed(r_max);
    if (!(s2 > 0.0)) {
        MateResult out;
        out.regime = blocks.regime;
        out.iterations = 1;
        return out;
    }
    int r = cap_count(spectrum, tau_at(s2, nullptr), r_max);
    int r_prev = -1;
    int iterations = 1;
    bool converged = false;
    for (int t = 0; t < config.max_iterations; ++t) {
        const double s2_new = sigma2_refined(r);
        const int r_new = cap_count(spectrum, tau_at(s2_new, nullptr), r_max);
        ++iterations;
        if (r_new == r) {
            s2 = s2_new;
            converged = true;
            break;
        }
        if (r_new == r_prev) {
            // two-cycle: resolve to the smaller count
            r = std::min(r, r_new);
            s2 = sigma2_refined(r);
            converged = false;
            break;
        }
        r_prev = r;
        r = r_new;
        s2 = s2_new;
    }

    const EdgeResult final_edge = edge_at(s2);
    const double tau = tau_at(s2, &final_edge);
    MateResult out;
    out.r_hat = r;
    out.v = final_edge.lambda_plus;
    out.epsilon_n = tau - final_edge.lambda_plus;
    out.sigma2_hat = s2;
    out.theta_hat = kInf;
    out.iterations = iterations;
    out.regime = blocks.regime;
    out.converged = converged;
    return out;
}

MateResult mate_anisotropic(const IncompleteMatrix& x, const MateConfig& config,
                            std::uint64_t seed) {
    config.validate();
    x.validate();
    const Index d = x.d(), n = x.n();
    const int r_max = config.r_max;
    if (d <= r_max + 1) throw DimensionError("mate_anisotropic: need d > r_max + 1");
    const double gamma_n = static_cast<double>(d) / static_cast<double>(n);

    const Vector rates = per_feature_rates(x);
    const std::vector<double> rates_v(rates.data(), rates.data() + d);
    const std::vector<Index> ones(d, 1);
    const SpectrumResult spectrum = sample_cov_eigs(x);

    // Robustness margin from the isotropic null at the maximally trimmed
    // noise-level estimate.
    double p1 = rates.mean();
    if (!(p1 > 0.0)) throw ParameterError("mate_anisotropic: the matrix is entirely missing");
    const double s2_init = trimmed_moments(spectrum, r_max + 1).first / p1;
    double eps;
    if (config.epsilon_override) {
        eps = *config.epsilon_override;
    } else if (config.calibration) {
        eps = s2_init * config.calibration->epsilon(config.beta);
    } else {
        eps = select_epsilon(FeatureBlocks{rates_v, ones}, d, n, std::max(s2_init, 1e-12),
                             config, split_seed(seed, 0xE5));
    }

    int r = r_max + 1;
    int r_prev = -1;
    bool converged = false;
    int iterations = 0;
    MomentEstimate me;
    double t_beta = kInf;
    for (int t = 0; t < config.max_iterations; ++t) {
        const auto [b1, b2] = trimmed_moments(spectrum, r);
        if (!(b1 > 0.0)) break;  // degenerate spectrum; keep last iterate
        me = moment_estimators_feature(b1, b2, rates_v, ones, gamma_n);
        t_beta = null_quantile_T(rates, me.theta, me.sigma2, n, config,
                                 split_seed(seed, 0xA1, static_cast<std::uint64_t>(t)));
        ++iterations;
        int count = 0;
        for (int i = 0; i < r_max; ++i)
            if (spectrum.eigenvalues[i] > t_beta + eps) ++count;
        if (count == r) {
            converged = true;
            break;
        }
        if (count == r_prev) {
            r = std::min(r, count);
            const auto [c1, c2] = trimmed_moments(spectrum, r);
            if (c1 > 0.0) me = moment_estimators_feature(c1, c2, rates_v, ones, gamma_n);
            converged = false;
            break;
        }
        r_prev = r;
        r = count;
    }

    MateResult out;
    out.r_hat = std::min(r, r_max);
    out.v = t_beta;
    out.epsilon_n = eps;
    out.theta_hat = me.theta;
    out.sigma2_hat = me.sigma2;
    out.iterations = iterations;
    out.regime = Regime::anisotropic;
    out.converged = converged;
    return out;
}

int baseline_m_er(const SpectrumResult& eigs, double p_hat, int r_max) {
    if (!(p_hat > 0.0)) throw ParameterError("m_er: p_hat must be positive");
    if (r_max < 1 || eigs.eigenvalues.size() <= r_max)
        throw ParameterError("m_er: r_max outside the spectrum");
    if (!(eigs.eigenvalues[r_max] > 0.0))
        throw ParameterError("m_er: zero eigenvalue inside the ratio window");
    int best_i = 1;
    double best = -kInf;
    for (int i = 1; i <= r_max; ++i) {
        const double ratio = eigs.eigenvalues[i - 1] / eigs.eigenvalues[i];
        if (ratio > best) {
            best = ratio;
            best_i = i;
        }
    }
    return best_i;
}

int baseline_m_gr(const SpectrumResult& eigs, double p_hat, int r_max) {
    if (!(p_hat > 0.0)) throw ParameterError("m_gr: p_hat must be positive");
    const Index d = eigs.eigenvalues.size();
    if (r_max < 1 || d <= r_max + 1) throw ParameterError("m_gr: r_max outside the spectrum");
    // V_i = sum_{j > i} lambda_j (the 1/p^2 rescale cancels in the ratios)
    std::vector<double> tail(d + 1, 0.0);
    for (Index i = d - 1; i >= 0; --i) tail[i] = tail[i + 1] + eigs.eigenvalues[i];
    if (!(tail[r_max + 1] > 0.0))
        throw ParameterError("m_gr: vanishing tail sum inside the ratio window");
    int best_i = 1;
    double best = -kInf;
    for (int i = 1; i <= r_max; ++i) {
        const double num = std::log(tail[i - 1] / tail[i]);
        const double den = std::log(tail[i] / tail[i + 1]);
        const double gr = num / den;
        if (gr > best) {
            best = gr;
            best_i = i;
        }
    }
    return best_i;
}

int baseline_m_ed(const SpectrumResult& eigs, double p_hat, int r_max) {
    if (!(p_hat > 0.0)) throw ParameterError("m_ed: p_hat must be positive");
    const Index d = eigs.eigenvalues.size();
    if (d < r_max + 5) throw ParameterError("m_ed: spectrum shorter than the regression window");
    const double scale = 1.0 / (p_hat * p_hat);
    Vector w = eigs.eigenvalues * scale;

    const Index d_min = std::min<Index>(d, eigs.n);
    int r_hat = -1;
    int j = r_max + 1;  // 1-based start of the regression window
    for (int round = 0; round < 10; ++round) {
        j = std::min<int>(j, static_cast<int>(d) - 4);
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (int t = 0; t < 5; ++t) {
            const double xv = std::pow(static_cast<double>(j + t - 1), 2.0 / 3.0);
            const double yv = w[j + t - 1];
            sx += xv;
            sy += yv;
            sxx += xv * xv;
            sxy += xv * yv;
        }
        const double var = sxx - sx * sx / 5.0;
        double slope = (sxy - sx * sy / 5.0) / var;
        double delta0 = 2.0 * std::abs(slope);
        if (!std::isfinite(delta0))
            delta0 = (w[0] - w[d_min - 1]) / static_cast<double>(d_min);  // degenerate fallback
        int r_new = 0;
        for (int i = r_max; i >= 1; --i) {
            const double diff = w[i - 1] - w[i];
            if (diff >= delta0 && diff > 0.0) {
                r_new = i;
                break;
            }
        }
        if (r_new == r_hat) break;
        r_hat = r_new;
        j = r_hat + 1;
    }
    return std::max(r_hat, 0);
}

}  // namespace mate
