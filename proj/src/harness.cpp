#include "mate/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mate/parallel.hpp"
#include "mate/rng.hpp"

namespace mate {

namespace {

double elapsed_seconds(const std::chrono::steady_clock::time_point& from) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
}

std::vector<double> shifted(std::initializer_list<double> base, double shift) {
    std::vector<double> out;
    for (double b : base) out.push_back(b + shift);
    return out;
}

}  // namespace

std::string to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::mate: return "MATE";
        case EstimatorKind::m_ed: return "M-ED";
        case EstimatorKind::m_gr: return "M-GR";
        case EstimatorKind::m_er: return "M-ER";
    }
    return "?";
}

EstimatorKind estimator_from_string(const std::string& name) {
    std::string low;
    for (char c : name) low.push_back(static_cast<char>(std::tolower(c)));
    if (low == "mate") return EstimatorKind::mate;
    if (low == "m-ed" || low == "med" || low == "m_ed") return EstimatorKind::m_ed;
    if (low == "m-gr" || low == "mgr" || low == "m_gr") return EstimatorKind::m_gr;
    if (low == "m-er" || low == "mer" || low == "m_er") return EstimatorKind::m_er;
    throw ParameterError("unknown estimator '" + name + "'");
}

// The isotropic models place the listed factor strengths on top of unit
// noise (so every listed factor is an actual spike of Sigma); the Gamma
// models carry the strengths separately and the harness aligns them with the
// largest noise variances at generation time.
FactorModelSpec make_model(int id, Index d, Index n) {
    FactorModelSpec spec;
    spec.d = d;
    spec.n = n;
    switch (id) {
        case 1: spec.spikes = shifted({3.0, 2.5, 2.0, 1.5, 1.1}, 1.0); break;
        case 2: spec.spikes = shifted({3.5, 3.0, 2.5, 2.0, 1.3}, 1.0); break;
        case 3: spec.spikes = shifted({3.5, 3.0, 2.5, 2.0, 1.6}, 1.0); break;
        case 4:
            spec.noise = GammaDiagonal{3.0, 1.0};
            break;
        case 5:
            spec.spikes = {3.5, 3.0, 2.4};
            spec.noise = GammaDiagonal{3.0, 1.0};
            break;
        case 6: spec.spikes = shifted({3.5, 3.0, 2.5, 2.2, 1.8}, 1.0); break;
        case 7: spec.spikes = shifted({4.5, 4.0, 3.5, 2.8, 2.2}, 1.0); break;
        case 8: spec.spikes = shifted({4.5, 4.0, 3.5, 3.0, 2.5}, 1.0); break;
        default:
            throw ParameterError("model id " + std::to_string(id) + " outside 1..8");
    }
    return spec;
}

int model_true_rank(int id) {
    switch (id) {
        case 4: return 0;
        case 5: return 3;
        default: return 5;
    }
}

bool model_is_anisotropic(int id) { return id == 4 || id == 5; }

namespace {

// Data for one replication. Gamma models with spikes align the factor
// directions with the largest noise variances (lambda_i = strength_i +
// i-th largest draw); otherwise the model spec is generated as-is.
Matrix generate_setting(const SimulationSetting& s, std::uint64_t seed) {
    const auto* g = std::get_if<GammaDiagonal>(&s.model.noise);
    if (!s.anisotropic || !g || s.model.spikes.empty())
        return generate_complete(s.model, seed);

    const Index d = s.model.d, n = s.model.n;
    const Index r = static_cast<Index>(s.model.spikes.size());
    Rng noise_rng(split_seed(seed, 1));
    Vector lambda(d);
    const double scale = g->sigma2 / g->theta;
    for (Index i = 0; i < d; ++i) lambda[i] = noise_rng.gamma(g->theta, scale);
    std::sort(lambda.data(), lambda.data() + d, std::greater<double>());
    for (Index i = 0; i < r; ++i) lambda[i] += s.model.spikes[i];

    Rng value_rng(split_seed(seed, 3));
    Matrix x(d, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < d; ++i) x(i, j) = value_rng.normal();
    x.array().colwise() *= lambda.array().sqrt();
    return x;
}

struct CellStats {
    std::vector<int> values;
    double seconds = 0.0;
    int failures = 0;
};

ReportRow aggregate(const std::string& label, const std::string& est, const CellStats& cell,
                    int true_r, int reps) {
    ReportRow row;
    row.label = label;
    row.estimator = est;
    row.reps = reps;
    row.failures = cell.failures;
    row.seconds = cell.seconds;
    if (!cell.values.empty()) {
        double sum = 0.0, sq = 0.0;
        int under = 0, over = 0;
        for (int v : cell.values) {
            sum += v;
            const double diff = v - true_r;
            sq += diff * diff;
            if (v < true_r) ++under;
            if (v > true_r) ++over;
        }
        const double m = static_cast<double>(cell.values.size());
        row.mean = sum / m;
        row.mse = sq / m;
        row.under_rate = under / m;
        row.over_rate = over / m;
    }
    return row;
}

}  // namespace

SimulationReport run_simulation(const ExperimentConfig& config) {
    if (config.reps < 1) throw ParameterError("run_simulation: reps must be >= 1");
    if (config.settings.empty()) throw ParameterError("run_simulation: no settings");
    SimulationReport report;

    for (std::size_t si = 0; si < config.settings.size(); ++si) {
        const SimulationSetting& setting = config.settings[si];
        validate(setting.model);
        validate(setting.missing, setting.model.d, setting.model.n);

        // Null calibration once per setting (the pattern is common to all
        // replications); shared by every MATE call below.
        MateConfig mate_cfg = config.mate;
        const bool runs_mate = std::find(config.estimators.begin(), config.estimators.end(),
                                         EstimatorKind::mate) != config.estimators.end();
        if (runs_mate && !mate_cfg.calibration && !setting.anisotropic) {
            mate_cfg.calibration = std::make_shared<NullCalibration>(simulate_null_calibration(
                setting.missing, setting.model.d, setting.model.n, mate_cfg,
                split_seed(config.seed, si, 0xCA11B)));
        }
        if (runs_mate && setting.anisotropic && !mate_cfg.epsilon_override) {
            // Algorithm-2 margin, amortized across replications at sigma2 = 1.
            mate_cfg.epsilon_override = select_epsilon(
                setting.missing, setting.model.d, setting.model.n, 1.0, mate_cfg,
                split_seed(config.seed, si, 0xE5));
        }

        struct RepResult {
            std::map<std::string, std::pair<int, double>> r_hat;  // estimator -> (r, seconds)
            std::map<std::string, std::string> errors;
        };
        std::vector<RepResult> results(config.reps);

        parallel_for(config.reps, [&](std::int64_t rep) {
            const std::uint64_t rep_seed = split_seed(config.seed, si, rep, 0xDA7A);
            RepResult& out = results[rep];
            try {
                const Matrix x = generate_setting(setting, split_seed(rep_seed, 1));
                const IncompleteMatrix xo = apply_mcar(x, setting.missing, split_seed(rep_seed, 2));
                SpectrumResult spectrum;
                bool have_spectrum = false;
                const double p_hat = xo.observed_fraction();
                for (EstimatorKind kind : config.estimators) {
                    const std::string name = to_string(kind);
                    const auto started = std::chrono::steady_clock::now();
                    try {
                        int r_hat = 0;
                        if (kind == EstimatorKind::mate) {
                            r_hat = setting.anisotropic
                                        ? mate_anisotropic(xo, mate_cfg, split_seed(rep_seed, 3)).r_hat
                                        : mate_isotropic(xo, setting.grouping, mate_cfg,
                                                         split_seed(rep_seed, 3)).r_hat;
                        } else {
                            if (!have_spectrum) {
                                spectrum = sample_cov_eigs(xo);
                                have_spectrum = true;
                            }
                            if (kind == EstimatorKind::m_ed)
                                r_hat = baseline_m_ed(spectrum, p_hat, mate_cfg.r_max);
                            else if (kind == EstimatorKind::m_gr)
                                r_hat = baseline_m_gr(spectrum, p_hat, mate_cfg.r_max);
                            else
                                r_hat = baseline_m_er(spectrum, p_hat, mate_cfg.r_max);
                        }
                        out.r_hat[name] = {r_hat, elapsed_seconds(started)};
                    } catch (const std::exception& ex) {
                        out.errors[name] = ex.what();
                    }
                }
            } catch (const std::exception& ex) {
                for (EstimatorKind kind : config.estimators) out.errors[to_string(kind)] = ex.what();
            }
        });

        for (EstimatorKind kind : config.estimators) {
            const std::string name = to_string(kind);
            CellStats cell;
            for (int rep = 0; rep < config.reps; ++rep) {
                const RepResult& rr = results[rep];
                ReplicationRecord record;
                record.setting = static_cast<int>(si);
                record.rep = rep;
                record.estimator = name;
                if (auto it = rr.r_hat.find(name); it != rr.r_hat.end()) {
                    record.r_hat = it->second.first;
                    record.seconds = it->second.second;
                    cell.values.push_back(it->second.first);
                    cell.seconds += it->second.second;
                } else {
                    ++cell.failures;
                    if (auto eit = rr.errors.find(name); eit != rr.errors.end())
                        record.error = eit->second;
                }
                report.log.push_back(std::move(record));
            }
            report.rows.push_back(aggregate(setting.label, name, cell, setting.true_r, config.reps));
        }
    }

    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        std::ofstream rows(config.out_dir + "/report.csv");
        rows << report.rows_csv();
        std::ofstream log(config.out_dir + "/replications.csv");
        log << report.log_csv();
        std::ofstream table(config.out_dir + "/report.txt");
        table << report.table_text();
    }
    return report;
}

std::string SimulationReport::table_text() const {
    std::ostringstream out;
    out << std::left << std::setw(34) << "setting" << std::setw(8) << "est" << std::right
        << std::setw(8) << "mean" << std::setw(9) << "mse" << std::setw(8) << "under"
        << std::setw(8) << "over" << std::setw(10) << "sec" << std::setw(6) << "fail" << '\n';
    for (const ReportRow& r : rows) {
        out << std::left << std::setw(34) << r.label << std::setw(8) << r.estimator << std::right
            << std::fixed << std::setprecision(2) << std::setw(8) << r.mean << std::setw(9)
            << r.mse << std::setw(8) << r.under_rate << std::setw(8) << r.over_rate
            << std::setw(10) << r.seconds << std::setw(6) << r.failures << '\n';
    }
    return out.str();
}

std::string SimulationReport::rows_csv() const {
    std::ostringstream out;
    out.precision(12);
    out << "setting,estimator,mean,mse,under_rate,over_rate,seconds,failures,reps\n";
    for (const ReportRow& r : rows)
        out << r.label << ',' << r.estimator << ',' << r.mean << ',' << r.mse << ','
            << r.under_rate << ',' << r.over_rate << ',' << r.seconds << ',' << r.failures << ','
            << r.reps << '\n';
    return out.str();
}

std::string SimulationReport::log_csv() const {
    std::ostringstream out;
    out.precision(12);
    out << "setting,rep,estimator,r_hat,seconds,error\n";
    for (const ReplicationRecord& r : log)
        out << r.setting << ',' << r.rep << ',' << r.estimator << ',' << r.r_hat << ','
            << r.seconds << ',' << r.error << '\n';
    return out.str();
}

RealDataResult real_data_pipeline(const IncompleteMatrix& panel, double mask_rate,
                                  std::uint64_t seed, const std::vector<EstimatorKind>& estimators,
                                  const MateConfig& config, const std::string& out_dir) {
    if (!(mask_rate >= 0.0 && mask_rate < 1.0))
        throw ParameterError("real data: mask rate outside [0, 1)");
    const IncompleteMatrix standardized = standardize(panel);

    RealDataResult out;
    if (mask_rate == 0.0) {
        out.masked = standardized;
    } else {
        const IncompleteMatrix remasked =
            apply_mcar(standardized.values, Homogeneous{1.0 - mask_rate}, seed);
        out.masked.values = remasked.values;
        out.masked.mask = standardized.mask && remasked.mask;
        // zero anything that lost observation status
        for (Index j = 0; j < out.masked.n(); ++j)
            for (Index i = 0; i < out.masked.d(); ++i)
                if (!out.masked.mask(i, j)) out.masked.values(i, j) = 0.0;
    }
    const Vector rates = per_feature_rates(out.masked);
    for (Index i = 0; i < rates.size(); ++i)
        if (rates[i] * out.masked.n() < 2.0)
            throw DegenerateFeatureError("feature row " + std::to_string(i) +
                                         " retains fewer than 2 observations after masking");

    SpectrumResult spectrum;
    bool have_spectrum = false;
    const double p_hat = out.masked.observed_fraction();
    for (EstimatorKind kind : estimators) {
        const auto started = std::chrono::steady_clock::now();
        int r_hat = 0;
        if (kind == EstimatorKind::mate) {
            r_hat = mate_isotropic(out.masked, Grouping::homogeneous(), config,
                                   split_seed(seed, 0xF00D)).r_hat;
        } else {
            if (!have_spectrum) {
                spectrum = sample_cov_eigs(out.masked);
                have_spectrum = true;
            }
            if (kind == EstimatorKind::m_ed) r_hat = baseline_m_ed(spectrum, p_hat, config.r_max);
            else if (kind == EstimatorKind::m_gr) r_hat = baseline_m_gr(spectrum, p_hat, config.r_max);
            else r_hat = baseline_m_er(spectrum, p_hat, config.r_max);
        }
        ReportRow row;
        row.label = "realdata";
        row.estimator = to_string(kind);
        row.mean = r_hat;
        row.seconds = elapsed_seconds(started);
        row.reps = 1;
        out.rows.push_back(row);
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_csv(out_dir + "/masked_panel.csv", out.masked);
        std::ofstream rows(out_dir + "/realdata.csv");
        rows << "estimator,r_hat,seconds\n";
        for (const ReportRow& r : out.rows)
            rows << r.estimator << ',' << static_cast<int>(r.mean) << ',' << r.seconds << '\n';
    }
    return out;
}

std::vector<double> rmse_rank_validation(const Matrix& x_true, double mask_rate,
                                         const std::vector<int>& r_grid, int repeats,
                                         std::uint64_t seed, bool rescale) {
    if (repeats < 1) throw ParameterError("rmse validation: repeats must be >= 1");
    if (r_grid.empty()) throw ParameterError("rmse validation: empty rank grid");
    const Index d = x_true.rows(), n = x_true.cols();
    int r_top = 0;
    for (int r : r_grid) {
        if (r < 1 || r >= std::min(d, n))
            throw ParameterError("rmse validation: rank " + std::to_string(r) +
                                 " outside [1, min(d, n))");
        r_top = std::max(r_top, r);
    }
    if (!(mask_rate > 0.0 && mask_rate < 1.0))
        throw ParameterError("rmse validation: mask rate outside (0, 1)");

    std::vector<std::vector<double>> per_repeat(repeats,
                                                std::vector<double>(r_grid.size(), 0.0));
    parallel_for(repeats, [&](std::int64_t rep) {
        const IncompleteMatrix masked =
            apply_mcar(x_true, Homogeneous{1.0 - mask_rate}, split_seed(seed, 0x3A5C, rep));
        const double p_hat = masked.observed_fraction();
        const double lift = rescale ? 1.0 / p_hat : 1.0;
        const auto [vecs, vals] = top_cov_eigenpairs(masked.values, r_top);
        const Index miss = static_cast<Index>(d) * n - masked.observed_count();
        for (std::size_t gi = 0; gi < r_grid.size(); ++gi) {
            const int r = r_grid[gi];
            const Matrix ur = vecs.leftCols(r);
            const Matrix reconstructed = ur * (ur.transpose() * masked.values) * lift;
            double ss = 0.0;
            for (Index j = 0; j < n; ++j)
                for (Index i = 0; i < d; ++i)
                    if (!masked.mask(i, j)) {
                        const double diff = x_true(i, j) - reconstructed(i, j);
                        ss += diff * diff;
                    }
            per_repeat[rep][gi] = std::sqrt(ss / static_cast<double>(miss));
        }
    });

    std::vector<double> armse(r_grid.size(), 0.0);
    for (int rep = 0; rep < repeats; ++rep)
        for (std::size_t gi = 0; gi < r_grid.size(); ++gi) armse[gi] += per_repeat[rep][gi];
    for (double& a : armse) a /= repeats;
    return armse;
}

std::string edge_sweep_csv(const EdgeSweepConfig& config) {
    if (config.grid < 2) throw ParameterError("edge sweep: grid must be >= 2");
    std::ostringstream out;
    out.precision(12);
    out << "rate1,rate2,lambda_plus\n";
    for (int a = 0; a < config.grid; ++a) {
        for (int b = 0; b < config.grid; ++b) {
            const double r1 = config.rate_min +
                              (config.rate_max - config.rate_min) * a / (config.grid - 1);
            const double r2 = config.rate_min +
                              (config.rate_max - config.rate_min) * b / (config.grid - 1);
            DiscreteMeasure m{{r1, r2}, {0.5, 0.5}};
            if (r1 == r2) m = DiscreteMeasure::point_mass(r1);
            double lam;
            if (config.sample_specific) {
                lam = sample_edge(config.gamma, m, config.sigma2).lambda_plus;
            } else {
                lam = feature_edge(config.gamma, m.scaled(config.sigma2)).lambda_plus;
            }
            out << r1 << ',' << r2 << ',' << lam << '\n';
        }
    }
    return out.str();
}

std::string scree_csv(const SpectrumResult& spectrum) {
    std::ostringstream out;
    out.precision(12);
    out << "index,eigenvalue\n";
    for (Index i = 0; i < spectrum.eigenvalues.size(); ++i)
        out << (i + 1) << ',' << spectrum.eigenvalues[i] << '\n';
    return out.str();
}

std::string render_script() {
    return R"(#!/usr/bin/env python3
"""Render edge-surface and scree CSVs emitted by the `mate` CLI."""
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def render_edges(path, out):
    data = np.genfromtxt(path, delimiter=",", names=True)
    r1 = np.unique(data["rate1"])
    r2 = np.unique(data["rate2"])
    grid = data["lambda_plus"].reshape(len(r1), len(r2))
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.pcolormesh(r2, r1, grid, shading="nearest")
    cs = ax.contour(r2, r1, grid, colors="white", linewidths=0.6)
    ax.clabel(cs, fontsize=7)
    ax.set_xlabel("rate2")
    ax.set_ylabel("rate1")
    ax.set_title("rightmost bulk edge")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def render_scree(path, out):
    data = np.genfromtxt(path, delimiter=",", names=True)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(data["index"], data["eigenvalue"], marker="o", markersize=2.5, lw=0.8)
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_title("sample covariance spectrum")
    fig.tight_layout()
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    if len(sys.argv) != 4 or sys.argv[1] not in {"edges", "scree"}:
        sys.exit("usage: render.py {edges|scree} input.csv output.png")
    (render_edges if sys.argv[1] == "edges" else render_scree)(sys.argv[2], sys.argv[3])
)";
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open config file " + path);
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
            if (blank) continue;
            throw ParameterError("config line " + std::to_string(lineno) + " is not key=value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParameterError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = value;
    }
    return out;
}

}  // namespace mate
