#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mate/harness.hpp"

namespace {

using namespace mate;

std::vector<double> parse_doubles(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

std::vector<int> parse_ints(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

std::vector<Index> even_blocks(Index total, std::size_t k) {
    std::vector<Index> sizes(k, total / static_cast<Index>(k));
    for (Index i = 0; i < total % static_cast<Index>(k); ++i) ++sizes[i];
    return sizes;
}

MissingnessSpec missing_from_rates(const std::vector<double>& rates, Index d, Index n,
                                   bool sample_blocks) {
    if (rates.size() == 1) return Homogeneous{rates[0]};
    if (sample_blocks) return SampleBlocks{rates, even_blocks(n, rates.size())};
    return FeatureBlocks{rates, even_blocks(d, rates.size())};
}

SimulationSetting build_setting(int model, Index d, Index n, const std::vector<double>& rates,
                                bool sample_blocks) {
    SimulationSetting s;
    s.model = make_model(model, d, n);
    s.true_r = model_true_rank(model);
    s.anisotropic = model_is_anisotropic(model);
    s.missing = missing_from_rates(rates, d, n, sample_blocks);
    if (rates.size() == 1) {
        s.grouping = Grouping::homogeneous();
    } else if (sample_blocks) {
        s.grouping = Grouping::sample(even_blocks(n, rates.size()));
    } else {
        s.grouping = Grouping::feature(even_blocks(d, rates.size()));
    }
    std::ostringstream label;
    label << "model" << model << "(" << d << "," << n << ",p=";
    for (std::size_t i = 0; i < rates.size(); ++i) label << (i ? "/" : "") << rates[i];
    label << ")";
    s.label = label.str();
    return s;
}

// Every simulation cell of the paper's tables, at the configured rep count.
std::vector<SimulationSetting> paper_table_settings() {
    std::vector<SimulationSetting> out;
    const std::vector<std::pair<Index, Index>> dims_half = {{250, 500}, {500, 1000}};
    const std::vector<std::pair<Index, Index>> dims_one = {{250, 250}, {500, 500}};
    const std::vector<std::pair<Index, Index>> dims_two = {{500, 250}, {1000, 500}};
    auto dims_for = [&](int model) {
        switch (model) {
            case 1: case 6: return dims_half;
            case 2: case 7: return dims_one;
            case 3: case 8: return dims_two;
            default: {
                std::vector<std::pair<Index, Index>> all = dims_half;
                all.insert(all.end(), dims_one.begin(), dims_one.end());
                all.insert(all.end(), dims_two.begin(), dims_two.end());
                return all;
            }
        }
    };
    for (int model : {1, 2, 3}) {
        for (auto [d, n] : dims_for(model)) {
            for (double p : {1.0, 0.9, 0.7}) out.push_back(build_setting(model, d, n, {p}, false));
            for (auto rates : {std::vector<double>{0.9, 0.8, 0.7}, {0.8, 0.7, 0.6}, {0.6, 0.5, 0.4}})
                out.push_back(build_setting(model, d, n, rates, false));
        }
    }
    for (int model : {4, 5}) {
        for (auto [d, n] : dims_for(model))
            for (double p : {1.0, 0.9, 0.7}) out.push_back(build_setting(model, d, n, {p}, false));
    }
    for (int model : {5}) {
        for (auto [d, n] : dims_for(model))
            for (auto rates : {std::vector<double>{0.9, 0.8, 0.7}, {0.8, 0.6, 0.4}})
                out.push_back(build_setting(model, d, n, rates, false));
    }
    for (int model : {6, 7, 8}) {
        for (auto [d, n] : dims_for(model))
            for (double p2 : {0.8, 0.6, 0.5})
                out.push_back(build_setting(model, d, n, {1.0, p2}, false));
    }
    return out;
}

void apply_file_config(const std::string& path, int& model, Index& d, Index& n,
                       std::string& rates, int& reps, std::uint64_t& seed, std::string& out,
                       std::string& estimators, int& r_max, int& copies, double& beta) {
    for (const auto& [key, value] : parse_config_file(path)) {
        if (key == "model") model = std::stoi(value);
        else if (key == "d") d = std::stoll(value);
        else if (key == "n") n = std::stoll(value);
        else if (key == "p" || key == "rates") rates = value;
        else if (key == "reps") reps = std::stoi(value);
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "out") out = value;
        else if (key == "estimators") estimators = value;
        else if (key == "rmax") r_max = std::stoi(value);
        else if (key == "M" || key == "copies") copies = std::stoi(value);
        else if (key == "beta") beta = std::stod(value);
        else throw ParameterError("unknown config key '" + key + "'");
    }
}

std::vector<EstimatorKind> parse_estimators(const std::string& csv) {
    std::vector<EstimatorKind> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(estimator_from_string(tok));
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw ParameterError("cannot write " + path);
    f << content;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Factor-count estimation for incomplete high-dimensional panels"};
    app.require_subcommand(1);

    // ---- simulate ----------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "Monte Carlo study over factor models");
    int sim_model = 1;
    Index sim_d = 250, sim_n = 500;
    std::string sim_rates = "1.0";
    int sim_reps = 200;
    std::uint64_t sim_seed = 1;
    std::string sim_out, sim_config, sim_estimators = "mate";
    int sim_rmax = 8, sim_copies = 500;
    double sim_beta = 0.1;
    bool sim_paper_tables = false, sim_sample_blocks = false;
    sim->add_option("--model", sim_model, "model id 1..8");
    sim->add_option("--d", sim_d, "feature count");
    sim->add_option("--n", sim_n, "sample count");
    sim->add_option("--p", sim_rates, "observation rate(s), comma list = feature blocks");
    sim->add_flag("--sample-blocks", sim_sample_blocks, "treat the rate list as sample blocks");
    sim->add_option("--reps", sim_reps, "replications per setting");
    sim->add_option("--seed", sim_seed, "master seed");
    sim->add_option("--out", sim_out, "output directory");
    sim->add_option("--config", sim_config, "key=value config file (flags override)");
    sim->add_option("--estimators", sim_estimators, "comma list: mate,m-ed,m-gr,m-er");
    sim->add_option("--rmax", sim_rmax, "spike-count cap");
    sim->add_option("--copies", sim_copies, "Monte Carlo copies for calibration");
    sim->add_option("--beta", sim_beta, "null quantile level");
    sim->add_flag("--paper-tables", sim_paper_tables, "run every tabled simulation setting");

    // ---- estimate ----------------------------------------------------------
    auto* est = app.add_subcommand("estimate", "factor count for one CSV dataset");
    std::string est_input, est_token = "NA", est_grouping = "homogeneous", est_blocks;
    bool est_transpose = false, est_header = false, est_standardize = false, est_aniso = false;
    std::uint64_t est_seed = 1;
    int est_rmax = 10, est_copies = 500;
    double est_beta = 0.1;
    est->add_option("--input", est_input, "CSV path (features in rows)")->required();
    est->add_option("--missing-token", est_token, "missing-cell token");
    est->add_flag("--transpose", est_transpose, "samples are in rows");
    est->add_flag("--skip-header", est_header, "skip the first row");
    est->add_flag("--standardize", est_standardize, "standardize features first");
    est->add_flag("--anisotropic", est_aniso, "iterative MATE for diagonal noise");
    est->add_option("--grouping", est_grouping, "homogeneous | feature | sample");
    est->add_option("--blocks", est_blocks, "comma block sizes for feature/sample grouping");
    est->add_option("--seed", est_seed, "seed");
    est->add_option("--rmax", est_rmax, "spike-count cap");
    est->add_option("--copies", est_copies, "Monte Carlo copies");
    est->add_option("--beta", est_beta, "null quantile level");

    // ---- realdata ----------------------------------------------------------
    auto* real = app.add_subcommand("realdata", "standardize, mask, estimate a panel");
    std::string real_input, real_token = "NA", real_out, real_estimators = "mate,m-ed,m-gr,m-er";
    double real_mask = 0.3;
    std::uint64_t real_seed = 10;
    bool real_transpose = false, real_header = false;
    int real_rmax = 10, real_copies = 500;
    real->add_option("--input", real_input, "CSV path")->required();
    real->add_option("--missing-token", real_token, "missing-cell token");
    real->add_flag("--transpose", real_transpose, "samples are in rows");
    real->add_flag("--skip-header", real_header, "skip the first row");
    real->add_option("--mask-rate", real_mask, "probability each entry is masked");
    real->add_option("--seed", real_seed, "seed");
    real->add_option("--out", real_out, "output directory");
    real->add_option("--estimators", real_estimators, "comma list");
    real->add_option("--rmax", real_rmax, "spike-count cap");
    real->add_option("--copies", real_copies, "Monte Carlo copies");

    // ---- rmse-validate -----------------------------------------------------
    auto* rmse = app.add_subcommand("rmse-validate", "rank validation by imputation error");
    std::string rmse_input, rmse_token = "NA", rmse_out, rmse_grid = "1,2,3,4,5,6,7,8";
    double rmse_mask = 0.3;
    int rmse_repeats = 20;
    std::uint64_t rmse_seed = 10;
    bool rmse_transpose = false, rmse_header = false, rmse_norescale = false,
         rmse_standardize = false;
    rmse->add_option("--input", rmse_input, "fully observed CSV")->required();
    rmse->add_option("--missing-token", rmse_token, "missing-cell token");
    rmse->add_flag("--transpose", rmse_transpose, "samples are in rows");
    rmse->add_flag("--skip-header", rmse_header, "skip the first row");
    rmse->add_flag("--standardize", rmse_standardize, "standardize features first");
    rmse->add_option("--mask-rate", rmse_mask, "probability each entry is masked");
    rmse->add_option("--r-grid", rmse_grid, "comma list of candidate ranks");
    rmse->add_option("--repeats", rmse_repeats, "fresh maskings to average");
    rmse->add_option("--seed", rmse_seed, "seed");
    rmse->add_option("--out", rmse_out, "output directory");
    rmse->add_flag("--no-rescale", rmse_norescale, "skip the 1/p rescale in the imputation");

    // ---- edges -------------------------------------------------------------
    auto* edges_cmd = app.add_subcommand("edges", "bulk-edge surface over a rate grid");
    EdgeSweepConfig sweep;
    std::string edges_out;
    edges_cmd->add_option("--gamma", sweep.gamma, "aspect ratio d/n");
    edges_cmd->add_option("--grid", sweep.grid, "grid points per axis");
    edges_cmd->add_option("--min", sweep.rate_min, "smallest rate");
    edges_cmd->add_option("--max", sweep.rate_max, "largest rate");
    edges_cmd->add_option("--sigma2", sweep.sigma2, "noise variance");
    edges_cmd->add_flag("--sample", sweep.sample_specific, "sample-specific blocks");
    edges_cmd->add_option("--out", edges_out, "output CSV path (stdout if omitted)");

    // ---- figures -----------------------------------------------------------
    auto* figs = app.add_subcommand("figures", "edge surface + scree CSVs + render script");
    std::string figs_out = "figures", figs_input, figs_token = "NA";
    EdgeSweepConfig figs_sweep;
    bool figs_transpose = false, figs_header = false;
    figs->add_option("--out", figs_out, "output directory");
    figs->add_option("--gamma", figs_sweep.gamma, "aspect ratio for the edge sweep");
    figs->add_option("--grid", figs_sweep.grid, "grid points per axis");
    figs->add_flag("--sample", figs_sweep.sample_specific, "sample-specific sweep");
    figs->add_option("--input", figs_input, "optional CSV whose spectrum becomes the scree plot");
    figs->add_option("--missing-token", figs_token, "missing-cell token");
    figs->add_flag("--transpose", figs_transpose, "samples are in rows");
    figs->add_flag("--skip-header", figs_header, "skip the first row");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            if (!sim_config.empty())
                apply_file_config(sim_config, sim_model, sim_d, sim_n, sim_rates, sim_reps,
                                  sim_seed, sim_out, sim_estimators, sim_rmax, sim_copies,
                                  sim_beta);
            ExperimentConfig config;
            config.reps = sim_reps;
            config.seed = sim_seed;
            config.out_dir = sim_out;
            config.estimators = parse_estimators(sim_estimators);
            config.mate.r_max = sim_rmax;
            config.mate.monte_carlo_copies = sim_copies;
            config.mate.beta = sim_beta;
            if (sim_paper_tables) {
                config.settings = paper_table_settings();
            } else {
                config.settings = {build_setting(sim_model, sim_d, sim_n,
                                                 parse_doubles(sim_rates), sim_sample_blocks)};
                if (model_is_anisotropic(sim_model)) config.mate.r_max = std::max(sim_rmax, 10);
            }
            for (auto& s : config.settings)
                if (s.anisotropic) config.mate.r_max = std::max(config.mate.r_max, 10);
            const SimulationReport report = run_simulation(config);
            std::cout << report.table_text();
            return 0;
        }
        if (*est) {
            CsvOptions opts{est_token, est_header, est_transpose};
            IncompleteMatrix x = ingest_csv(est_input, opts);
            if (est_standardize) x = standardize(x);
            MateConfig config;
            config.r_max = est_rmax;
            config.monte_carlo_copies = est_copies;
            config.beta = est_beta;
            MateResult result;
            if (est_aniso) {
                result = mate_anisotropic(x, config, est_seed);
            } else {
                Grouping grouping = Grouping::homogeneous();
                if (est_grouping == "feature")
                    grouping = est_blocks.empty()
                                   ? Grouping::feature(even_blocks(x.d(), 2))
                                   : Grouping::feature([&] {
                                         std::vector<Index> sizes;
                                         for (int v : parse_ints(est_blocks)) sizes.push_back(v);
                                         return sizes;
                                     }());
                else if (est_grouping == "sample")
                    grouping = est_blocks.empty()
                                   ? Grouping::sample(even_blocks(x.n(), 2))
                                   : Grouping::sample([&] {
                                         std::vector<Index> sizes;
                                         for (int v : parse_ints(est_blocks)) sizes.push_back(v);
                                         return sizes;
                                     }());
                else if (est_grouping != "homogeneous")
                    throw ParameterError("grouping must be homogeneous, feature or sample");
                result = mate_isotropic(x, grouping, config, est_seed);
            }
            std::cout << "r_hat " << result.r_hat << "\n"
                      << "threshold_v " << result.v << "\n"
                      << "epsilon_n " << result.epsilon_n << "\n"
                      << "sigma2_hat " << result.sigma2_hat << "\n"
                      << "theta_hat " << result.theta_hat << "\n"
                      << "iterations " << result.iterations << "\n"
                      << "converged " << (result.converged ? "yes" : "no") << "\n";
            return 0;
        }
        if (*real) {
            CsvOptions opts{real_token, real_header, real_transpose};
            const IncompleteMatrix panel = ingest_csv(real_input, opts);
            MateConfig config;
            config.r_max = real_rmax;
            config.monte_carlo_copies = real_copies;
            const RealDataResult result = real_data_pipeline(
                panel, real_mask, real_seed, parse_estimators(real_estimators), config, real_out);
            std::cout << "estimator r_hat seconds\n";
            for (const ReportRow& row : result.rows)
                std::cout << row.estimator << ' ' << static_cast<int>(row.mean) << ' '
                          << row.seconds << '\n';
            return 0;
        }
        if (*rmse) {
            CsvOptions opts{rmse_token, rmse_header, rmse_transpose};
            IncompleteMatrix panel = ingest_csv(rmse_input, opts);
            if (rmse_standardize) panel = standardize(panel);
            if (panel.observed_count() != panel.d() * panel.n())
                throw ParameterError("rmse-validate needs a fully observed panel");
            const std::vector<int> grid = parse_ints(rmse_grid);
            const std::vector<double> armse = rmse_rank_validation(
                panel.values, rmse_mask, grid, rmse_repeats, rmse_seed, !rmse_norescale);
            std::ostringstream csv;
            csv.precision(12);
            csv << "r,armse\n";
            for (std::size_t i = 0; i < grid.size(); ++i) csv << grid[i] << ',' << armse[i] << '\n';
            std::cout << csv.str();
            if (!rmse_out.empty()) {
                std::filesystem::create_directories(rmse_out);
                write_file(rmse_out + "/armse.csv", csv.str());
            }
            return 0;
        }
        if (*edges_cmd) {
            const std::string csv = edge_sweep_csv(sweep);
            if (edges_out.empty())
                std::cout << csv;
            else
                write_file(edges_out, csv);
            return 0;
        }
        if (*figs) {
            std::filesystem::create_directories(figs_out);
            write_file(figs_out + "/edge_surface.csv", edge_sweep_csv(figs_sweep));
            write_file(figs_out + "/render.py", render_script());
            if (!figs_input.empty()) {
                CsvOptions opts{figs_token, figs_header, figs_transpose};
                const IncompleteMatrix x = ingest_csv(figs_input, opts);
                write_file(figs_out + "/scree.csv", scree_csv(sample_cov_eigs(x)));
            }
            std::cout << "wrote " << figs_out << "\n";
            return 0;
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
