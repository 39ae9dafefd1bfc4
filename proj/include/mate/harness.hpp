#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mate/estimators.hpp"

namespace mate {

enum class EstimatorKind { mate, m_ed, m_gr, m_er };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_from_string(const std::string& name);

/// One simulation cell: a model, dimensions, a missingness pattern and the
/// grouping handed to the estimators.
struct SimulationSetting {
    std::string label;
    FactorModelSpec model;
    MissingnessSpec missing = Homogeneous{1.0};
    Grouping grouping = Grouping::homogeneous();
    int true_r = 0;
    bool anisotropic = false;  // run the iterative MATE instead of the isotropic one
};

/// Paper model presets. `id` in 1..8; block rates of the missingness are
/// supplied separately. The isotropic models place the listed factor
/// strengths on top of unit noise; Model 5 aligns its factor directions with
/// the largest noise variances so the spikes dominate the Gamma bulk.
FactorModelSpec make_model(int id, Index d, Index n);
int model_true_rank(int id);
bool model_is_anisotropic(int id);

struct ExperimentConfig {
    std::vector<SimulationSetting> settings;
    int reps = 200;
    std::uint64_t seed = 1;
    std::vector<EstimatorKind> estimators = {EstimatorKind::mate};
    MateConfig mate;
    std::string out_dir;  // empty = no files written
};

struct ReportRow {
    std::string label;
    std::string estimator;
    double mean = 0.0;
    double mse = 0.0;
    double under_rate = 0.0;
    double over_rate = 0.0;
    double seconds = 0.0;  // wall-clock total for this estimator in this setting
    int failures = 0;
    int reps = 0;
};

struct ReplicationRecord {
    int setting = 0;
    int rep = 0;
    std::string estimator;
    int r_hat = -1;  // -1 = failed
    double seconds = 0.0;
    std::string error;
};

struct SimulationReport {
    std::vector<ReportRow> rows;
    std::vector<ReplicationRecord> log;

    std::string table_text() const;
    std::string rows_csv() const;
    std::string log_csv() const;
};

/// Runs every setting x replication x estimator, replication-parallel, with
/// per-setting amortized null calibration for MATE. Failures are recorded and
/// never abort the sweep. Deterministic given the config seed.
SimulationReport run_simulation(const ExperimentConfig& config);

/// Ingest -> standardize -> mask -> estimate; returns per-estimator rows and
/// writes the masked panel when out_dir is set.
struct RealDataResult {
    std::vector<ReportRow> rows;  // mean column carries r_hat
    IncompleteMatrix masked;
};
RealDataResult real_data_pipeline(const IncompleteMatrix& panel, double mask_rate,
                                  std::uint64_t seed, const std::vector<EstimatorKind>& estimators,
                                  const MateConfig& config, const std::string& out_dir = "");

/// Average reconstruction RMSE over `repeats` fresh maskings at rate p, for
/// each candidate rank: rank-r principal-component imputation of the masked
/// cells from the zero-filled, inverse-probability-rescaled panel.
std::vector<double> rmse_rank_validation(const Matrix& x_true, double mask_rate,
                                         const std::vector<int>& r_grid, int repeats,
                                         std::uint64_t seed, bool rescale = true);

/// Edge-surface sweep: lambda_+ over a rate-pair grid, as CSV rows
/// (rate1, rate2, lambda_plus).
struct EdgeSweepConfig {
    double gamma = 0.5;
    int grid = 10;
    double rate_min = 0.1;
    double rate_max = 1.0;
    bool sample_specific = false;  // feature-specific by default
    double sigma2 = 1.0;
};
std::string edge_sweep_csv(const EdgeSweepConfig& config);

/// Scree data for a spectrum: CSV rows (index, eigenvalue).
std::string scree_csv(const SpectrumResult& spectrum);

/// Plain matplotlib script that renders the emitted CSVs.
std::string render_script();

/// Flat key=value config file (comma arrays, # comments). Unknown keys throw.
std::map<std::string, std::string> parse_config_file(const std::string& path);

}  // namespace mate
