#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mate/harness.hpp"

namespace py = pybind11;
using namespace mate;

namespace {

MissingnessSpec spec_from_args(double p, const std::vector<double>& rates,
                               const std::vector<Index>& sizes, bool sample_blocks) {
    if (rates.empty()) return Homogeneous{p};
    if (sample_blocks) return SampleBlocks{rates, sizes};
    return FeatureBlocks{rates, sizes};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Factor-count estimation for incomplete high-dimensional panels";

    py::register_exception<Error>(m, "MateError");

    py::class_<IncompleteMatrix>(m, "IncompleteMatrix")
        .def(py::init([](Matrix values, Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask) {
                 IncompleteMatrix x;
                 x.values = std::move(values);
                 x.mask = mask.array();
                 x.validate();
                 return x;
             }),
             py::arg("values"), py::arg("mask"))
        .def_property_readonly("values", [](const IncompleteMatrix& x) { return x.values; })
        .def_property_readonly("mask",
                               [](const IncompleteMatrix& x) {
                                   return Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>(
                                       x.mask.matrix());
                               })
        .def_property_readonly("d", &IncompleteMatrix::d)
        .def_property_readonly("n", &IncompleteMatrix::n)
        .def_property_readonly("observed_fraction", &IncompleteMatrix::observed_fraction);

    py::class_<SpectrumResult>(m, "SpectrumResult")
        .def_readonly("eigenvalues", &SpectrumResult::eigenvalues)
        .def_readonly("d", &SpectrumResult::d)
        .def_readonly("n", &SpectrumResult::n)
        .def_readonly("gamma_n", &SpectrumResult::gamma_n);

    py::class_<EdgeResult>(m, "EdgeResult")
        .def_readonly("lambda_plus", &EdgeResult::lambda_plus)
        .def_property_readonly("alpha_plus",
                               [](const EdgeResult& e) -> py::object {
                                   return e.alpha_plus ? py::cast(*e.alpha_plus) : py::none();
                               })
        .def_property_readonly("s2_edge",
                               [](const EdgeResult& e) -> py::object {
                                   return e.s2_edge ? py::cast(*e.s2_edge) : py::none();
                               })
        .def_property_readonly("population_threshold", &EdgeResult::population_threshold);

    py::enum_<Regime>(m, "Regime")
        .value("homogeneous", Regime::homogeneous)
        .value("feature", Regime::feature)
        .value("sample", Regime::sample)
        .value("anisotropic", Regime::anisotropic);

    py::class_<MateResult>(m, "MateResult")
        .def_readonly("r_hat", &MateResult::r_hat)
        .def_readonly("v", &MateResult::v)
        .def_readonly("epsilon_n", &MateResult::epsilon_n)
        .def_readonly("theta_hat", &MateResult::theta_hat)
        .def_readonly("sigma2_hat", &MateResult::sigma2_hat)
        .def_readonly("iterations", &MateResult::iterations)
        .def_readonly("regime", &MateResult::regime)
        .def_readonly("converged", &MateResult::converged);

    m.def(
        "generate_complete",
        [](Index d, Index n, const std::vector<double>& spikes, double sigma2, double theta,
           bool rotate, std::uint64_t seed) {
            FactorModelSpec spec;
            spec.d = d;
            spec.n = n;
            spec.spikes = spikes;
            if (theta > 0.0)
                spec.noise = GammaDiagonal{theta, sigma2};
            else
                spec.noise = Isotropic{sigma2};
            spec.rotate = rotate;
            return generate_complete(spec, seed);
        },
        py::arg("d"), py::arg("n"), py::arg("spikes") = std::vector<double>{},
        py::arg("sigma2") = 1.0, py::arg("theta") = 0.0, py::arg("rotate") = false,
        py::arg("seed") = 1);

    m.def(
        "apply_mcar",
        [](const Matrix& x, double p, const std::vector<double>& rates,
           const std::vector<Index>& sizes, bool sample_blocks, std::uint64_t seed) {
            return apply_mcar(x, spec_from_args(p, rates, sizes, sample_blocks), seed);
        },
        py::arg("x"), py::arg("p") = 1.0, py::arg("rates") = std::vector<double>{},
        py::arg("sizes") = std::vector<Index>{}, py::arg("sample_blocks") = false,
        py::arg("seed") = 1);

    m.def("standardize", &standardize, py::arg("x"));
    m.def("per_feature_rates", &per_feature_rates, py::arg("x"));
    m.def("per_sample_rates", &per_sample_rates, py::arg("x"));
    m.def("sample_cov_eigs", py::overload_cast<const IncompleteMatrix&>(&sample_cov_eigs),
          py::arg("x"));
    m.def("sample_cov_eigs_dense", py::overload_cast<const Matrix&>(&sample_cov_eigs),
          py::arg("zero_filled"));
    m.def("trimmed_moments", &trimmed_moments, py::arg("spectrum"), py::arg("r_hat"));
    m.def("moment_of_matrix", &moment_of_matrix, py::arg("a"), py::arg("k"));

    m.def("mp_edge", &mp_edge, py::arg("p"), py::arg("sigma2"), py::arg("gamma"));
    m.def(
        "feature_edge",
        [](double gamma, const std::vector<double>& atoms, const std::vector<double>& weights) {
            return feature_edge(gamma, DiscreteMeasure{atoms, weights});
        },
        py::arg("gamma"), py::arg("atoms"), py::arg("weights"));
    m.def(
        "sample_edge",
        [](double gamma, const std::vector<double>& atoms, const std::vector<double>& weights,
           double sigma2) { return sample_edge(gamma, DiscreteMeasure{atoms, weights}, sigma2); },
        py::arg("gamma"), py::arg("atoms"), py::arg("weights"), py::arg("sigma2") = 1.0);
    m.def(
        "psi_feature",
        [](double alpha, double gamma, const std::vector<double>& atoms,
           const std::vector<double>& weights) {
            return psi_feature(alpha, gamma, DiscreteMeasure{atoms, weights});
        },
        py::arg("alpha"), py::arg("gamma"), py::arg("atoms"), py::arg("weights"));
    m.def(
        "spike_limit_feature",
        [](double tilde_lambda, double gamma, const std::vector<double>& atoms,
           const std::vector<double>& weights) {
            return spike_limit_feature(tilde_lambda, gamma, DiscreteMeasure{atoms, weights});
        },
        py::arg("tilde_lambda"), py::arg("gamma"), py::arg("atoms"), py::arg("weights"));
    m.def(
        "count_identifiable",
        [](const std::vector<double>& spikes, double threshold) {
            return count_identifiable(spikes, threshold);
        },
        py::arg("spikes"), py::arg("threshold"));

    m.def(
        "select_epsilon",
        [](Index d, Index n, double p, const std::vector<double>& rates,
           const std::vector<Index>& sizes, bool sample_blocks, double sigma2, double beta,
           int copies, std::uint64_t seed) {
            MateConfig config;
            config.beta = beta;
            config.monte_carlo_copies = copies;
            return select_epsilon(spec_from_args(p, rates, sizes, sample_blocks), d, n, sigma2,
                                  config, seed);
        },
        py::arg("d"), py::arg("n"), py::arg("p") = 1.0, py::arg("rates") = std::vector<double>{},
        py::arg("sizes") = std::vector<Index>{}, py::arg("sample_blocks") = false,
        py::arg("sigma2") = 1.0, py::arg("beta") = 0.1, py::arg("copies") = 500,
        py::arg("seed") = 1);

    m.def(
        "mate_isotropic",
        [](const IncompleteMatrix& x, const std::string& grouping,
           const std::vector<Index>& blocks, int r_max, int copies, double beta,
           std::uint64_t seed) {
            MateConfig config;
            config.r_max = r_max;
            config.monte_carlo_copies = copies;
            config.beta = beta;
            Grouping g = Grouping::homogeneous();
            if (grouping == "feature") g = Grouping::feature(blocks);
            else if (grouping == "sample") g = Grouping::sample(blocks);
            else if (grouping != "homogeneous")
                throw ParameterError("grouping must be homogeneous, feature or sample");
            return mate_isotropic(x, g, config, seed);
        },
        py::arg("x"), py::arg("grouping") = "homogeneous",
        py::arg("blocks") = std::vector<Index>{}, py::arg("r_max") = 8, py::arg("copies") = 500,
        py::arg("beta") = 0.1, py::arg("seed") = 1);

    m.def(
        "mate_anisotropic",
        [](const IncompleteMatrix& x, int r_max, int copies, double beta, std::uint64_t seed) {
            MateConfig config;
            config.r_max = r_max;
            config.monte_carlo_copies = copies;
            config.beta = beta;
            return mate_anisotropic(x, config, seed);
        },
        py::arg("x"), py::arg("r_max") = 10, py::arg("copies") = 500, py::arg("beta") = 0.1,
        py::arg("seed") = 1);

    m.def(
        "baseline_m_er",
        [](const SpectrumResult& s, double p_hat, int r_max) {
            return baseline_m_er(s, p_hat, r_max);
        },
        py::arg("spectrum"), py::arg("p_hat") = 1.0, py::arg("r_max") = 8);
    m.def(
        "baseline_m_gr",
        [](const SpectrumResult& s, double p_hat, int r_max) {
            return baseline_m_gr(s, p_hat, r_max);
        },
        py::arg("spectrum"), py::arg("p_hat") = 1.0, py::arg("r_max") = 8);
    m.def(
        "baseline_m_ed",
        [](const SpectrumResult& s, double p_hat, int r_max) {
            return baseline_m_ed(s, p_hat, r_max);
        },
        py::arg("spectrum"), py::arg("p_hat") = 1.0, py::arg("r_max") = 8);

    m.def("rmse_rank_validation", &rmse_rank_validation, py::arg("x_true"), py::arg("mask_rate"),
          py::arg("r_grid"), py::arg("repeats"), py::arg("seed") = 1, py::arg("rescale") = true);
}
