#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mate/estimators.hpp"
#include "mate/harness.hpp"
#include "mate/parallel.hpp"
#include "mate/rng.hpp"

using namespace mate;

namespace {

SpectrumResult spectrum_of(std::vector<double> values, Index n) {
    SpectrumResult s;
    s.eigenvalues = Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
    s.d = s.eigenvalues.size();
    s.n = n;
    s.gamma_n = static_cast<double>(s.d) / static_cast<double>(n);
    return s;
}

IncompleteMatrix draw(const FactorModelSpec& model, const MissingnessSpec& missing,
                      std::uint64_t seed) {
    return apply_mcar(generate_complete(model, split_seed(seed, 1)), missing, split_seed(seed, 2));
}

}  // namespace

TEST_CASE("threshold_count: strict exceedance") {
    const SpectrumResult s = spectrum_of({5.0, 3.0, 1.0}, 3);
    CHECK(threshold_count(s, 2.0, 0.0) == 2);
    CHECK(threshold_count(s, 5.0, 0.0) == 0);
    CHECK(threshold_count(s, 2.9, 0.1) == 1);  // 3.0 > 3.0 is false
}

TEST_CASE("select_epsilon: single draw and quantile bounds") {
    MateConfig config;
    config.monte_carlo_copies = 1;
    CHECK(select_epsilon(Homogeneous{0.9}, 30, 40, 1.0, config, 5) == 0.0);

    config.monte_carlo_copies = 64;
    const NullCalibration cal = simulate_null_calibration(Homogeneous{0.8}, 30, 40, config, 5);
    const double eps = cal.epsilon(config.beta);
    CHECK(eps >= cal.lambda1_sorted.front() - cal.mean);
    CHECK(eps <= cal.lambda1_sorted.back() - cal.mean);
    // matches the standalone operation at unit variance
    CHECK(select_epsilon(Homogeneous{0.8}, 30, 40, 1.0, config, 5) == doctest::Approx(eps));
    // exact sigma2 scaling
    CHECK(select_epsilon(Homogeneous{0.8}, 30, 40, 2.5, config, 5) ==
          doctest::Approx(2.5 * eps).epsilon(1e-12));
}

TEST_CASE("select_epsilon: regression fixture at (250, 500), p = 1") {
    MateConfig config;  // beta 0.1, M 500
    const double eps = select_epsilon(Homogeneous{1.0}, 250, 500, 1.0, config, 12345);
    // recorded band around the n^{-2/3} scale; observed ~0.06 across seeds
    CHECK(eps > 0.035);
    CHECK(eps < 0.09);
}

TEST_CASE("moment estimators: boundary and exact inversion") {
    const std::vector<double> p1{1.0};
    const std::vector<Index> d1{100};

    const MomentEstimate boundary = moment_estimators_feature(1.0, 1.5, p1, d1, 0.5);
    CHECK(boundary.isotropic_sentinel);
    CHECK(boundary.sigma2 == doctest::Approx(1.0));

    const MomentEstimate inv = moment_estimators_feature(1.0, 1.8333, p1, d1, 0.5);
    CHECK_FALSE(inv.isotropic_sentinel);
    CHECK(inv.theta == doctest::Approx(3.0).epsilon(1e-3));
    CHECK(inv.sigma2 == doctest::Approx(1.0));

    CHECK_THROWS_AS(moment_estimators_feature(0.0, 1.0, p1, d1, 0.5), ParameterError);
}

TEST_CASE("moment estimators: feature and sample formulas agree when complete") {
    const std::vector<double> ones{1.0};
    const std::vector<Index> sz{50};
    for (double b2 : {1.7, 1.9, 2.4}) {
        const MomentEstimate f = moment_estimators_feature(1.1, b2, ones, sz, 0.5);
        const MomentEstimate s = moment_estimators_sample(1.1, b2, ones, sz, 0.5);
        CHECK(f.sigma2 == doctest::Approx(s.sigma2).epsilon(1e-14));
        if (!f.isotropic_sentinel)
            CHECK(f.theta == doctest::Approx(s.theta).epsilon(1e-12));
    }
    // gamma-term exactly cancelling the excess -> sentinel
    const MomentEstimate b = moment_estimators_sample(1.0, 1.0, ones, sz, 0.0 + 1e-300);
    CHECK(b.isotropic_sentinel);
}

TEST_CASE("moment estimators: round trip through the limiting formulas") {
    const double theta = 2.2, sigma2 = 1.4, gamma = 0.8;
    const std::vector<double> rates{0.9, 0.6, 0.4};
    const std::vector<Index> sizes{40, 30, 30};
    double p1 = 0.0, p2 = 0.0;
    for (std::size_t k = 0; k < rates.size(); ++k) {
        p1 += rates[k] * sizes[k];
        p2 += rates[k] * rates[k] * sizes[k];
    }
    p1 /= 100.0;
    p2 /= 100.0;
    const double b1 = sigma2 * p1;
    const double b2 = sigma2 * sigma2 * (1.0 + 1.0 / theta) * p2 +
                      gamma * sigma2 * sigma2 * p1 * p1;
    const MomentEstimate me = moment_estimators_feature(b1, b2, rates, sizes, gamma);
    CHECK(me.theta == doctest::Approx(theta).epsilon(1e-10));
    CHECK(me.sigma2 == doctest::Approx(sigma2).epsilon(1e-12));

    const double q1 = p1, q2 = p2;
    const double s1 = sigma2 * q1;
    const double s2 = sigma2 * sigma2 * (1.0 + 1.0 / theta) * q1 * q1 +
                      gamma * sigma2 * sigma2 * q2;
    const MomentEstimate ms = moment_estimators_sample(s1, s2, rates, sizes, gamma);
    CHECK(ms.theta == doctest::Approx(theta).epsilon(1e-10));
    CHECK(ms.sigma2 == doctest::Approx(sigma2).epsilon(1e-12));
}

TEST_CASE("moment estimators: sample-specific simulation oracle") {
    // null theta=3, sigma2=1, q-blocks (0.9, 0.7), gamma=0.5, d=500
    const int reps = 60;
    std::vector<double> thetas(reps);
    parallel_for(reps, [&](std::int64_t i) {
        FactorModelSpec model;
        model.d = 500;
        model.n = 1000;
        model.noise = GammaDiagonal{3.0, 1.0};
        const IncompleteMatrix xo =
            draw(model, SampleBlocks{{0.9, 0.7}, {500, 500}}, 40000 + i);
        const SpectrumResult s = sample_cov_eigs(xo);
        const auto [b1, b2] = trimmed_moments(s, 0);
        const std::vector<double> rates{0.9, 0.7};
        const std::vector<Index> sizes{500, 500};
        thetas[i] = moment_estimators_sample(b1, b2, rates, sizes, 0.5).theta;
    });
    double mean = 0.0;
    for (double t : thetas) mean += t;
    mean /= reps;
    CHECK(std::abs(mean - 3.0) < 0.15 * 3.0);
}

TEST_CASE("null_quantile_T: isotropic sentinel near the MP edge; quantile endpoints") {
    MateConfig config;
    config.monte_carlo_copies = 100;
    const Vector rates = Vector::Constant(400, 1.0);
    const double t = null_quantile_T(rates, kInf, 1.0, 400, config, 3);
    CHECK(t > 3.6);
    CHECK(t < 4.1);

    config.monte_carlo_copies = 7;
    config.beta = 0.999;  // -> minimum draw
    const double tmin = null_quantile_T(rates.head(30), kInf, 1.0, 40, config, 4);
    config.beta = 1e-9;  // -> maximum draw
    const double tmax = null_quantile_T(rates.head(30), kInf, 1.0, 40, config, 4);
    config.beta = 0.5;
    const double tmid = null_quantile_T(rates.head(30), kInf, 1.0, 40, config, 4);
    CHECK(tmin <= tmid);
    CHECK(tmid <= tmax);
}

TEST_CASE("mate_isotropic: far-below-threshold null gives zero") {
    FactorModelSpec model;
    model.d = 100;
    model.n = 200;
    MateConfig config;
    config.r_max = 8;
    config.monte_carlo_copies = 100;
    const IncompleteMatrix xo = draw(model, Homogeneous{0.8}, 99);
    const MateResult res = mate_isotropic(xo, Grouping::homogeneous(), config, 99);
    CHECK(res.r_hat == 0);
    CHECK(res.regime == Regime::homogeneous);
    CHECK(res.v > 0.0);
    CHECK(res.iterations <= config.max_iterations + 1);
}

TEST_CASE("mate_isotropic: homogeneous and K=1 feature grouping agree") {
    FactorModelSpec model;
    model.d = 120;
    model.n = 240;
    model.spikes = {5.0, 4.0};
    MateConfig config;
    config.r_max = 8;
    config.monte_carlo_copies = 80;
    const IncompleteMatrix xo = draw(model, Homogeneous{0.85}, 7);
    const MateResult h = mate_isotropic(xo, Grouping::homogeneous(), config, 7);
    const MateResult f = mate_isotropic(xo, Grouping::feature({120}), config, 7);
    CHECK(h.r_hat == f.r_hat);
    CHECK(h.sigma2_hat == doctest::Approx(f.sigma2_hat).epsilon(1e-12));
    CHECK(h.v == doctest::Approx(f.v).epsilon(1e-8));
    CHECK(h.r_hat == 2);
}

TEST_CASE("mate_isotropic: unidentifiable block throws") {
    IncompleteMatrix x;
    x.values = Matrix::Zero(40, 50);
    x.mask = BoolMatrix::Constant(40, 50, false);
    for (Index i = 0; i < 20; ++i)
        for (Index j = 0; j < 50; ++j) {
            x.mask(i, j) = true;
            x.values(i, j) = 0.1 * (i + j % 7);
        }
    MateConfig config;
    config.r_max = 5;
    config.monte_carlo_copies = 4;
    CHECK_THROWS_AS(mate_isotropic(x, Grouping::feature({20, 20}), config, 1), ParameterError);
}

TEST_CASE("mate_isotropic: consistency at scale in the Theorem-1 regime") {
    // d=500, n=1000, p=0.7, Model-1 spikes: P(r_hat = r_1) >= 0.8 with r_1 = 5
    FactorModelSpec model = make_model(1, 500, 1000);
    const double thr = mp_edge(1.0, 1.0, 0.5).population_threshold();
    const int r1 = count_identifiable(model.spikes, thr);
    CHECK(r1 == 5);

    MateConfig config;
    config.r_max = 8;
    config.monte_carlo_copies = 200;
    config.calibration = std::make_shared<NullCalibration>(
        simulate_null_calibration(Homogeneous{0.7}, 500, 1000, config, 404));
    const int reps = 200;
    std::vector<int> hits(reps);
    parallel_for(reps, [&](std::int64_t i) {
        const IncompleteMatrix xo = draw(model, Homogeneous{0.7}, 70000 + i);
        hits[i] = mate_isotropic(xo, Grouping::homogeneous(), config, 70000 + i).r_hat == r1;
    });
    int total = 0;
    for (int h : hits) total += h;
    CHECK(static_cast<double>(total) / reps >= 0.8);
}

TEST_CASE("threshold_count at Example-3 complete-data scale") {
    // fixed (v, eps) = ((1 + sqrt(0.25))^2, 0.01) as in the source table
    const int reps = 200;
    std::vector<int> counts(reps);
    parallel_for(reps, [&](std::int64_t i) {
        FactorModelSpec model;
        model.d = 250;
        model.n = 1000;
        model.spikes = {5.0, 4.0, 2.4};
        const Matrix x = generate_complete(model, 31000 + i);
        const SpectrumResult s = sample_cov_eigs(IncompleteMatrix::fully_observed(x));
        counts[i] = threshold_count(s, 2.25, 0.01);
    });
    double mean = 0.0;
    for (int c : counts) mean += c;
    mean /= reps;
    CHECK(mean > 2.80);
    CHECK(mean < 3.10);
}

TEST_CASE("mate_anisotropic: pure-noise panel converges to zero quickly") {
    FactorModelSpec model;
    model.d = 150;
    model.n = 300;
    model.noise = GammaDiagonal{3.0, 1.0};
    MateConfig config;
    config.monte_carlo_copies = 80;
    const IncompleteMatrix xo = draw(model, Homogeneous{0.9}, 55);
    const MateResult res = mate_anisotropic(xo, config, 55);
    CHECK(res.r_hat == 0);
    CHECK(res.converged);
    CHECK(res.iterations <= 3);
    CHECK(res.sigma2_hat == doctest::Approx(1.0).epsilon(0.1));
    CHECK(res.theta_hat > 1.5);
    CHECK(res.theta_hat < 6.0);
    CHECK(res.regime == Regime::anisotropic);
}

TEST_CASE("mate_anisotropic: termination and convergence rate on a null batch") {
    FactorModelSpec model;
    model.d = 150;
    model.n = 300;
    model.noise = GammaDiagonal{3.0, 1.0};
    MateConfig config;
    config.monte_carlo_copies = 60;
    const int reps = 30;
    std::vector<int> iters(reps), conv(reps);
    parallel_for(reps, [&](std::int64_t i) {
        const IncompleteMatrix xo = draw(model, Homogeneous{0.8}, 60000 + i);
        const MateResult res = mate_anisotropic(xo, config, 60000 + i);
        iters[i] = res.iterations;
        conv[i] = res.converged;
    });
    int converged = 0;
    for (int i = 0; i < reps; ++i) {
        CHECK(iters[i] <= config.max_iterations);
        converged += conv[i];
    }
    CHECK(converged >= static_cast<int>(0.95 * reps));
}

TEST_CASE("baseline_m_er: argmax of adjacent ratios, scale-free in p") {
    std::vector<double> w{10.0, 5.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    const SpectrumResult s = spectrum_of(w, 10);
    CHECK(baseline_m_er(s, 1.0, 5) == 2);
    CHECK(baseline_m_er(s, 0.3, 5) == 2);
    std::vector<double> zeros{4.0, 1.0, 0.0, 0.0};
    CHECK_THROWS_AS(baseline_m_er(spectrum_of(zeros, 4), 1.0, 3), ParameterError);
}

TEST_CASE("baseline_m_gr: dominant spike, scale-free in p") {
    std::vector<double> w{50.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    const SpectrumResult s = spectrum_of(w, 10);
    CHECK(baseline_m_gr(s, 1.0, 5) == 1);
    CHECK(baseline_m_gr(s, 0.5, 5) == 1);
}

TEST_CASE("baseline_m_ed: a large gap is found; flat spectra give zero") {
    std::vector<double> w;
    for (int i = 0; i < 40; ++i) w.push_back(i < 2 ? 20.0 - i : 3.0 - 0.01 * i);
    const SpectrumResult gap = spectrum_of(w, 40);
    CHECK(baseline_m_ed(gap, 1.0, 8) == 2);

    std::vector<double> flat(40, 2.0);
    CHECK(baseline_m_ed(spectrum_of(flat, 40), 1.0, 8) == 0);
}
