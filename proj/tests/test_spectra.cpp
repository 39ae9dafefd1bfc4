#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mate/datagen.hpp"
#include "mate/parallel.hpp"
#include "mate/rng.hpp"
#include "mate/spectra.hpp"

using namespace mate;

TEST_CASE("sample_cov_eigs: zero matrix and scalar row") {
    IncompleteMatrix zero;
    zero.values = Matrix::Zero(5, 8);
    zero.mask = BoolMatrix::Constant(5, 8, true);
    const SpectrumResult s = sample_cov_eigs(zero);
    CHECK(s.eigenvalues.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.gamma_n == doctest::Approx(5.0 / 8.0));

    IncompleteMatrix scalar;
    scalar.values = Matrix::Constant(1, 12, 3.0);
    scalar.mask = BoolMatrix::Constant(1, 12, true);
    const SpectrumResult t = sample_cov_eigs(scalar);
    CHECK(t.eigenvalues.size() == 1);
    CHECK(t.eigenvalues[0] == doctest::Approx(9.0));
}

TEST_CASE("sample_cov_eigs: gram side is padded when d > n") {
    FactorModelSpec spec;
    spec.d = 30;
    spec.n = 10;
    const Matrix x = generate_complete(spec, 2);
    const SpectrumResult s = sample_cov_eigs(IncompleteMatrix::fully_observed(x));
    CHECK(s.eigenvalues.size() == 30);
    for (Index i = 10; i < 30; ++i) CHECK(s.eigenvalues[i] == 0.0);
    for (Index i = 1; i < 30; ++i) CHECK(s.eigenvalues[i] <= s.eigenvalues[i - 1]);
}

TEST_CASE("sample_cov_eigs: masked null edge matches the closed form") {
    // p (1 + sqrt(gamma))^2 = 0.7 * (1 + sqrt(0.5))^2 ~ 2.039949
    FactorModelSpec spec;
    spec.d = 1000;
    spec.n = 2000;
    const Matrix x = generate_complete(spec, 31);
    const IncompleteMatrix xo = apply_mcar(x, Homogeneous{0.7}, 32);
    const double top = sample_cov_eigs(xo).eigenvalues[0];
    CHECK(std::abs(top - 2.039949) < 0.03 * 2.039949);
}

TEST_CASE("trimmed_moments: spike exclusion and bounds") {
    SpectrumResult s;
    s.eigenvalues = (Vector(3) << 1.0, 1.0, 1.0).finished();
    s.d = 3;
    s.n = 3;
    auto [b1, b2] = trimmed_moments(s, 0);
    CHECK(b1 == doctest::Approx(1.0));
    CHECK(b2 == doctest::Approx(1.0));

    SpectrumResult spiked;
    spiked.eigenvalues = (Vector(5) << 4.0, 1.0, 1.0, 1.0, 1.0).finished();
    spiked.d = 5;
    spiked.n = 5;
    auto [c1, c2] = trimmed_moments(spiked, 1);
    CHECK(c1 == doctest::Approx(1.0));
    CHECK(c2 == doctest::Approx(1.0));

    CHECK_THROWS_AS(trimmed_moments(spiked, 5), ParameterError);
    CHECK_THROWS_AS(trimmed_moments(spiked, -1), ParameterError);
}

TEST_CASE("trimmed_moments: gamma-diagonal null second moment") {
    // beta_2 -> (1 + gamma + 1/theta) sigma^4 = 1 + 0.5 + 1/3 = 1.8333
    FactorModelSpec spec;
    spec.d = 500;
    spec.n = 1000;
    spec.noise = GammaDiagonal{3.0, 1.0};
    double b2_mean = 0.0;
    const int draws = 3;
    for (int i = 0; i < draws; ++i) {
        const Matrix x = generate_complete(spec, 100 + i);
        const SpectrumResult s = sample_cov_eigs(IncompleteMatrix::fully_observed(x));
        b2_mean += trimmed_moments(s, 0).second;
    }
    b2_mean /= draws;
    CHECK(std::abs(b2_mean - 1.8333) < 0.05 * 1.8333);
}

TEST_CASE("moment_of_matrix: closed forms and the Wishart second moment") {
    CHECK(moment_of_matrix(Matrix::Identity(5, 5), 1) == doctest::Approx(1.0));
    Matrix diag = Matrix::Zero(2, 2);
    diag(0, 0) = 2.0;
    CHECK(moment_of_matrix(diag, 2) == doctest::Approx(2.0));
    CHECK_THROWS_AS(moment_of_matrix(Matrix::Zero(2, 3), 1), DimensionError);
    CHECK_THROWS_AS(moment_of_matrix(diag, 3), ParameterError);

    // Lemma: beta_2(S_n) ~ beta_2(Sigma) + gamma beta_1^2(Sigma) = 1 + 0.5
    FactorModelSpec spec;
    spec.d = 300;
    spec.n = 600;
    const Matrix x = generate_complete(spec, 7);
    const Matrix s = x * x.transpose() / 600.0;
    CHECK(std::abs(moment_of_matrix(s, 2) - 1.5) < 0.05 * 1.5);
}

TEST_CASE("gram symmetry: both sides carry the same nonzero spectrum") {
    FactorModelSpec spec;
    spec.d = 50;
    spec.n = 80;
    spec.spikes = {4.0};
    const Matrix x = generate_complete(spec, 5);
    const IncompleteMatrix xo = apply_mcar(x, Homogeneous{0.8}, 6);
    const Vector a = sample_cov_eigs(xo).eigenvalues;
    IncompleteMatrix t;
    t.values = xo.values.transpose() * std::sqrt(50.0 / 80.0);
    // (1/d) X^T X has the same nonzero eigenvalues as (1/n) X X^T scaled by n/d;
    // rescaling the transpose matrix by sqrt(d/n) aligns the two.
    t.mask = xo.mask.transpose();
    const Vector b = sample_cov_eigs(t).eigenvalues;
    for (Index i = 0; i < 50; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9 * std::max(1.0, a[0]));
}

TEST_CASE("scaling: eigenvalues are quadratic in the data scale") {
    FactorModelSpec spec;
    spec.d = 40;
    spec.n = 60;
    spec.spikes = {3.0};
    const Matrix x = generate_complete(spec, 9);
    const IncompleteMatrix xo = apply_mcar(x, Homogeneous{0.9}, 10);
    IncompleteMatrix scaled = xo;
    scaled.values *= 3.0;
    const Vector a = sample_cov_eigs(xo).eigenvalues;
    const Vector b = sample_cov_eigs(scaled).eigenvalues;
    for (Index i = 0; i < a.size(); ++i)
        CHECK(std::abs(b[i] - 9.0 * a[i]) <= 1e-12 * std::max(1.0, b[0]));
}

TEST_CASE("homogeneous missingness rescales the spectrum by p") {
    // over seeds: mean lambda_1(p=0.7)/0.7 within 3% of mean lambda_1(p=1)
    const int seeds = 200;
    std::vector<double> full(seeds), masked(seeds);
    parallel_for(seeds, [&](std::int64_t i) {
        FactorModelSpec spec;
        spec.d = 500;
        spec.n = 1000;
        spec.spikes = {4.0, 3.0};
        const Matrix x = generate_complete(spec, 5000 + i);
        full[i] = largest_cov_eig(x);
        const IncompleteMatrix xo = apply_mcar(x, Homogeneous{0.7}, 9000 + i);
        masked[i] = largest_cov_eig(xo.values);
    });
    double mf = 0.0, mm = 0.0;
    for (int i = 0; i < seeds; ++i) {
        mf += full[i];
        mm += masked[i];
    }
    mf /= seeds;
    mm /= seeds;
    CHECK(std::abs(mm / 0.7 - mf) < 0.03 * mf);
}
