#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mate/edges.hpp"
#include "mate/rng.hpp"

using namespace mate;

namespace {
const DiscreteMeasure kExample3{{0.4, 0.9}, {0.5, 0.5}};
double psi_mp(double alpha, double gamma) { return alpha + gamma * alpha / (alpha - 1.0); }
}  // namespace

TEST_CASE("mp_edge: closed forms") {
    CHECK(mp_edge(1.0, 1.0, 1.0).lambda_plus == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(*mp_edge(1.0, 1.0, 0.25).alpha_plus == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(mp_edge(0.7, 1.0, 0.5).lambda_plus == doctest::Approx(2.039949493661166).epsilon(1e-12));
    CHECK_THROWS_AS(mp_edge(0.0, 1.0, 1.0), ParameterError);
    CHECK_THROWS_AS(mp_edge(0.5, -1.0, 1.0), ParameterError);
    CHECK_THROWS_AS(mp_edge(0.5, 1.0, 0.0), ParameterError);
}

TEST_CASE("psi_feature: limits, scaling and poles") {
    CHECK(psi_feature(2.0, 0.0, kExample3) == doctest::Approx(2.0).epsilon(1e-14));

    // a single atom sigma^2 reduces to sigma^2 psi_MP(alpha / sigma^2)
    const double sigma2 = 1.7;
    const DiscreteMeasure single = DiscreteMeasure::point_mass(sigma2);
    for (double alpha0 : {1.5, 2.0, 4.0})
        CHECK(psi_feature(sigma2 * alpha0, 0.5, single) ==
              doctest::Approx(sigma2 * psi_mp(alpha0, 0.5)).epsilon(1e-12));

    CHECK(psi_feature(1.223, 0.25, kExample3) == doctest::Approx(1.7233).epsilon(2e-4));
    CHECK_THROWS_AS(psi_feature(0.9, 0.25, kExample3), ParameterError);
}

TEST_CASE("feature_edge: degenerate atoms match the closed form") {
    Rng rng(77);
    for (int i = 0; i < 40; ++i) {
        const double p = 0.1 + 0.9 * rng.uniform();
        const double sigma2 = 0.3 + 2.0 * rng.uniform();
        const double gamma = 0.1 + 2.0 * rng.uniform();
        const DiscreteMeasure two{{p * sigma2, p * sigma2 * (1.0 + 1e-16)}, {0.5, 0.5}};
        const EdgeResult uneven = feature_edge(gamma, two);
        const EdgeResult closed = mp_edge(p, sigma2, gamma);
        CHECK(std::abs(uneven.lambda_plus - closed.lambda_plus) < 1e-8 * closed.lambda_plus);
        CHECK(std::abs(*uneven.alpha_plus - *closed.alpha_plus) < 1e-8 * *closed.alpha_plus);
    }
}

TEST_CASE("feature_edge: Example 3 critical point") {
    const EdgeResult e = feature_edge(0.25, kExample3);
    CHECK(std::abs(*e.alpha_plus - 1.223) < 1e-3);
    CHECK(e.lambda_plus == doctest::Approx(1.7232688288).epsilon(1e-6));
    // psi'(alpha_plus) vanishes at the solver tolerance
    CHECK(std::abs(psi_feature_derivative(*e.alpha_plus, 0.25, kExample3)) < 1e-10);
    // psi' is positive right of alpha_plus
    for (double step : {1e-4, 1e-2, 0.1, 1.0, 10.0})
        CHECK(psi_feature_derivative(*e.alpha_plus + step, 0.25, kExample3) > 0.0);
}

TEST_CASE("feature_edge: heterogeneity moves the edge off the homogeneous line") {
    const double uneven = feature_edge(0.5, DiscreteMeasure{{0.8, 0.4}, {0.5, 0.5}}).lambda_plus;
    const double even = feature_edge(0.5, DiscreteMeasure{{0.6, 0.6 * (1 + 1e-16)}, {0.5, 0.5}}).lambda_plus;
    CHECK(std::abs(uneven - even) > 0.05);
}

TEST_CASE("feature_edge: monotone in the rates") {
    for (double base1 = 0.1; base1 <= 0.9; base1 += 0.2) {
        for (double base2 = 0.1; base2 <= 0.9; base2 += 0.2) {
            const double lam = feature_edge(0.5, {{base1, base2 + 1e-12}, {0.5, 0.5}}).lambda_plus;
            const double lam_up =
                feature_edge(0.5, {{base1 + 0.1, base2 + 0.1}, {0.5, 0.5}}).lambda_plus;
            CHECK(lam_up >= lam - 1e-12);
        }
    }
}

TEST_CASE("sample_edge: homogeneous degenerate case") {
    const double q = 0.8;
    const EdgeResult e = sample_edge(2.0, DiscreteMeasure::point_mass(q), 1.0);
    const double expected = q * (1.0 + std::sqrt(2.0)) * (1.0 + std::sqrt(2.0));
    CHECK(e.lambda_plus == doctest::Approx(expected).epsilon(1e-9));
    // population threshold -1/s2(a1) = sigma2 (1 + sqrt(gamma)), rate-free
    CHECK(e.population_threshold() == doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("sample_edge: transpose duality against the feature edge on a grid") {
    for (double q1 = 0.2; q1 <= 1.0; q1 += 0.2) {
        for (double q2 = 0.2; q2 <= 1.0; q2 += 0.2) {
            DiscreteMeasure m{{q1, q2}, {0.5, 0.5}};
            if (q1 == q2) m = DiscreteMeasure::point_mass(q1);
            // duality vs direct consistency is enforced inside sample_edge
            const EdgeResult lam2 = sample_edge(2.0, m, 1.0);
            const double lam1 = feature_edge(0.5, m).lambda_plus;
            CHECK(lam2.lambda_plus == doctest::Approx(2.0 * lam1).epsilon(1e-9));
        }
    }
}

TEST_CASE("sample_s2_at: homogeneous spike inversion anchor") {
    // z = q psi_MP(lambda) maps back to s2(z) = -1/lambda
    const double q = 0.7, gamma = 0.5, lambda = 3.0;
    const double z = q * psi_mp(lambda, gamma);
    const double s2 = sample_s2_at(z, gamma, DiscreteMeasure::point_mass(q), 1.0);
    CHECK(-1.0 / s2 == doctest::Approx(lambda).epsilon(1e-6));
}

TEST_CASE("spike_limit_feature: Example 3 values and the continuity limit") {
    CHECK(spike_limit_feature(2.0, 0.25, kExample3) == doctest::Approx(2.267).epsilon(1e-3));
    CHECK(spike_limit_feature(1.6, 0.25, kExample3) == doctest::Approx(1.9238).epsilon(1e-3));

    const EdgeResult e = feature_edge(0.25, kExample3);
    const double near = spike_limit_feature(*e.alpha_plus + 1e-6, 0.25, kExample3);
    CHECK(std::abs(near - e.lambda_plus) < 1e-4);

    CHECK_THROWS_AS(spike_limit_feature(*e.alpha_plus - 0.01, 0.25, kExample3), ParameterError);
}

TEST_CASE("spike_limit_feature: homogeneous degenerate reduces to psi_MP") {
    const double p = 0.6, gamma = 0.5;
    const double lam = spike_limit_feature(3.0 * p, gamma, DiscreteMeasure::point_mass(p));
    CHECK(lam == doctest::Approx(p * psi_mp(3.0, gamma)).epsilon(1e-10));
}

TEST_CASE("count_identifiable: Example 3 and the empty list") {
    const std::vector<double> complete{5.0, 4.0, 2.4};
    CHECK(count_identifiable(complete, 1.5) == 3);
    const std::vector<double> adjusted{2.0, 1.6, 0.96};
    CHECK(count_identifiable(adjusted, 1.223) == 2);
    CHECK(count_identifiable(std::vector<double>{}, 1.0) == 0);
    // strictness: a spike exactly at the threshold is excluded
    CHECK(count_identifiable(std::vector<double>{1.5}, 1.5) == 0);
}

TEST_CASE("psi_feature_inverse: round trip above the edge") {
    const EdgeResult e = feature_edge(0.25, kExample3);
    for (double alpha : {1.3, 1.7, 2.5, 6.0}) {
        const double y = psi_feature(alpha, 0.25, kExample3);
        CHECK(psi_feature_inverse(y, 0.25, kExample3, e) == doctest::Approx(alpha).epsilon(1e-10));
    }
    // below the edge clamps to alpha_plus
    CHECK(psi_feature_inverse(0.5 * e.lambda_plus, 0.25, kExample3, e) ==
          doctest::Approx(*e.alpha_plus));
}
