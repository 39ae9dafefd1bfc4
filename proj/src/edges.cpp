#include "mate/edges.hpp"

#include <algorithm>
#include <cmath>

namespace mate {

namespace {

constexpr int kBisectIters = 200;

double bisect(double lo, double hi, const auto& f, double flo) {
    // f(lo) and f(hi) must have opposite signs; flo = f(lo).
    for (int it = 0; it < kBisectIters && (hi - lo) > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

void DiscreteMeasure::validate() const {
    if (atoms.empty() || atoms.size() != weights.size())
        throw ParameterError("discrete measure: atoms and weights must be nonempty, equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (!(atoms[i] > 0.0) || !std::isfinite(atoms[i]))
            throw ParameterError("discrete measure: atoms must be positive and finite");
        if (weights[i] < 0.0) throw ParameterError("discrete measure: negative weight");
        total += weights[i];
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ParameterError("discrete measure: weights sum to " + std::to_string(total));
}

double DiscreteMeasure::max_atom() const {
    return *std::max_element(atoms.begin(), atoms.end());
}

DiscreteMeasure DiscreteMeasure::scaled(double c) const {
    DiscreteMeasure out = *this;
    for (double& a : out.atoms) a *= c;
    return out;
}

double EdgeResult::population_threshold() const {
    if (alpha_plus) return *alpha_plus;
    if (s2_edge) return -1.0 / *s2_edge;
    throw SolverError("edge result carries no population threshold");
}

EdgeResult mp_edge(double p, double sigma2, double gamma) {
    if (!(p > 0.0 && p <= 1.0)) throw ParameterError("mp_edge: p outside (0, 1]");
    if (!(sigma2 > 0.0)) throw ParameterError("mp_edge: sigma2 must be positive");
    if (!(gamma > 0.0)) throw ParameterError("mp_edge: gamma must be positive");
    const double root = std::sqrt(gamma);
    EdgeResult out;
    out.lambda_plus = p * sigma2 * (1.0 + root) * (1.0 + root);
    out.alpha_plus = p * sigma2 * (1.0 + root);
    out.method = EdgeMethod::closed_form;
    return out;
}

double psi_feature(double alpha, double gamma, const DiscreteMeasure& m) {
    m.validate();
    double sum = 0.0;
    for (std::size_t j = 0; j < m.atoms.size(); ++j) {
        const double t = m.atoms[j];
        if (alpha == t) throw ParameterError("psi: alpha hits the atom " + std::to_string(t));
        sum += m.weights[j] * alpha * t / (alpha - t);
    }
    return alpha + gamma * sum;
}

double psi_feature_derivative(double alpha, double gamma, const DiscreteMeasure& m) {
    m.validate();
    double sum = 0.0;
    for (std::size_t j = 0; j < m.atoms.size(); ++j) {
        const double t = m.atoms[j];
        if (alpha == t) throw ParameterError("psi': alpha hits the atom " + std::to_string(t));
        const double gap = alpha - t;
        sum += m.weights[j] * t * t / (gap * gap);
    }
    return 1.0 - gamma * sum;
}

EdgeResult feature_edge(double gamma, const DiscreteMeasure& m) {
    if (!(gamma > 0.0)) throw ParameterError("feature_edge: gamma must be positive");
    m.validate();
    const double tmax = m.max_atom();
    // psi' is strictly increasing right of the support (psi'' > 0 there), so a
    // single bracket suffices: -inf at the support edge, -> 1 at infinity.
    const double lo0 = tmax * (1.0 + 1e-9);
    double hi = tmax * (1.0 + std::sqrt(gamma)) * (1.0 + std::sqrt(gamma)) * 10.0;
    int guard = 0;
    while (psi_feature_derivative(hi, gamma, m) <= 0.0) {
        hi *= 2.0;
        if (++guard > 200)
            throw SolverError("feature_edge: psi' stayed negative up to " + std::to_string(hi));
    }
    const double flo = psi_feature_derivative(lo0, gamma, m);
    if (flo >= 0.0)
        throw SolverError("feature_edge: no bracket, psi'(" + std::to_string(lo0) +
                          ") = " + std::to_string(flo));
    const double alpha_plus =
        bisect(lo0, hi, [&](double a) { return psi_feature_derivative(a, gamma, m); }, flo);
    EdgeResult out;
    out.alpha_plus = alpha_plus;
    out.lambda_plus = psi_feature(alpha_plus, gamma, m);
    out.method = EdgeMethod::psi_root;
    return out;
}

double psi_feature_inverse(double y, double gamma, const DiscreteMeasure& m,
                           const EdgeResult& edge) {
    const double alpha_plus = *edge.alpha_plus;
    if (y <= edge.lambda_plus) return alpha_plus;  // inside the bulk: stick to the boundary
    double lo = alpha_plus * (1.0 + 1e-12);
    double hi = std::max(y, lo * 2.0);
    int guard = 0;
    while (psi_feature(hi, gamma, m) < y) {
        hi *= 2.0;
        if (++guard > 200) throw SolverError("psi inverse: no upper bracket");
    }
    const double flo = psi_feature(lo, gamma, m) - y;
    return bisect(lo, hi, [&](double a) { return psi_feature(a, gamma, m) - y; }, flo);
}

double spike_limit_feature(double tilde_lambda, double gamma, const DiscreteMeasure& m) {
    const EdgeResult edge = feature_edge(gamma, m);
    if (!(tilde_lambda > *edge.alpha_plus))
        throw ParameterError("spike " + std::to_string(tilde_lambda) +
                             " is not identifiable (alpha_+ = " + std::to_string(*edge.alpha_plus) + ")");
    return psi_feature(tilde_lambda, gamma, m);
}

namespace {

// Self-consistent system for sample-specific missingness with isotropic noise:
//   f(z, s)   = -s + sum_l w_l q_l / (-z + q_l c(s)),   c(s) = gamma sigma2 / (1 + sigma2 s)
//   df/ds     = -1 + gamma sigma2^2 / (1 + sigma2 s)^2 * sum_l w_l q_l^2 / (-z + q_l c(s))^2
struct SampleSystem {
    double gamma;
    double sigma2;
    const DiscreteMeasure& mq;

    double c(double s) const { return gamma * sigma2 / (1.0 + sigma2 * s); }

    double f(double z, double s) const {
        const double cs = c(s);
        double sum = 0.0;
        for (std::size_t l = 0; l < mq.atoms.size(); ++l) {
            const double q = mq.atoms[l];
            sum += mq.weights[l] * q / (q * cs - z);
        }
        return -s + sum;
    }

    double fs(double z, double s) const {
        const double u = 1.0 + sigma2 * s;
        const double cs = c(s);
        double sum = 0.0;
        for (std::size_t l = 0; l < mq.atoms.size(); ++l) {
            const double q = mq.atoms[l];
            const double gap = q * cs - z;
            sum += mq.weights[l] * q * q / (gap * gap);
        }
        return -1.0 + gamma * sigma2 * sigma2 / (u * u) * sum;
    }

    // Root of df/ds in z right of the largest pole; df/ds decreases from +inf
    // to -1 there, so the root is unique.
    double z_critical(double s) const {
        const double pole = mq.max_atom() * c(s);
        const double lo = pole * (1.0 + 1e-13) + 1e-300;
        double hi = pole + std::max(1.0, pole);
        int guard = 0;
        while (fs(hi, s) >= 0.0) {
            hi = pole + (hi - pole) * 2.0;
            if (++guard > 400) throw SolverError("sample edge: df/ds has no sign change in z");
        }
        const double flo = fs(lo, s);
        return bisect(lo, hi, [&](double z) { return fs(z, s); }, flo);
    }
};

}  // namespace

EdgeResult sample_edge(double gamma, const DiscreteMeasure& mq, double sigma2) {
    if (!(gamma > 0.0)) throw ParameterError("sample_edge: gamma must be positive");
    if (!(sigma2 > 0.0)) throw ParameterError("sample_edge: sigma2 must be positive");
    mq.validate();

    // Primary route: transpose duality. The transposed problem is
    // feature-specific with aspect 1/gamma and covariance-rate atoms
    // sigma2 * q_l; its edge scales back by gamma.
    const EdgeResult dual = feature_edge(1.0 / gamma, mq.scaled(sigma2));
    const double a1_dual = gamma * dual.lambda_plus;

    // Cross-check: scan s in (-1/sigma2, 0), solve df/ds = 0 for z, and keep
    // the critical pairs where f vanishes as well; a1 is the largest such z.
    const SampleSystem sys{gamma, sigma2, mq};
    const double s_lo = -(1.0 - 1e-9) / sigma2;
    const double s_hi = -1e-9 / sigma2;
    const int grid = 4000;
    double a1_direct = -kInf;
    double s2_at_edge = 0.0;
    double prev_s = s_lo;
    double prev_g = sys.f(sys.z_critical(prev_s), prev_s);
    for (int i = 1; i <= grid; ++i) {
        const double s = s_lo + (s_hi - s_lo) * static_cast<double>(i) / grid;
        const double g = sys.f(sys.z_critical(s), s);
        if (g == 0.0 || (g < 0.0) != (prev_g < 0.0)) {
            const double s_root = bisect(prev_s, s,
                                         [&](double t) { return sys.f(sys.z_critical(t), t); },
                                         prev_g);
            const double z_root = sys.z_critical(s_root);
            if (std::abs(sys.f(z_root, s_root)) < 1e-8 && z_root > a1_direct) {
                a1_direct = z_root;
                s2_at_edge = s_root;
            }
        }
        prev_s = s;
        prev_g = g;
    }
    if (!std::isfinite(a1_direct))
        throw SolverError("sample_edge: direct system found no critical pair in s in (" +
                          std::to_string(s_lo) + ", " + std::to_string(s_hi) + ")");
    if (std::abs(a1_direct - a1_dual) > 1e-6 * std::abs(a1_dual))
        throw SolverError("sample_edge: duality (" + std::to_string(a1_dual) +
                          ") and direct system (" + std::to_string(a1_direct) +
                          ") disagree beyond 1e-6 relative");

    EdgeResult out;
    out.lambda_plus = a1_dual;
    out.s2_edge = s2_at_edge;
    out.method = EdgeMethod::duality;
    return out;
}

double sample_s2_at(double z, double gamma, const DiscreteMeasure& mq, double sigma2) {
    mq.validate();
    const SampleSystem sys{gamma, sigma2, mq};
    // Stieltjes branch: the root of f(z, .) closest to zero. Scan the whole
    // admissible interval; poles of f in s are filtered by the residual check.
    const double s_lo = -(1.0 - 1e-9) / sigma2;
    const double s_hi = -1e-12 / sigma2;
    const int grid = 4000;
    double best = kInf;
    double prev_s = s_lo;
    double prev_g = sys.f(z, prev_s);
    for (int i = 1; i <= grid; ++i) {
        const double s = s_lo + (s_hi - s_lo) * static_cast<double>(i) / grid;
        const double g = sys.f(z, s);
        if (std::isfinite(g) && std::isfinite(prev_g) && ((g < 0.0) != (prev_g < 0.0))) {
            const double s_root =
                bisect(prev_s, s, [&](double t) { return sys.f(z, t); }, prev_g);
            if (std::abs(sys.f(z, s_root)) < 1e-8) best = s_root;  // rightmost so far
        }
        prev_s = s;
        prev_g = g;
    }
    if (!std::isfinite(best) || best >= 0.0)
        throw SolverError("s2(z): no Stieltjes root found at z = " + std::to_string(z) +
                          " (is z right of the bulk?)");
    return best;
}

int count_identifiable(std::span<const double> spikes, double threshold) {
    int count = 0;
    for (double s : spikes)
        if (s > threshold) ++count;
    return count;
}

}  // namespace mate
