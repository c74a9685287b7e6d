#include "irs/interval_stats.hpp"

#include "irs/errors.hpp"

#include <boost/math/policies/policy.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace irs::stats {

namespace {

namespace bmp = boost::math::policies;

// Stay in double precision and cap Halley/Newton iterations at 200.
using NumericPolicy = bmp::policy<bmp::promote_double<false>, bmp::max_root_iterations<200>>;

double one_sided_z(double alpha) {
    return inverse_normal_cdf(1.0 - alpha);
}

struct ScoreInterval {
    double lower;
    double upper;
};

ScoreInterval wilson(BinomialSample s, double alpha) {
    const double n = static_cast<double>(s.trials);
    const double p_hat = static_cast<double>(s.successes) / n;
    const double z = one_sided_z(alpha);
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p_hat + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n));
    return {std::clamp(center - half, 0.0, 1.0), std::clamp(center + half, 0.0, 1.0)};
}

ScoreInterval agresti_coull(BinomialSample s, double alpha) {
    const double z = one_sided_z(alpha);
    const double z2 = z * z;
    const double n_tilde = static_cast<double>(s.trials) + z2;
    const double p_tilde = (static_cast<double>(s.successes) + z2 / 2.0) / n_tilde;
    const double half = z * std::sqrt(p_tilde * (1.0 - p_tilde) / n_tilde);
    return {std::clamp(p_tilde - half, 0.0, 1.0), std::clamp(p_tilde + half, 0.0, 1.0)};
}

}  // namespace

std::string_view to_string(IntervalMethod method) {
    switch (method) {
    case IntervalMethod::ClopperPearson: return "clopper-pearson";
    case IntervalMethod::Wilson: return "wilson";
    case IntervalMethod::AgrestiCoull: return "agresti-coull";
    }
    return "unknown";
}

IntervalMethod parse_interval_method(std::string_view name) {
    if (name == "cp" || name == "clopper-pearson") return IntervalMethod::ClopperPearson;
    if (name == "wilson") return IntervalMethod::Wilson;
    if (name == "ac" || name == "agresti-coull") return IntervalMethod::AgrestiCoull;
    throw DomainError("unknown interval method '" + std::string(name) + "'");
}

void ConfidenceBoundSpec::validate() const {
    if (!(alpha > 0.0 && alpha <= 0.5)) {
        throw DomainError("alpha must lie in (0, 0.5], got " + std::to_string(alpha));
    }
}

void BinomialSample::validate() const {
    if (trials == 0) throw DomainError("binomial sample needs at least one trial");
    if (successes > trials) {
        throw DomainError("successes (" + std::to_string(successes) + ") exceed trials (" +
                          std::to_string(trials) + ")");
    }
}

double lower_confidence_bound(BinomialSample sample, ConfidenceBoundSpec spec) {
    sample.validate();
    spec.validate();
    switch (spec.method) {
    case IntervalMethod::Wilson: return wilson(sample, spec.alpha).lower;
    case IntervalMethod::AgrestiCoull: return agresti_coull(sample, spec.alpha).lower;
    case IntervalMethod::ClopperPearson: break;
    }
    const auto k = sample.successes;
    const auto n = sample.trials;
    if (k == 0) return 0.0;
    if (k == n) return std::pow(spec.alpha, 1.0 / static_cast<double>(n));
    return beta_quantile(spec.alpha, static_cast<double>(k), static_cast<double>(n - k + 1));
}

double upper_confidence_bound(BinomialSample sample, ConfidenceBoundSpec spec) {
    sample.validate();
    spec.validate();
    switch (spec.method) {
    case IntervalMethod::Wilson: return wilson(sample, spec.alpha).upper;
    case IntervalMethod::AgrestiCoull: return agresti_coull(sample, spec.alpha).upper;
    case IntervalMethod::ClopperPearson: break;
    }
    const auto k = sample.successes;
    const auto n = sample.trials;
    if (k == n) return 1.0;
    if (k == 0) return 1.0 - std::pow(spec.alpha, 1.0 / static_cast<double>(n));
    return beta_quantile(1.0 - spec.alpha, static_cast<double>(k + 1), static_cast<double>(n - k));
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("inverse_normal_cdf needs p in (0, 1), got " + std::to_string(p));
    }
    // Phi^-1(p) = -sqrt(2) erfc^-1(2p); evaluate the tail we can represent
    // best so the odd symmetry holds bit-for-bit.
    if (p > 0.5) return -inverse_normal_cdf(1.0 - p);
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p, NumericPolicy());
}

double regularized_incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0 && b > 0.0)) throw DomainError("beta shape parameters must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta argument must lie in [0, 1]");
    try {
        return boost::math::ibeta(a, b, x, NumericPolicy());
    } catch (const std::exception& e) {
        throw NumericsError(std::string("incomplete beta failed: ") + e.what());
    }
}

double beta_quantile(double q, double a, double b) {
    if (!(q > 0.0 && q < 1.0)) {
        throw DomainError("beta_quantile needs q in (0, 1), got " + std::to_string(q));
    }
    if (!(a > 0.0 && b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw DomainError("beta shape parameters must be positive and finite");
    }
    try {
        return boost::math::ibeta_inv(a, b, q, NumericPolicy());
    } catch (const std::exception& e) {
        throw NumericsError(std::string("beta quantile did not converge: ") + e.what());
    }
}

}  // namespace irs::stats
