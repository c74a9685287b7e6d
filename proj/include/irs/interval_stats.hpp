#pragma once

// One-sided binomial confidence bounds and the Gaussian / beta numerics the
// certificates are built on. All functions are pure and thread-safe.

#include <cstdint>
#include <string>
#include <string_view>

namespace irs::stats {

enum class IntervalMethod { ClopperPearson, Wilson, AgrestiCoull };

std::string_view to_string(IntervalMethod method);
/// Accepts "cp" / "clopper-pearson", "wilson", "ac" / "agresti-coull".
IntervalMethod parse_interval_method(std::string_view name);

/// Which bound to compute and its one-sided error rate; confidence is 1 - alpha.
struct ConfidenceBoundSpec {
    IntervalMethod method = IntervalMethod::ClopperPearson;
    double alpha = 0.001;

    /// Throws DomainError unless alpha is in (0, 0.5].
    void validate() const;
};

struct BinomialSample {
    std::uint64_t successes = 0;
    std::uint64_t trials = 1;

    /// Throws DomainError unless 0 <= successes <= trials and trials > 0.
    void validate() const;
};

/// One-sided lower bound on the success probability at confidence 1 - alpha.
///
/// Clopper-Pearson is exact: the alpha-quantile of Beta(k, n-k+1), with the
/// closed forms 0 (k = 0) and alpha^(1/n) (k = n) on the edges. Wilson and
/// Agresti-Coull use z = Phi^-1(1 - alpha) and are clamped to [0, 1].
double lower_confidence_bound(BinomialSample sample, ConfidenceBoundSpec spec);

/// Dual of lower_confidence_bound: the (1-alpha)-quantile of Beta(k+1, n-k)
/// for Clopper-Pearson, 1 when k = n and 1 - alpha^(1/n) when k = 0.
double upper_confidence_bound(BinomialSample sample, ConfidenceBoundSpec spec);

/// Standard normal CDF.
double normal_cdf(double x);

/// Phi^-1(p) for p in (0, 1); DomainError otherwise.
double inverse_normal_cdf(double p);

/// Regularized incomplete beta I_x(a, b).
double regularized_incomplete_beta(double x, double a, double b);

/// x with I_x(a, b) = q. Throws DomainError for q outside (0,1) or
/// non-positive shape parameters, NumericsError if the root finder does not
/// converge within 200 iterations.
double beta_quantile(double q, double a, double b);

}  // namespace irs::stats
