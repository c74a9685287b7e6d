#pragma once

// Incremental recertification of an approximated classifier f^p from the
// cached certification of f.
//
// When the cached lower bound p_A is below gamma, f^p is evaluated on the
// first n_p cached noise samples; the number of disagreements with f's cached
// predictions gives a Clopper-Pearson upper bound zeta on
// P(f(x+eps) != f^p(x+eps)), and p_A - zeta lower-bounds f^p's top-class
// probability with confidence 1 - (alpha + alpha_zeta). Otherwise f^p is
// sampled afresh at that combined confidence.

#include "irs/cache_store.hpp"
#include "irs/certify.hpp"
#include "irs/classifier.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace irs {

struct IrsParams {
    double sigma = 1.0;
    std::size_t n_p = 1'000;
    /// Confidence parameter of the cached certification.
    double alpha = 0.001;
    double alpha_zeta = 0.001;
    /// Cached p_A at or above which f^p is re-estimated directly.
    double gamma = 0.99;
    /// Seeds the fresh samples of the high-p_A branch.
    std::uint64_t master_seed = 0;
    std::size_t batch_size = 256;

    void validate() const;
};

struct ZetaEstimate {
    double zeta = 1.0;
    std::size_t disagreements = 0;
    std::size_t samples = 0;
};

enum class IrsBranch { Zeta, Fallback };

struct IrsResult {
    CertificationOutcome outcome;
    IrsBranch branch = IrsBranch::Zeta;
    /// Set on the zeta branch.
    std::optional<ZetaEstimate> zeta;
};

/// Checks that `cache` was produced for x with the live generator and the
/// requested sigma/alpha; throws CacheIncompatibleError otherwise.
void check_cache_compatible(const CacheRecord& cache, std::span<const double> x, const IrsParams& params);

/// Upper confidence bound on P(f(x+eps) != fp(x+eps)) from the first n_p
/// cached samples.
ZetaEstimate estimate_zeta(const Classifier& fp, std::span<const double> x, const IrsParams& params,
                           const CacheRecord& cache);

IrsResult certify_irs(const Classifier& fp, std::span<const double> x, const IrsParams& params,
                      const CacheRecord& cache);

/// sigma * Phi^-1(p_lower - zeta) when p_lower - zeta > 1/2.
std::optional<double> irs_radius(double p_lower, double zeta, double sigma);

/// (sigma/2) (Phi^-1(p_lower - zeta) - Phi^-1(p_upper_b + zeta)), the radius
/// before p_B is replaced by 1 - p_A. Requires both arguments in (0, 1).
double irs_radius_two_sided(double p_lower, double p_upper_b, double zeta, double sigma);

}  // namespace irs
