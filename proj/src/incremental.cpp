#include "irs/incremental.hpp"

#include "irs/errors.hpp"
#include "irs/interval_stats.hpp"

#include <algorithm>
#include <chrono>

namespace irs {

void IrsParams::validate() const {
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    if (n_p == 0) throw DomainError("n_p must be at least 1");
    if (!(alpha > 0.0) || !(alpha_zeta > 0.0)) throw DomainError("alpha and alpha_zeta must be positive");
    // The fallback branch bounds at alpha + alpha_zeta, which must itself be a
    // valid one-sided level.
    stats::ConfidenceBoundSpec{stats::IntervalMethod::ClopperPearson, alpha + alpha_zeta}.validate();
    if (!(gamma > 0.5 && gamma < 1.0)) throw DomainError("gamma must lie in (1/2, 1)");
    if (batch_size == 0) throw DomainError("batch size must be positive");
}

void check_cache_compatible(const CacheRecord& cache, std::span<const double> x, const IrsParams& params) {
    if (cache.generator_id != kDefaultGeneratorId) {
        throw CacheIncompatibleError("cache for '" + cache.input_id + "' was produced by generator '" +
                                     cache.generator_id + "', this engine runs '" + std::string(kDefaultGeneratorId) +
                                     "'");
    }
    if (cache.sigma != params.sigma) {
        throw CacheIncompatibleError("cache for '" + cache.input_id + "' uses sigma " + std::to_string(cache.sigma) +
                                     ", requested " + std::to_string(params.sigma));
    }
    if (cache.alpha != params.alpha) {
        throw CacheIncompatibleError("cache for '" + cache.input_id + "' was certified at alpha " +
                                     std::to_string(cache.alpha) + ", requested " + std::to_string(params.alpha));
    }
    if (cache.input_digest != input_digest(x)) {
        throw CacheIncompatibleError("cache record '" + cache.input_id + "' belongs to a different input vector");
    }
}

ZetaEstimate estimate_zeta(const Classifier& fp, std::span<const double> x, const IrsParams& params,
                           const CacheRecord& cache) {
    params.validate();
    check_cache_compatible(cache, x, params);
    if (params.n_p > cache.seeds.size()) {
        throw DomainError("n_p = " + std::to_string(params.n_p) + " exceeds the " + std::to_string(cache.seeds.size()) +
                          " cached samples of '" + cache.input_id + "'");
    }
    const NoiseSpec noise{params.sigma, x.size(), cache.generator_id};
    const auto seeds = std::span<const std::uint64_t>(cache.seeds).first(params.n_p);
    const auto fp_predictions = predict_under_noise(fp, x, noise, seeds, params.batch_size);

    ZetaEstimate est;
    est.samples = params.n_p;
    for (std::size_t i = 0; i < params.n_p; ++i) {
        if (fp_predictions[i] != cache.predictions[i]) ++est.disagreements;
    }
    est.zeta = stats::upper_confidence_bound({est.disagreements, est.samples},
                                             {stats::IntervalMethod::ClopperPearson, params.alpha_zeta});
    return est;
}

IrsResult certify_irs(const Classifier& fp, std::span<const double> x, const IrsParams& params,
                      const CacheRecord& cache) {
    params.validate();
    if (cache.abstained()) {
        throw CacheError("cache record '" + cache.input_id +
                         "' holds no certified lower bound; recertify this input from scratch");
    }
    check_cache_compatible(cache, x, params);
    const auto start = std::chrono::steady_clock::now();
    const ClassIndex c_hat = cache.top_class;
    const double p_lower = *cache.p_lower;

    IrsResult result;
    if (p_lower < params.gamma) {
        result.branch = IrsBranch::Zeta;
        const auto est = estimate_zeta(fp, x, params, cache);
        result.zeta = est;
        const double bound = p_lower - est.zeta;
        if (const auto radius = irs_radius(p_lower, est.zeta, params.sigma)) {
            result.outcome = CertificationOutcome::certify(c_hat, bound, *radius, params.n_p);
        } else {
            result.outcome = CertificationOutcome::abstain(std::max(bound, 0.0), params.n_p);
        }
    } else {
        result.branch = IrsBranch::Fallback;
        const NoiseSpec noise{params.sigma, x.size(), cache.generator_id};
        const auto seeds = derive_seed_list(branch_seed(params.master_seed, SeedBranch::Fallback), params.n_p);
        const auto predictions = predict_under_noise(fp, x, noise, seeds, params.batch_size);
        const auto hits = static_cast<std::uint64_t>(std::count(predictions.begin(), predictions.end(), c_hat));
        const double p_prime = stats::lower_confidence_bound(
            {hits, params.n_p}, {stats::IntervalMethod::ClopperPearson, params.alpha + params.alpha_zeta});
        if (const auto radius = radius_from_lower_bound(p_prime, params.sigma)) {
            result.outcome = CertificationOutcome::certify(c_hat, p_prime, *radius, params.n_p);
        } else {
            result.outcome = CertificationOutcome::abstain(p_prime, params.n_p);
        }
    }
    result.outcome.elapsed = std::chrono::steady_clock::now() - start;
    return result;
}

std::optional<double> irs_radius(double p_lower, double zeta, double sigma) {
    if (!(p_lower >= 0.0 && p_lower <= 1.0) || !(zeta >= 0.0 && zeta <= 1.0)) {
        throw DomainError("p_lower and zeta must lie in [0, 1]");
    }
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    return radius_from_lower_bound(p_lower - zeta, sigma);
}

double irs_radius_two_sided(double p_lower, double p_upper_b, double zeta, double sigma) {
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    return 0.5 * sigma *
           (stats::inverse_normal_cdf(p_lower - zeta) - stats::inverse_normal_cdf(p_upper_b + zeta));
}

}  // namespace irs
