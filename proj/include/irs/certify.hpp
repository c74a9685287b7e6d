#pragma once

// Standard randomized-smoothing certification: pick the top class on n0
// samples, lower-bound its probability on n fresh samples, and turn the bound
// into an L2 radius sigma * Phi^-1(p_lower).

#include "irs/cache_store.hpp"
#include "irs/classifier.hpp"
#include "irs/noise_engine.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace irs {

struct CertifyParams {
    double sigma = 1.0;
    std::size_t n0 = 100;
    std::size_t n = 10'000;
    double alpha = 0.001;
    std::uint64_t master_seed = 0;
    /// Noisy inputs handed to the classifier per call.
    std::size_t batch_size = 256;

    void validate() const;
};

enum class CertificationStatus { Certified, Abstain };

struct CertificationOutcome {
    CertificationStatus status = CertificationStatus::Abstain;
    std::optional<ClassIndex> prediction;
    double radius = 0.0;
    double p_lower = 0.0;
    std::size_t samples_used = 0;
    std::chrono::nanoseconds elapsed{0};

    bool certified() const { return status == CertificationStatus::Certified; }

    static CertificationOutcome abstain(double p_lower, std::size_t samples);
    static CertificationOutcome certify(ClassIndex prediction, double p_lower, double radius, std::size_t samples);
};

/// Everything except wall time, which never reproduces.
bool same_result(const CertificationOutcome& a, const CertificationOutcome& b);

struct CertifyResult {
    CertificationOutcome outcome;
    CacheRecord record;
};

/// sigma * Phi^-1(p) when p > 1/2, nothing otherwise.
std::optional<double> radius_from_lower_bound(double p_lower, double sigma);

/// f's prediction on x + eps_i for each seed, in seed order. Batches of
/// `batch_size` noisy inputs are sent to the classifier per call.
std::vector<ClassIndex> predict_under_noise(const Classifier& h, std::span<const double> x, const NoiseSpec& noise,
                                            std::span<const std::uint64_t> seeds, std::size_t batch_size);

/// counts[c] over the predictions; label_count entries.
std::vector<std::size_t> class_counts(std::span<const ClassIndex> predictions, std::size_t label_count);

/// Index of the largest count, lowest index on ties.
ClassIndex top_class(std::span<const std::size_t> counts);

/// Certifies h around x. The n estimation samples use
/// derive_seed_list(master_seed, n) and are returned in the cache record; the
/// n0 selection samples come from an independent branch and are not cached.
CertifyResult certify(const Classifier& h, std::span<const double> x, const CertifyParams& params,
                      std::string input_id = {});

struct LabeledOutcome {
    CertificationOutcome outcome;
    ClassIndex true_label = 0;
};

/// Mean radius over inputs, counting abstentions and wrong predictions as 0.
double average_certified_radius(std::span<const LabeledOutcome> outcomes);

}  // namespace irs
