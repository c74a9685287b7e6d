#include "irs/certify.hpp"

#include "irs/errors.hpp"
#include "irs/interval_stats.hpp"

#include <algorithm>
#include <limits>

namespace irs {

void CertifyParams::validate() const {
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    if (n0 == 0) throw DomainError("n0 must be at least 1");
    if (n == 0) throw DomainError("n must be at least 1");
    stats::ConfidenceBoundSpec{stats::IntervalMethod::ClopperPearson, alpha}.validate();
    if (batch_size == 0) throw DomainError("batch size must be positive");
}

CertificationOutcome CertificationOutcome::abstain(double p_lower, std::size_t samples) {
    CertificationOutcome out;
    out.status = CertificationStatus::Abstain;
    out.p_lower = p_lower;
    out.samples_used = samples;
    return out;
}

CertificationOutcome CertificationOutcome::certify(ClassIndex prediction, double p_lower, double radius,
                                                   std::size_t samples) {
    CertificationOutcome out;
    out.status = CertificationStatus::Certified;
    out.prediction = prediction;
    out.p_lower = p_lower;
    out.radius = radius;
    out.samples_used = samples;
    return out;
}

bool same_result(const CertificationOutcome& a, const CertificationOutcome& b) {
    return a.status == b.status && a.prediction == b.prediction && a.radius == b.radius && a.p_lower == b.p_lower &&
           a.samples_used == b.samples_used;
}

std::optional<double> radius_from_lower_bound(double p_lower, double sigma) {
    if (!(p_lower > 0.5)) return std::nullopt;
    if (p_lower >= 1.0) return std::numeric_limits<double>::infinity();
    return sigma * stats::inverse_normal_cdf(p_lower);
}

std::vector<ClassIndex> predict_under_noise(const Classifier& h, std::span<const double> x, const NoiseSpec& noise,
                                            std::span<const std::uint64_t> seeds, std::size_t batch_size) {
    const std::size_t dim = noise.dimension;
    if (x.size() != dim || h.dimension() != dim) {
        throw DomainError("input of dimension " + std::to_string(x.size()) + " does not match classifier dimension " +
                          std::to_string(h.dimension()));
    }
    std::vector<ClassIndex> out;
    out.reserve(seeds.size());
    std::vector<double> batch;
    for (std::size_t start = 0; start < seeds.size(); start += batch_size) {
        const std::size_t count = std::min(batch_size, seeds.size() - start);
        batch.resize(count * dim);
        for (std::size_t i = 0; i < count; ++i) {
            std::span<double> row(batch.data() + i * dim, dim);
            sample_noise_into(noise, seeds[start + i], row);
            for (std::size_t j = 0; j < dim; ++j) row[j] += x[j];
        }
        const auto labels = h.predict_batch(std::span<const double>(batch));
        if (labels.size() != count) throw TransportError("classifier returned the wrong number of labels");
        out.insert(out.end(), labels.begin(), labels.end());
    }
    return out;
}

std::vector<std::size_t> class_counts(std::span<const ClassIndex> predictions, std::size_t label_count) {
    std::vector<std::size_t> counts(label_count, 0);
    for (ClassIndex c : predictions) {
        if (c >= label_count) throw DomainError("prediction " + std::to_string(c) + " outside the label set");
        ++counts[c];
    }
    return counts;
}

ClassIndex top_class(std::span<const std::size_t> counts) {
    if (counts.empty()) throw DomainError("no classes to choose from");
    // max_element returns the first maximum, i.e. the lowest index on ties.
    return static_cast<ClassIndex>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

CertifyResult certify(const Classifier& h, std::span<const double> x, const CertifyParams& params,
                      std::string input_id) {
    params.validate();
    const auto start = std::chrono::steady_clock::now();
    NoiseSpec noise{params.sigma, x.size(), std::string(kDefaultGeneratorId)};
    noise.validate();

    const auto selection_seeds = derive_seed_list(branch_seed(params.master_seed, SeedBranch::Selection), params.n0);
    const auto selection = predict_under_noise(h, x, noise, selection_seeds, params.batch_size);
    const ClassIndex c_hat = top_class(class_counts(selection, h.label_count()));

    auto seeds = derive_seed_list(params.master_seed, params.n);
    auto predictions = predict_under_noise(h, x, noise, seeds, params.batch_size);
    const auto hits = static_cast<std::uint64_t>(std::count(predictions.begin(), predictions.end(), c_hat));
    const double p_lower =
        stats::lower_confidence_bound({hits, params.n}, {stats::IntervalMethod::ClopperPearson, params.alpha});

    const std::size_t used = params.n0 + params.n;
    CertifyResult result;
    if (const auto radius = radius_from_lower_bound(p_lower, params.sigma)) {
        result.outcome = CertificationOutcome::certify(c_hat, p_lower, *radius, used);
    } else {
        result.outcome = CertificationOutcome::abstain(p_lower, used);
    }

    CacheRecord& rec = result.record;
    rec.input_id = std::move(input_id);
    rec.input_digest = input_digest(x);
    rec.top_class = c_hat;
    rec.sigma = params.sigma;
    rec.alpha = params.alpha;
    rec.n = params.n;
    rec.generator_id = noise.generator_id;
    if (result.outcome.certified()) {
        rec.p_lower = p_lower;
        rec.seeds = std::move(seeds);
        rec.predictions = std::move(predictions);
    }
    result.outcome.elapsed = std::chrono::steady_clock::now() - start;
    return result;
}

double average_certified_radius(std::span<const LabeledOutcome> outcomes) {
    if (outcomes.empty()) throw DomainError("average certified radius of an empty set");
    double total = 0.0;
    for (const auto& o : outcomes) {
        if (o.outcome.certified() && o.outcome.prediction == o.true_label) total += o.outcome.radius;
    }
    return total / static_cast<double>(outcomes.size());
}

}  // namespace irs
