#include "irs/classifier.hpp"

#include "irs/errors.hpp"
#include "irs/interval_stats.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <numeric>
#include <sstream>

namespace irs {

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

std::string_view to_string(ClassifierKind kind) {
    switch (kind) {
    case ClassifierKind::Threshold1D: return "threshold";
    case ClassifierKind::LinearMulticlass: return "linear";
    case ClassifierKind::Table: return "table";
    case ClassifierKind::External: return "external";
    }
    return "unknown";
}

std::size_t Classifier::checked_rows(std::span<const double> inputs) const {
    const std::size_t dim = dimension();
    if (dim == 0 || inputs.size() % dim != 0) {
        throw DomainError("input batch of " + std::to_string(inputs.size()) + " values is not a multiple of dimension " +
                          std::to_string(dim));
    }
    return inputs.size() / dim;
}

std::vector<ClassIndex> Classifier::predict_batch(const std::vector<std::vector<double>>& inputs) const {
    std::vector<double> flat;
    flat.reserve(inputs.size() * dimension());
    for (const auto& row : inputs) {
        if (row.size() != dimension()) {
            throw DomainError("input of dimension " + std::to_string(row.size()) + " given to a classifier of dimension " +
                              std::to_string(dimension()));
        }
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return predict_batch(std::span<const double>(flat));
}

// --- Threshold1D ---------------------------------------------------------

ThresholdClassifier::ThresholdClassifier(double threshold, Orientation orientation, std::size_t dimension)
    : threshold_(threshold), orientation_(orientation), dimension_(dimension) {
    if (!std::isfinite(threshold)) throw DomainError("threshold must be finite");
    if (dimension == 0) throw DomainError("classifier dimension must be at least 1");
}

std::string ThresholdClassifier::identity() const {
    return "threshold(t=" + fmt_double(threshold_) +
           ",orientation=" + (orientation_ == Orientation::AbovePositive ? "above" : "below") +
           ",dim=" + std::to_string(dimension_) + ")";
}

std::vector<ClassIndex> ThresholdClassifier::predict_batch(std::span<const double> inputs) const {
    const std::size_t rows = checked_rows(inputs);
    std::vector<ClassIndex> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const bool above = inputs[i * dimension_] >= threshold_;
        out[i] = (above == (orientation_ == Orientation::AbovePositive)) ? 1 : 0;
    }
    return out;
}

// --- LinearMulticlass ----------------------------------------------------

LinearClassifier::LinearClassifier(std::vector<double> weights, std::vector<double> bias, std::size_t dimension)
    : weights_(std::move(weights)), bias_(std::move(bias)), dimension_(dimension) {
    if (dimension_ == 0) throw DomainError("classifier dimension must be at least 1");
    if (bias_.size() < 2) throw DomainError("a classifier needs at least two labels");
    if (weights_.size() != bias_.size() * dimension_) {
        throw DomainError("weight matrix must be label_count x dimension");
    }
}

std::string LinearClassifier::identity() const {
    // Content hash keeps the identity short for large weight matrices.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xFF;
            h *= 0x100000001b3ULL;
        }
    };
    std::for_each(weights_.begin(), weights_.end(), feed);
    std::for_each(bias_.begin(), bias_.end(), feed);
    std::ostringstream os;
    os << "linear(labels=" << bias_.size() << ",dim=" << dimension_ << ",fnv1a64=" << std::hex << h << ")";
    return os.str();
}

std::vector<ClassIndex> LinearClassifier::predict_batch(std::span<const double> inputs) const {
    const std::size_t rows = checked_rows(inputs);
    const std::size_t labels = bias_.size();
    std::vector<ClassIndex> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto x = inputs.subspan(i * dimension_, dimension_);
        ClassIndex best = 0;
        double best_score = -INFINITY;
        for (std::size_t k = 0; k < labels; ++k) {
            const double score = dot(std::span<const double>(weights_).subspan(k * dimension_, dimension_), x) + bias_[k];
            if (score > best_score) {
                best_score = score;
                best = static_cast<ClassIndex>(k);
            }
        }
        out[i] = best;
    }
    return out;
}

// --- Table ---------------------------------------------------------------

TableClassifier::TableClassifier(std::vector<double> origin, std::vector<double> cell_size,
                                 std::vector<std::size_t> shape, std::vector<ClassIndex> labels,
                                 std::size_t label_count)
    : origin_(std::move(origin)),
      cell_size_(std::move(cell_size)),
      shape_(std::move(shape)),
      labels_(std::move(labels)),
      label_count_(label_count) {
    if (origin_.empty()) throw DomainError("table classifier needs at least one axis");
    if (cell_size_.size() != origin_.size() || shape_.size() != origin_.size()) {
        throw DomainError("table origin, cell size and shape must have equal length");
    }
    if (label_count_ < 2) throw DomainError("a classifier needs at least two labels");
    std::size_t cells = 1;
    for (std::size_t d = 0; d < shape_.size(); ++d) {
        if (shape_[d] == 0) throw DomainError("table shape entries must be positive");
        if (!(cell_size_[d] > 0.0)) throw DomainError("table cell sizes must be positive");
        cells *= shape_[d];
    }
    if (labels_.size() != cells) throw DomainError("table label count does not match its shape");
    for (ClassIndex label : labels_) {
        if (label >= label_count_) throw DomainError("table label out of range");
    }
}

std::string TableClassifier::identity() const {
    std::ostringstream os;
    os << "table(dim=" << origin_.size() << ",cells=" << labels_.size() << ",labels=" << label_count_ << ")";
    return os.str();
}

std::vector<ClassIndex> TableClassifier::predict_batch(std::span<const double> inputs) const {
    const std::size_t rows = checked_rows(inputs);
    const std::size_t dim = origin_.size();
    std::vector<ClassIndex> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t flat = 0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double pos = std::floor((inputs[i * dim + d] - origin_[d]) / cell_size_[d]);
            const double clamped = std::clamp(pos, 0.0, static_cast<double>(shape_[d] - 1));
            flat = flat * shape_[d] + static_cast<std::size_t>(clamped);
        }
        out[i] = labels_[flat];
    }
    return out;
}

std::vector<double> TableClassifier::cell_center(std::size_t flat_index) const {
    if (flat_index >= labels_.size()) throw DomainError("table cell index out of range");
    std::vector<double> center(origin_.size());
    for (std::size_t d = origin_.size(); d-- > 0;) {
        const std::size_t idx = flat_index % shape_[d];
        flat_index /= shape_[d];
        center[d] = origin_[d] + (static_cast<double>(idx) + 0.5) * cell_size_[d];
    }
    return center;
}

// --- exact oracles -------------------------------------------------------

std::optional<HalfSpace> as_half_space(const Classifier& h) {
    if (const auto* t = dynamic_cast<const ThresholdClassifier*>(&h)) {
        HalfSpace hs;
        hs.normal.assign(t->dimension(), 0.0);
        const bool above = t->orientation() == ThresholdClassifier::Orientation::AbovePositive;
        hs.normal[0] = above ? 1.0 : -1.0;
        hs.offset = above ? t->threshold() : -t->threshold();
        return hs;
    }
    if (const auto* l = dynamic_cast<const LinearClassifier*>(&h); l != nullptr && l->label_count() == 2) {
        const std::size_t dim = l->dimension();
        const auto w = l->weights();
        HalfSpace hs;
        hs.normal.resize(dim);
        for (std::size_t j = 0; j < dim; ++j) hs.normal[j] = w[dim + j] - w[j];
        const double norm = std::sqrt(dot(hs.normal, hs.normal));
        const double shift = l->bias()[1] - l->bias()[0];
        if (norm == 0.0) {
            // Constant classifier; encode as an always/never-true half-space.
            hs.normal.assign(dim, 0.0);
            hs.offset = shift > 0.0 ? -INFINITY : INFINITY;
            return hs;
        }
        for (double& v : hs.normal) v /= norm;
        hs.offset = -shift / norm;
        return hs;
    }
    return std::nullopt;
}

double exact_smoothed_probability(const Classifier& h, std::span<const double> x, double sigma, ClassIndex c) {
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    const auto hs = as_half_space(h);
    if (!hs) {
        throw UnsupportedOracleError("no closed-form smoothing oracle for " + std::string(to_string(h.kind())) +
                                     " classifiers with " + std::to_string(h.label_count()) + " labels");
    }
    if (x.size() != h.dimension()) throw DomainError("input dimension does not match classifier");
    if (c >= 2) throw DomainError("class index out of range for a two-class oracle");
    double p1;
    if (std::isinf(hs->offset)) {
        p1 = hs->offset < 0 ? 1.0 : 0.0;
    } else {
        p1 = stats::normal_cdf((dot(hs->normal, x) - hs->offset) / sigma);
    }
    return c == 1 ? p1 : 1.0 - p1;
}

double exact_disagreement_probability(const Classifier& f, const Classifier& fp, std::span<const double> x,
                                      double sigma) {
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    const auto a = as_half_space(f);
    const auto b = as_half_space(fp);
    if (!a || !b) throw UnsupportedOracleError("disagreement oracle needs two half-space classifiers");
    if (f.dimension() != fp.dimension() || x.size() != f.dimension()) {
        throw DomainError("input dimension does not match classifiers");
    }
    if (std::isinf(a->offset) || std::isinf(b->offset)) {
        throw UnsupportedOracleError("disagreement oracle does not cover constant classifiers");
    }
    bool parallel = true, anti = true;
    for (std::size_t j = 0; j < a->normal.size(); ++j) {
        parallel = parallel && std::abs(a->normal[j] - b->normal[j]) <= 1e-12;
        anti = anti && std::abs(a->normal[j] + b->normal[j]) <= 1e-12;
    }
    if (!parallel && !anti) {
        throw UnsupportedOracleError("disagreement oracle needs classifiers with a shared normal direction");
    }
    if (!parallel) {
        // f^p = 1 iff u <= -b.offset with u = <n, x + eps>: they disagree on
        // u >= max(a, -b) and on u < min(a, -b).
        const double u = dot(a->normal, x);
        const double lo = std::min(a->offset, -b->offset);
        const double hi = std::max(a->offset, -b->offset);
        return stats::normal_cdf((u - hi) / sigma) + stats::normal_cdf((lo - u) / sigma);
    }
    const double s = dot(a->normal, x);
    const double lo = std::min(a->offset, b->offset);
    const double hi = std::max(a->offset, b->offset);
    // Mass of the slab lo <= s + eta < hi; use upper tails right of s to
    // avoid cancellation.
    if (lo > s) return stats::normal_cdf((s - lo) / sigma) - stats::normal_cdf((s - hi) / sigma);
    return stats::normal_cdf((hi - s) / sigma) - stats::normal_cdf((lo - s) / sigma);
}

}  // namespace irs
