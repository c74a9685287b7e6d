#pragma once

// Base classifiers f : R^m -> {0, ..., K-1}. The analytic kinds double as
// ground truth: their smoothed class probabilities have closed forms.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace irs {

using ClassIndex = std::uint32_t;

enum class ClassifierKind { Threshold1D, LinearMulticlass, Table, External };

std::string_view to_string(ClassifierKind kind);

class Classifier {
public:
    virtual ~Classifier() = default;

    virtual ClassifierKind kind() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::size_t label_count() const = 0;
    /// Stable description of the model, recorded in cache headers.
    virtual std::string identity() const = 0;

    /// `inputs` is row-major, count x dimension(). One label per row, in order.
    virtual std::vector<ClassIndex> predict_batch(std::span<const double> inputs) const = 0;

    std::vector<ClassIndex> predict_batch(const std::vector<std::vector<double>>& inputs) const;

protected:
    /// Throws DomainError unless inputs.size() is a multiple of dimension().
    std::size_t checked_rows(std::span<const double> inputs) const;
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

/// Decides on coordinate 0 only: class 1 iff x0 >= t (AbovePositive) or
/// x0 < t (BelowPositive).
class ThresholdClassifier final : public Classifier {
public:
    enum class Orientation { AbovePositive, BelowPositive };

    explicit ThresholdClassifier(double threshold, Orientation orientation = Orientation::AbovePositive,
                                 std::size_t dimension = 1);

    ClassifierKind kind() const override { return ClassifierKind::Threshold1D; }
    std::size_t dimension() const override { return dimension_; }
    std::size_t label_count() const override { return 2; }
    std::string identity() const override;
    std::vector<ClassIndex> predict_batch(std::span<const double> inputs) const override;
    using Classifier::predict_batch;

    double threshold() const { return threshold_; }
    Orientation orientation() const { return orientation_; }

private:
    double threshold_;
    Orientation orientation_;
    std::size_t dimension_;
};

/// argmax_k (W x + b)_k with ties to the lowest index.
class LinearClassifier final : public Classifier {
public:
    /// `weights` is row-major label_count x dimension.
    LinearClassifier(std::vector<double> weights, std::vector<double> bias, std::size_t dimension);

    ClassifierKind kind() const override { return ClassifierKind::LinearMulticlass; }
    std::size_t dimension() const override { return dimension_; }
    std::size_t label_count() const override { return bias_.size(); }
    std::string identity() const override;
    std::vector<ClassIndex> predict_batch(std::span<const double> inputs) const override;
    using Classifier::predict_batch;

    std::span<const double> weights() const { return weights_; }
    std::span<const double> bias() const { return bias_; }

private:
    std::vector<double> weights_;
    std::vector<double> bias_;
    std::size_t dimension_;
};

/// Piecewise-constant classifier over an axis-aligned grid. Cell index along
/// axis d is floor((x_d - origin_d) / cell_d), clamped to the grid.
class TableClassifier final : public Classifier {
public:
    TableClassifier(std::vector<double> origin, std::vector<double> cell_size, std::vector<std::size_t> shape,
                    std::vector<ClassIndex> labels, std::size_t label_count);

    ClassifierKind kind() const override { return ClassifierKind::Table; }
    std::size_t dimension() const override { return origin_.size(); }
    std::size_t label_count() const override { return label_count_; }
    std::string identity() const override;
    std::vector<ClassIndex> predict_batch(std::span<const double> inputs) const override;
    using Classifier::predict_batch;

    /// Center of the cell with the given row-major index.
    std::vector<double> cell_center(std::size_t flat_index) const;
    std::size_t cell_count() const { return labels_.size(); }
    ClassIndex label_at(std::size_t flat_index) const { return labels_.at(flat_index); }

private:
    std::vector<double> origin_;
    std::vector<double> cell_size_;
    std::vector<std::size_t> shape_;
    std::vector<ClassIndex> labels_;
    std::size_t label_count_;
};

/// Two-class analytic classifiers are half-spaces: class 1 iff u . x > offset
/// with |u| = 1 (boundaries have Gaussian measure zero).
struct HalfSpace {
    std::vector<double> normal;
    double offset = 0.0;
};

/// Half-space form of a Threshold1D or two-class LinearMulticlass handle.
std::optional<HalfSpace> as_half_space(const Classifier& h);

/// P_eps(f(x + eps) = c) for eps ~ N(0, sigma^2 I). Available for Threshold1D
/// and two-class LinearMulticlass; UnsupportedOracleError otherwise.
double exact_smoothed_probability(const Classifier& h, std::span<const double> x, double sigma, ClassIndex c);

/// P_eps(f(x + eps) != fp(x + eps)) for two half-space classifiers with
/// parallel or opposite normals (threshold pairs, bias-shifted linear pairs).
double exact_disagreement_probability(const Classifier& f, const Classifier& fp, std::span<const double> x,
                                      double sigma);

}  // namespace irs
