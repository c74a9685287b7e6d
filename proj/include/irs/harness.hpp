#pragma once

// Experiment harness: configuration, classifier descriptors, input sets and
// the certify / recertify / compare / zeta / gamma-sweep runs behind the CLI.

#include "irs/cache_store.hpp"
#include "irs/certify.hpp"
#include "irs/classifier.hpp"
#include "irs/incremental.hpp"
#include "irs/table.hpp"
#include "irs/worker_pool.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace irs::harness {

/// Environment variable holding the adapter launch command for external
/// classifier descriptors that do not name one.
inline constexpr const char* kAdapterCommandEnv = "IRS_ADAPTER_CMD";

inline const std::vector<double> kDefaultGammas = {0.9, 0.95, 0.975, 0.99, 0.995, 0.999};

struct ExperimentConfig {
    nlohmann::json original;
    nlohmann::json approximated;
    nlohmann::json inputs;
    std::optional<std::vector<ClassIndex>> labels;

    double sigma = 1.0;
    std::size_t n0 = 100;
    std::size_t n = 10'000;
    double alpha = 0.001;
    double alpha_zeta = 0.001;
    double gamma = 0.99;
    std::uint64_t seed = 0;
    std::size_t batch_size = 256;

    std::vector<double> np_fractions = {0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10};
    std::vector<double> gammas = kDefaultGammas;
    std::size_t repetitions = 1;
    /// 0 means one per logical core.
    std::size_t workers = 0;

    std::filesystem::path cache;
    /// "-" or empty writes to stdout.
    std::string output;
    bool json_lines = false;

    void validate() const;
    CertifyParams certify_params() const;
    /// alpha_b = alpha + alpha_zeta.
    double baseline_alpha() const { return alpha + alpha_zeta; }
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Descriptor kinds: "threshold", "linear", "table", "external". Analytic
/// factories hand out one shared immutable instance; external factories open
/// a new connection per call.
ClassifierFactory make_classifier_factory(const nlohmann::json& descriptor, std::size_t dimension);

struct InputSet {
    std::size_t dimension = 0;
    std::vector<std::string> ids;
    /// Row-major, ids.size() x dimension.
    std::vector<double> data;

    std::size_t size() const { return ids.size(); }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * dimension, dimension}; }
    void push(std::string id, std::span<const double> x);
};

/// Source kinds: "list", "file", "random", "grid", "balanced".
InputSet load_inputs(const nlohmann::json& source, const std::filesystem::path& base_dir = {});

/// Raw vector file: u32 count, u32 dim, then count*dim f32, little-endian.
void write_input_file(const std::filesystem::path& path, const InputSet& inputs);
InputSet read_input_file(const std::filesystem::path& path);

/// Resolved experiment: inputs materialized, classifiers constructible.
struct Experiment {
    ExperimentConfig config;
    InputSet inputs;
    ClassifierFactory original;
    ClassifierFactory approximated;
    /// One per input.
    std::vector<ClassIndex> labels;
};

/// Missing labels default to the original classifier's prediction on the
/// clean input.
Experiment prepare(const ExperimentConfig& config, const std::filesystem::path& base_dir = {});
std::vector<ClassIndex> clean_predictions(const Classifier& h, const InputSet& inputs);

/// Master seed of input i for repetition `rep`; rep 0 is the certification
/// seed stored in the cache.
std::uint64_t input_seed(std::uint64_t global_seed, std::size_t index, std::size_t rep = 0);

struct InputFailure {
    std::size_t index = 0;
    std::string input_id;
    std::string message;
};

struct CertifyRun {
    std::vector<std::optional<CertificationOutcome>> outcomes;
    std::vector<double> seconds;
    CacheHeader header;
    std::vector<CacheRecord> records;
    std::vector<InputFailure> failures;

    Table table(const InputSet& inputs) const;
};

/// Certifies the original classifier on every input; writes the cache when
/// config.cache is set.
CertifyRun run_certify(const Experiment& exp);

/// Loads config.cache, pointing at `certify` when it is missing.
CacheFile load_cache_for(const ExperimentConfig& config);

enum class RecertifyPath { Zeta, Fallback, Scratch };
std::string_view to_string(RecertifyPath path);

struct Recertification {
    CertificationOutcome outcome;
    RecertifyPath path = RecertifyPath::Zeta;
    std::optional<ZetaEstimate> zeta;
    double seconds = 0.0;
};

/// IRS for certified cache records. Abstained records have nothing to reuse:
/// f^p is certified from scratch with n0 + n_p samples at alpha + alpha_zeta.
Recertification recertify_one(const Classifier& fp, std::span<const double> x, const CacheRecord& record,
                              const ExperimentConfig& config, std::size_t n_p, std::uint64_t seed, double gamma);

struct RecertifyRun {
    std::size_t n_p = 0;
    std::vector<std::optional<Recertification>> results;
    std::vector<InputFailure> failures;

    Table table(const InputSet& inputs) const;
};

/// n_p = round(fraction * cached n), at least 1.
std::size_t np_from_fraction(double fraction, std::size_t n);

RecertifyRun run_recertify(const Experiment& exp, const CacheFile& cache, std::size_t n_p);

struct ComparisonRow {
    std::size_t n_p = 0;
    double fraction = 0.0;
    double acr_baseline = 0.0;
    double acr_irs = 0.0;
    /// Mean wall-clock seconds per input.
    double mean_time_baseline = 0.0;
    double mean_time_irs = 0.0;
    double certified_baseline = 0.0;
    double certified_irs = 0.0;
    /// Over inputs where at least one method certifies the true label.
    std::size_t irs_greater = 0;
    std::size_t irs_equal = 0;
    std::size_t irs_less = 0;
};

Table comparison_table(const std::vector<ComparisonRow>& rows);

struct CompareRun {
    std::vector<ComparisonRow> rows;
    std::vector<InputFailure> failures;
};

/// For each n_p fraction: IRS from the cache against a from-scratch baseline
/// (n0 + n_p fresh samples at alpha + alpha_zeta), both on the approximated
/// classifier.
CompareRun run_compare(const Experiment& exp, const CacheFile& cache);

struct AocResult {
    /// Baseline area / IRS area; absent when the ACR ranges do not overlap.
    std::optional<double> speedup;
    double common_lo = 0.0;
    double common_hi = 0.0;
    double baseline_area = 0.0;
    double irs_area = 0.0;
    double baseline_acr_min = 0.0, baseline_acr_max = 0.0;
    double irs_acr_min = 0.0, irs_acr_max = 0.0;

    bool comparable() const { return speedup.has_value(); }
};

/// Area under time-versus-ACR for each method over the common ACR interval,
/// trapezoidal on the piecewise-linear curve through the rows sorted by ACR.
/// Throws DomainError with fewer than two rows.
AocResult aoc_speedup(const std::vector<ComparisonRow>& rows);

/// Area of the curve through (acr[i], time[i]) over [lo, hi].
double curve_area(std::vector<std::pair<double, double>> points, double lo, double hi);

struct GammaRow {
    double gamma = 0.0;
    std::size_t n_p = 0;
    double acr = 0.0;
    double mean_time = 0.0;
    double certified = 0.0;
    double zeta_branch_fraction = 0.0;
};

Table gamma_table(const std::vector<GammaRow>& rows);

/// IRS at n_p for every gamma in config.gammas.
std::vector<GammaRow> run_gamma_sweep(const Experiment& exp, const CacheFile& cache, std::size_t n_p,
                                      std::vector<InputFailure>* failures = nullptr);

struct ZetaRow {
    std::size_t n_p = 0;
    std::size_t inputs = 0;
    double mean_zeta = 0.0;
    double min_zeta = 0.0;
    double max_zeta = 0.0;
    double mean_disagreement_rate = 0.0;
    /// Mean closed-form disagreement, when both classifiers admit it.
    std::optional<double> mean_exact_disagreement;
};

Table zeta_table(const std::vector<ZetaRow>& rows);

/// zeta over the certified cache records, one row per n_p fraction.
std::vector<ZetaRow> run_zeta_report(const Experiment& exp, const CacheFile& cache,
                                     std::vector<InputFailure>* failures = nullptr);

Table failure_table(const std::vector<InputFailure>& failures);

}  // namespace irs::harness
