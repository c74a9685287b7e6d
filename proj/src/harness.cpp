#include "irs/harness.hpp"

#include "irs/errors.hpp"
#include "irs/noise_engine.hpp"
#include "irs/wire_protocol.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

namespace irs::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<T>();
}

std::vector<double> require_vector(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw UsageError(std::string("classifier descriptor lacks '") + key + "'");
    return j.at(key).get<std::vector<double>>();
}

ClassifierPtr make_linear(const nlohmann::json& d, std::size_t dim) {
    if (d.contains("normal")) {
        // Two-class half-space: class 1 iff normal . x > offset.
        const auto normal = require_vector(d, "normal");
        const double offset = get_or(d, "offset", 0.0);
        std::vector<double> weights(normal.size(), 0.0);
        weights.insert(weights.end(), normal.begin(), normal.end());
        return std::make_shared<LinearClassifier>(std::move(weights), std::vector<double>{0.0, -offset},
                                                  normal.size());
    }
    const auto rows = d.at("weights").get<std::vector<std::vector<double>>>();
    const auto bias = require_vector(d, "bias");
    if (rows.empty()) throw UsageError("linear classifier needs at least one weight row");
    const std::size_t m = rows.front().size();
    if (m != dim) {
        throw UsageError("linear classifier has dimension " + std::to_string(m) + ", inputs have " +
                         std::to_string(dim));
    }
    std::vector<double> weights;
    for (const auto& r : rows) {
        if (r.size() != m) throw UsageError("linear classifier weight rows differ in length");
        weights.insert(weights.end(), r.begin(), r.end());
    }
    return std::make_shared<LinearClassifier>(std::move(weights), bias, m);
}

std::unique_ptr<wire::ByteStream> open_endpoint(const nlohmann::json& d) {
    if (d.contains("tcp")) {
        const auto endpoint = d.at("tcp").get<std::string>();
        const auto colon = endpoint.rfind(':');
        if (colon == std::string::npos) throw UsageError("tcp endpoint must be host:port, got '" + endpoint + "'");
        const int port = std::stoi(endpoint.substr(colon + 1));
        if (port <= 0 || port > 65535) throw UsageError("tcp port out of range in '" + endpoint + "'");
        return wire::connect_tcp(endpoint.substr(0, colon), static_cast<std::uint16_t>(port));
    }
    std::string command = get_or<std::string>(d, "command", "");
    if (command.empty()) {
        const char* env = std::getenv(kAdapterCommandEnv);
        if (env == nullptr || *env == '\0') {
            throw UsageError(std::string("external classifier has no 'command' or 'tcp' and ") + kAdapterCommandEnv +
                             " is unset");
        }
        command = env;
    }
    return std::make_unique<wire::SubprocessStream>(command);
}

InputSet generate_random(const nlohmann::json& s) {
    const auto count = s.at("count").get<std::size_t>();
    const auto dim = s.at("dim").get<std::size_t>();
    const double scale = get_or(s, "scale", 1.0);
    const auto seed = get_or<std::uint64_t>(s, "seed", 0);
    if (dim == 0) throw UsageError("random inputs need dim >= 1");
    InputSet set;
    set.dimension = dim;
    if (count == 0) return set;
    const NoiseSpec spec{scale, dim, std::string(kDefaultGeneratorId)};
    const auto seeds = derive_seed_list(seed, count);
    for (std::size_t i = 0; i < count; ++i) set.push("x" + std::to_string(i), sample_noise(spec, seeds[i]));
    return set;
}

// Points along coordinate 0 from lo to hi inclusive, other coordinates zero.
InputSet generate_grid(const nlohmann::json& s) {
    const auto count = s.at("count").get<std::size_t>();
    const auto dim = get_or<std::size_t>(s, "dim", 1);
    const double lo = s.at("lo").get<double>();
    const double hi = s.at("hi").get<double>();
    if (dim == 0) throw UsageError("grid inputs need dim >= 1");
    InputSet set;
    set.dimension = dim;
    std::vector<double> x(dim, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        x[0] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
        set.push("g" + std::to_string(i), x);
    }
    return set;
}

// Alternating x0 = +offset / -offset; the remaining coordinates are N(0, scale^2).
InputSet generate_balanced(const nlohmann::json& s) {
    const auto count = s.at("count").get<std::size_t>();
    const auto dim = s.at("dim").get<std::size_t>();
    const double offset = s.at("offset").get<double>();
    const double scale = get_or(s, "scale", 1.0);
    const auto seed = get_or<std::uint64_t>(s, "seed", 0);
    if (dim == 0) throw UsageError("balanced inputs need dim >= 1");
    InputSet set;
    set.dimension = dim;
    if (count == 0) return set;
    const NoiseSpec spec{scale, dim, std::string(kDefaultGeneratorId)};
    const auto seeds = derive_seed_list(seed, count);
    for (std::size_t i = 0; i < count; ++i) {
        auto x = sample_noise(spec, seeds[i]);
        x[0] = i % 2 == 0 ? offset : -offset;
        set.push("b" + std::to_string(i), x);
    }
    return set;
}

std::uint32_t read_u32(std::istream& in, const std::filesystem::path& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw UsageError("input file " + path.string() + " is truncated");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

double effective_radius(const CertificationOutcome& o, ClassIndex label) {
    return o.certified() && o.prediction == label ? o.radius : 0.0;
}

nlohmann::json optional_prediction(const CertificationOutcome& o) {
    return o.prediction ? nlohmann::json(*o.prediction) : nlohmann::json(nullptr);
}

std::string_view status_name(const CertificationOutcome& o) { return o.certified() ? "certified" : "abstain"; }

void record_failure(std::vector<InputFailure>& failures, std::mutex& mutex, std::size_t index, const InputSet& in,
                    const std::exception& e) {
    std::lock_guard lock(mutex);
    failures.push_back({index, in.ids[index], e.what()});
}

void sort_failures(std::vector<InputFailure>& failures) {
    std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
}

// Cache record per input, nullptr when missing.
std::vector<const CacheRecord*> match_records(const Experiment& exp, const CacheFile& cache) {
    std::vector<const CacheRecord*> out(exp.inputs.size(), nullptr);
    for (std::size_t i = 0; i < exp.inputs.size(); ++i) out[i] = cache.find(exp.inputs.ids[i]);
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (!(sigma > 0.0)) throw UsageError("sigma must be positive");
    if (n0 == 0 || n == 0) throw UsageError("n0 and n must be at least 1");
    if (!(alpha > 0.0 && alpha <= 0.5)) throw UsageError("alpha must lie in (0, 0.5]");
    if (!(alpha_zeta > 0.0 && alpha + alpha_zeta <= 0.5)) {
        throw UsageError("alpha_zeta must be positive with alpha + alpha_zeta <= 0.5");
    }
    if (!(gamma > 0.5 && gamma < 1.0)) throw UsageError("gamma must lie in (1/2, 1)");
    if (np_fractions.empty()) throw UsageError("the n_p sweep is empty");
    for (double f : np_fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw UsageError("n_p fractions must lie in (0, 1], got " + std::to_string(f));
    }
    for (double g : gammas) {
        if (!(g > 0.5 && g < 1.0)) throw UsageError("gamma values must lie in (1/2, 1), got " + std::to_string(g));
    }
    if (repetitions == 0) throw UsageError("repetitions must be at least 1");
    if (batch_size == 0) throw UsageError("batch_size must be at least 1");
}

CertifyParams ExperimentConfig::certify_params() const {
    return CertifyParams{sigma, n0, n, alpha, seed, batch_size};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "original", "approximated", "inputs", "labels",  "sigma",   "n0",          "n",
        "alpha",    "alpha_zeta",   "gamma",  "seed",    "batch_size", "np_fractions", "gammas",
        "repetitions", "workers",   "cache",  "output",  "json"};
    if (!j.is_object()) throw UsageError("configuration must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw UsageError("unknown configuration key '" + key + "'");
    }
    ExperimentConfig c;
    try {
        c.original = get_or<nlohmann::json>(j, "original", nullptr);
        c.approximated = get_or<nlohmann::json>(j, "approximated", nullptr);
        c.inputs = get_or<nlohmann::json>(j, "inputs", nullptr);
        if (j.contains("labels")) c.labels = j.at("labels").get<std::vector<ClassIndex>>();
        c.sigma = get_or(j, "sigma", c.sigma);
        c.n0 = get_or(j, "n0", c.n0);
        c.n = get_or(j, "n", c.n);
        c.alpha = get_or(j, "alpha", c.alpha);
        c.alpha_zeta = get_or(j, "alpha_zeta", c.alpha_zeta);
        c.gamma = get_or(j, "gamma", c.gamma);
        c.seed = get_or(j, "seed", c.seed);
        c.batch_size = get_or(j, "batch_size", c.batch_size);
        c.np_fractions = get_or(j, "np_fractions", c.np_fractions);
        c.gammas = get_or(j, "gammas", c.gammas);
        c.repetitions = get_or(j, "repetitions", c.repetitions);
        c.workers = get_or(j, "workers", c.workers);
        c.cache = get_or<std::string>(j, "cache", "");
        c.output = get_or<std::string>(j, "output", "");
        c.json_lines = get_or(j, "json", false);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("malformed configuration: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open configuration " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("configuration " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

ClassifierFactory make_classifier_factory(const nlohmann::json& d, std::size_t dimension) {
    if (!d.is_object() || !d.contains("kind")) throw UsageError("classifier descriptor needs a 'kind'");
    const auto kind = d.at("kind").get<std::string>();
    try {
        ClassifierPtr shared;
        if (kind == "threshold") {
            const auto orientation = get_or<std::string>(d, "orientation", "above");
            if (orientation != "above" && orientation != "below") {
                throw UsageError("threshold orientation must be 'above' or 'below'");
            }
            shared = std::make_shared<ThresholdClassifier>(
                d.at("threshold").get<double>(),
                orientation == "above" ? ThresholdClassifier::Orientation::AbovePositive
                                       : ThresholdClassifier::Orientation::BelowPositive,
                get_or(d, "dim", dimension));
        } else if (kind == "linear") {
            shared = make_linear(d, dimension);
        } else if (kind == "table") {
            shared = std::make_shared<TableClassifier>(
                d.at("origin").get<std::vector<double>>(), d.at("cell_size").get<std::vector<double>>(),
                d.at("shape").get<std::vector<std::size_t>>(), d.at("labels").get<std::vector<ClassIndex>>(),
                d.at("label_count").get<std::size_t>());
        } else if (kind == "external") {
            const auto batch = get_or<std::size_t>(d, "batch_size", wire::kDefaultBatchSize);
            return [d, dimension, batch]() -> ClassifierPtr {
                return std::make_shared<wire::ExternalClassifier>(open_endpoint(d), dimension, batch);
            };
        } else {
            throw UsageError("unknown classifier kind '" + kind + "'");
        }
        if (shared->dimension() != dimension) {
            throw UsageError(std::string(to_string(shared->kind())) + " classifier has dimension " +
                             std::to_string(shared->dimension()) + ", inputs have " + std::to_string(dimension));
        }
        return [shared] { return shared; };
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("malformed " + kind + " classifier descriptor: " + e.what());
    }
}

void InputSet::push(std::string id, std::span<const double> x) {
    if (x.size() != dimension) {
        throw UsageError("input '" + id + "' has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(dimension));
    }
    ids.push_back(std::move(id));
    data.insert(data.end(), x.begin(), x.end());
}

InputSet load_inputs(const nlohmann::json& s, const std::filesystem::path& base_dir) {
    if (!s.is_object() || !s.contains("kind")) throw UsageError("input source needs a 'kind'");
    const auto kind = s.at("kind").get<std::string>();
    try {
        if (kind == "list") {
            const auto vectors = s.at("vectors").get<std::vector<std::vector<double>>>();
            const auto ids = get_or<std::vector<std::string>>(s, "ids", {});
            if (!ids.empty() && ids.size() != vectors.size()) throw UsageError("input ids and vectors differ in count");
            InputSet set;
            set.dimension = vectors.empty() ? 0 : vectors.front().size();
            for (std::size_t i = 0; i < vectors.size(); ++i) {
                set.push(ids.empty() ? "x" + std::to_string(i) : ids[i], vectors[i]);
            }
            return set;
        }
        if (kind == "file") {
            std::filesystem::path path = s.at("path").get<std::string>();
            if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
            return read_input_file(path);
        }
        if (kind == "random") return generate_random(s);
        if (kind == "grid") return generate_grid(s);
        if (kind == "balanced") return generate_balanced(s);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("malformed " + kind + " input source: " + e.what());
    }
    throw UsageError("unknown input source kind '" + kind + "'");
}

void write_input_file(const std::filesystem::path& path, const InputSet& inputs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot open " + path.string() + " for writing");
    write_u32(out, static_cast<std::uint32_t>(inputs.size()));
    write_u32(out, static_cast<std::uint32_t>(inputs.dimension));
    for (double v : inputs.data) write_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    if (!out) throw UsageError("write to " + path.string() + " failed");
}

InputSet read_input_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open input file " + path.string());
    const std::uint32_t count = read_u32(in, path);
    const std::uint32_t dim = read_u32(in, path);
    if (dim == 0 && count != 0) throw UsageError("input file " + path.string() + " declares dimension 0");
    InputSet set;
    set.dimension = dim;
    std::vector<double> x(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        for (auto& v : x) v = std::bit_cast<float>(read_u32(in, path));
        set.push("x" + std::to_string(i), x);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw UsageError("input file " + path.string() + " has trailing bytes");
    return set;
}

std::vector<ClassIndex> clean_predictions(const Classifier& h, const InputSet& inputs) {
    if (inputs.size() == 0) return {};
    return h.predict_batch(std::span<const double>(inputs.data));
}

Experiment prepare(const ExperimentConfig& config, const std::filesystem::path& base_dir) {
    config.validate();
    Experiment exp;
    exp.config = config;
    if (config.inputs.is_null()) throw UsageError("the configuration names no inputs");
    exp.inputs = load_inputs(config.inputs, base_dir);
    if (exp.inputs.size() == 0) throw UsageError("the input set is empty");
    if (config.original.is_null()) throw UsageError("the configuration names no original classifier");
    exp.original = make_classifier_factory(config.original, exp.inputs.dimension);
    if (!config.approximated.is_null()) {
        exp.approximated = make_classifier_factory(config.approximated, exp.inputs.dimension);
    }
    if (config.labels) {
        if (config.labels->size() != exp.inputs.size()) {
            throw UsageError("got " + std::to_string(config.labels->size()) + " labels for " +
                             std::to_string(exp.inputs.size()) + " inputs");
        }
        exp.labels = *config.labels;
    } else {
        exp.labels = clean_predictions(*exp.original(), exp.inputs);
    }
    return exp;
}

std::uint64_t input_seed(std::uint64_t global_seed, std::size_t index, std::size_t rep) {
    const std::uint64_t base = mix64(global_seed + (static_cast<std::uint64_t>(index) + 1) * 0x9E3779B97F4A7C15ULL);
    return rep == 0 ? base : mix64(base ^ mix64(static_cast<std::uint64_t>(rep)));
}

Table CertifyRun::table(const InputSet& inputs) const {
    Table t{{"input_id", "status", "prediction", "radius", "p_lower", "samples", "seconds"}, {}};
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i]) continue;
        const auto& o = *outcomes[i];
        t.add_row({inputs.ids[i], status_name(o), optional_prediction(o), o.radius, o.p_lower, o.samples_used,
                   seconds[i]});
    }
    return t;
}

CertifyRun run_certify(const Experiment& exp) {
    const auto& cfg = exp.config;
    const std::size_t count = exp.inputs.size();
    if (count == 0) throw UsageError("the input set is empty");
    CertifyRun run;
    run.outcomes.resize(count);
    run.seconds.assign(count, 0.0);
    std::vector<std::optional<CacheRecord>> records(count);
    std::mutex failure_mutex;
    ClassifierPool pool(exp.original, cfg.workers);
    // Taken from a live worker classifier so an unreachable model only fails
    // the inputs, not the run.
    std::string identity;

    parallel_for(count, cfg.workers, [&](std::size_t i, std::size_t worker) {
        try {
            const auto start = Clock::now();
            auto params = cfg.certify_params();
            params.master_seed = input_seed(cfg.seed, i);
            const Classifier& h = pool.get(worker);
            {
                std::lock_guard lock(failure_mutex);
                if (identity.empty()) identity = h.identity();
            }
            auto res = certify(h, exp.inputs.row(i), params, exp.inputs.ids[i]);
            run.seconds[i] = seconds_since(start);
            run.outcomes[i] = res.outcome;
            records[i] = std::move(res.record);
        } catch (const Error& e) {
            record_failure(run.failures, failure_mutex, i, exp.inputs, e);
        }
    });
    sort_failures(run.failures);

    run.header.generator_id = std::string(kDefaultGeneratorId);
    run.header.sigma = cfg.sigma;
    run.header.alpha = cfg.alpha;
    run.header.n = cfg.n;
    run.header.classifier = identity;
    run.header.created = creation_timestamp();
    for (auto& r : records) {
        if (r) run.records.push_back(std::move(*r));
    }
    if (!cfg.cache.empty()) write_cache(cfg.cache, run.header, run.records);
    return run;
}

CacheFile load_cache_for(const ExperimentConfig& config) {
    if (config.cache.empty()) throw UsageError("no cache path given; pass --cache PATH");
    if (!std::filesystem::exists(config.cache)) {
        throw CacheError("no cache at " + config.cache.string() + "; run `irs_cli certify --cache " +
                         config.cache.string() + "` with the original classifier first");
    }
    return read_cache(config.cache);
}

std::string_view to_string(RecertifyPath path) {
    switch (path) {
        case RecertifyPath::Zeta: return "zeta";
        case RecertifyPath::Fallback: return "fallback";
        case RecertifyPath::Scratch: return "scratch";
    }
    return "?";
}

Recertification recertify_one(const Classifier& fp, std::span<const double> x, const CacheRecord& record,
                              const ExperimentConfig& config, std::size_t n_p, std::uint64_t seed, double gamma) {
    const auto start = Clock::now();
    Recertification out;
    if (record.abstained()) {
        CertifyParams params{config.sigma, config.n0, n_p, config.baseline_alpha(),
                             branch_seed(seed, SeedBranch::Fallback), config.batch_size};
        out.outcome = certify(fp, x, params).outcome;
        out.path = RecertifyPath::Scratch;
    } else {
        IrsParams params{config.sigma, n_p, config.alpha, config.alpha_zeta, gamma, seed, config.batch_size};
        auto res = certify_irs(fp, x, params, record);
        out.outcome = res.outcome;
        out.path = res.branch == IrsBranch::Zeta ? RecertifyPath::Zeta : RecertifyPath::Fallback;
        out.zeta = res.zeta;
    }
    out.seconds = seconds_since(start);
    return out;
}

std::size_t np_from_fraction(double fraction, std::size_t n) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("n_p fraction must lie in (0, 1]");
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
}

Table RecertifyRun::table(const InputSet& inputs) const {
    Table t{{"input_id", "path", "status", "prediction", "radius", "p_lower", "zeta", "disagreements", "samples",
             "seconds"},
            {}};
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i]) continue;
        const auto& r = *results[i];
        t.add_row({inputs.ids[i], to_string(r.path), status_name(r.outcome), optional_prediction(r.outcome),
                   r.outcome.radius, r.outcome.p_lower, r.zeta ? nlohmann::json(r.zeta->zeta) : nlohmann::json(),
                   r.zeta ? nlohmann::json(r.zeta->disagreements) : nlohmann::json(), r.outcome.samples_used,
                   r.seconds});
    }
    return t;
}

RecertifyRun run_recertify(const Experiment& exp, const CacheFile& cache, std::size_t n_p) {
    if (!exp.approximated) throw UsageError("the configuration names no approximated classifier");
    const auto& cfg = exp.config;
    const auto records = match_records(exp, cache);
    RecertifyRun run;
    run.n_p = n_p;
    run.results.resize(exp.inputs.size());
    std::mutex failure_mutex;
    ClassifierPool pool(exp.approximated, cfg.workers);
    parallel_for(exp.inputs.size(), cfg.workers, [&](std::size_t i, std::size_t worker) {
        try {
            if (records[i] == nullptr) throw CacheError("the cache has no record for this input");
            run.results[i] = recertify_one(pool.get(worker), exp.inputs.row(i), *records[i], cfg, n_p,
                                           input_seed(cfg.seed, i), cfg.gamma);
        } catch (const Error& e) {
            record_failure(run.failures, failure_mutex, i, exp.inputs, e);
        }
    });
    sort_failures(run.failures);
    return run;
}

Table comparison_table(const std::vector<ComparisonRow>& rows) {
    Table t{{"n_p", "fraction", "acr_baseline", "acr_irs", "mean_time_baseline", "mean_time_irs",
             "certified_baseline", "certified_irs", "irs_greater", "irs_equal", "irs_less"},
            {}};
    for (const auto& r : rows) {
        t.add_row({r.n_p, r.fraction, r.acr_baseline, r.acr_irs, r.mean_time_baseline, r.mean_time_irs,
                   r.certified_baseline, r.certified_irs, r.irs_greater, r.irs_equal, r.irs_less});
    }
    return t;
}

CompareRun run_compare(const Experiment& exp, const CacheFile& cache) {
    if (!exp.approximated) throw UsageError("the configuration names no approximated classifier");
    const auto& cfg = exp.config;
    const std::size_t count = exp.inputs.size();
    const auto records = match_records(exp, cache);
    CompareRun run;
    std::mutex failure_mutex;
    std::vector<bool> failed(count, false);
    ClassifierPool pool(exp.approximated, cfg.workers);

    for (double fraction : cfg.np_fractions) {
        const std::size_t n_p = np_from_fraction(fraction, cache.header.n);
        ComparisonRow row;
        row.n_p = n_p;
        row.fraction = fraction;
        std::size_t measured = 0;
        for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
            std::vector<std::optional<CertificationOutcome>> base(count), irs(count);
            std::vector<double> base_time(count, 0.0), irs_time(count, 0.0);
            parallel_for(count, cfg.workers, [&](std::size_t i, std::size_t worker) {
                if (failed[i]) return;
                try {
                    if (records[i] == nullptr) throw CacheError("the cache has no record for this input");
                    const Classifier& fp = pool.get(worker);
                    const auto x = exp.inputs.row(i);
                    const std::uint64_t seed = input_seed(cfg.seed, i, rep);

                    const auto r = recertify_one(fp, x, *records[i], cfg, n_p, seed, cfg.gamma);
                    irs[i] = r.outcome;
                    irs_time[i] = r.seconds;

                    const auto start = Clock::now();
                    CertifyParams params{cfg.sigma, cfg.n0, n_p, cfg.baseline_alpha(),
                                         branch_seed(seed, SeedBranch::Baseline), cfg.batch_size};
                    base[i] = certify(fp, x, params).outcome;
                    base_time[i] = seconds_since(start);
                } catch (const Error& e) {
                    std::lock_guard lock(failure_mutex);
                    if (!failed[i]) {
                        failed[i] = true;
                        run.failures.push_back({i, exp.inputs.ids[i], e.what()});
                    }
                }
            });
            std::vector<LabeledOutcome> base_l, irs_l;
            double tb = 0.0, ti = 0.0;
            std::size_t cb = 0, ci = 0;
            for (std::size_t i = 0; i < count; ++i) {
                if (failed[i] || !base[i] || !irs[i]) continue;
                base_l.push_back({*base[i], exp.labels[i]});
                irs_l.push_back({*irs[i], exp.labels[i]});
                tb += base_time[i];
                ti += irs_time[i];
                cb += base[i]->certified();
                ci += irs[i]->certified();
                const double rb = effective_radius(*base[i], exp.labels[i]);
                const double ri = effective_radius(*irs[i], exp.labels[i]);
                if (rb == 0.0 && ri == 0.0) continue;
                if (ri > rb) {
                    ++row.irs_greater;
                } else if (ri == rb) {
                    ++row.irs_equal;
                } else {
                    ++row.irs_less;
                }
            }
            if (base_l.empty()) continue;
            const double k = static_cast<double>(base_l.size());
            row.acr_baseline += average_certified_radius(base_l);
            row.acr_irs += average_certified_radius(irs_l);
            row.mean_time_baseline += tb / k;
            row.mean_time_irs += ti / k;
            row.certified_baseline += static_cast<double>(cb) / k;
            row.certified_irs += static_cast<double>(ci) / k;
            ++measured;
        }
        if (measured == 0) throw UsageError("every input failed; nothing to compare");
        const double reps = static_cast<double>(measured);
        row.acr_baseline /= reps;
        row.acr_irs /= reps;
        row.mean_time_baseline /= reps;
        row.mean_time_irs /= reps;
        row.certified_baseline /= reps;
        row.certified_irs /= reps;
        run.rows.push_back(row);
    }
    sort_failures(run.failures);
    return run;
}

double curve_area(std::vector<std::pair<double, double>> points, double lo, double hi) {
    if (points.size() < 2) throw DomainError("a curve needs at least two points");
    if (!(hi >= lo)) throw DomainError("empty integration interval");
    std::sort(points.begin(), points.end());
    // Piecewise-linear interpolation; vertical segments (equal ACR) contribute
    // no area and the later point wins.
    const auto value_at = [&](double a) {
        if (a <= points.front().first) return points.front().second;
        if (a >= points.back().first) return points.back().second;
        const auto it = std::upper_bound(points.begin(), points.end(), a,
                                         [](double v, const auto& p) { return v < p.first; });
        const auto& [x1, y1] = *it;
        const auto& [x0, y0] = *std::prev(it);
        if (x1 == x0) return y1;
        return y0 + (y1 - y0) * (a - x0) / (x1 - x0);
    };
    std::vector<double> knots{lo};
    for (const auto& p : points) {
        if (p.first > lo && p.first < hi) knots.push_back(p.first);
    }
    knots.push_back(hi);
    double area = 0.0;
    for (std::size_t i = 1; i < knots.size(); ++i) {
        const double a = knots[i - 1], b = knots[i];
        if (b <= a) continue;
        // Evaluate just inside the segment so duplicated knots use their own side.
        const double ya = value_at(std::nextafter(a, b));
        const double yb = value_at(std::nextafter(b, a));
        area += 0.5 * (ya + yb) * (b - a);
    }
    return area;
}

AocResult aoc_speedup(const std::vector<ComparisonRow>& rows) {
    if (rows.size() < 2) throw DomainError("AOC speedup needs at least two rows");
    std::vector<std::pair<double, double>> base, irs;
    for (const auto& r : rows) {
        base.emplace_back(r.acr_baseline, r.mean_time_baseline);
        irs.emplace_back(r.acr_irs, r.mean_time_irs);
    }
    const auto [bmin, bmax] = std::minmax_element(base.begin(), base.end());
    const auto [imin, imax] = std::minmax_element(irs.begin(), irs.end());
    AocResult res;
    res.baseline_acr_min = bmin->first;
    res.baseline_acr_max = bmax->first;
    res.irs_acr_min = imin->first;
    res.irs_acr_max = imax->first;
    res.common_lo = std::max(res.baseline_acr_min, res.irs_acr_min);
    res.common_hi = std::min(res.baseline_acr_max, res.irs_acr_max);
    if (!(res.common_hi > res.common_lo)) return res;
    res.baseline_area = curve_area(base, res.common_lo, res.common_hi);
    res.irs_area = curve_area(irs, res.common_lo, res.common_hi);
    if (res.irs_area > 0.0) res.speedup = res.baseline_area / res.irs_area;
    return res;
}

Table gamma_table(const std::vector<GammaRow>& rows) {
    Table t{{"gamma", "n_p", "acr", "mean_time", "certified", "zeta_branch_fraction"}, {}};
    for (const auto& r : rows) t.add_row({r.gamma, r.n_p, r.acr, r.mean_time, r.certified, r.zeta_branch_fraction});
    return t;
}

std::vector<GammaRow> run_gamma_sweep(const Experiment& exp, const CacheFile& cache, std::size_t n_p,
                                      std::vector<InputFailure>* failures) {
    if (!exp.approximated) throw UsageError("the configuration names no approximated classifier");
    const auto& cfg = exp.config;
    const std::size_t count = exp.inputs.size();
    const auto records = match_records(exp, cache);
    ClassifierPool pool(exp.approximated, cfg.workers);
    std::vector<InputFailure> local;
    std::mutex failure_mutex;
    std::vector<bool> failed(count, false);
    std::vector<GammaRow> rows;
    for (double gamma : cfg.gammas) {
        std::vector<std::optional<Recertification>> results(count);
        parallel_for(count, cfg.workers, [&](std::size_t i, std::size_t worker) {
            if (failed[i]) return;
            try {
                if (records[i] == nullptr) throw CacheError("the cache has no record for this input");
                results[i] = recertify_one(pool.get(worker), exp.inputs.row(i), *records[i], cfg, n_p,
                                           input_seed(cfg.seed, i), gamma);
            } catch (const Error& e) {
                std::lock_guard lock(failure_mutex);
                failed[i] = true;
                local.push_back({i, exp.inputs.ids[i], e.what()});
            }
        });
        GammaRow row{gamma, n_p, 0.0, 0.0, 0.0, 0.0};
        std::vector<LabeledOutcome> labeled;
        std::size_t zeta_count = 0, certified = 0;
        for (std::size_t i = 0; i < count; ++i) {
            if (!results[i]) continue;
            labeled.push_back({results[i]->outcome, exp.labels[i]});
            row.mean_time += results[i]->seconds;
            certified += results[i]->outcome.certified();
            zeta_count += results[i]->path == RecertifyPath::Zeta;
        }
        if (labeled.empty()) throw UsageError("every input failed; nothing to sweep");
        const double k = static_cast<double>(labeled.size());
        row.acr = average_certified_radius(labeled);
        row.mean_time /= k;
        row.certified = static_cast<double>(certified) / k;
        row.zeta_branch_fraction = static_cast<double>(zeta_count) / k;
        rows.push_back(row);
    }
    sort_failures(local);
    if (failures) *failures = std::move(local);
    return rows;
}

Table zeta_table(const std::vector<ZetaRow>& rows) {
    Table t{{"n_p", "inputs", "mean_zeta", "min_zeta", "max_zeta", "mean_disagreement_rate",
             "mean_exact_disagreement"},
            {}};
    for (const auto& r : rows) {
        t.add_row({r.n_p, r.inputs, r.mean_zeta, r.min_zeta, r.max_zeta, r.mean_disagreement_rate,
                   r.mean_exact_disagreement ? nlohmann::json(*r.mean_exact_disagreement) : nlohmann::json()});
    }
    return t;
}

std::vector<ZetaRow> run_zeta_report(const Experiment& exp, const CacheFile& cache,
                                     std::vector<InputFailure>* failures) {
    if (!exp.approximated) throw UsageError("the configuration names no approximated classifier");
    const auto& cfg = exp.config;
    const std::size_t count = exp.inputs.size();
    const auto records = match_records(exp, cache);
    ClassifierPool pool(exp.approximated, cfg.workers);

    // Closed-form disagreement, when both classifiers are compatible half-spaces.
    std::vector<std::optional<double>> exact(count);
    {
        const auto f = exp.original();
        const auto fp = exp.approximated();
        for (std::size_t i = 0; i < count; ++i) {
            try {
                exact[i] = exact_disagreement_probability(*f, *fp, exp.inputs.row(i), cfg.sigma);
            } catch (const UnsupportedOracleError&) {
                break;
            }
        }
    }

    std::vector<InputFailure> local;
    std::mutex failure_mutex;
    std::vector<bool> failed(count, false);
    std::vector<ZetaRow> rows;
    for (double fraction : cfg.np_fractions) {
        const std::size_t n_p = np_from_fraction(fraction, cache.header.n);
        std::vector<std::optional<ZetaEstimate>> est(count);
        parallel_for(count, cfg.workers, [&](std::size_t i, std::size_t worker) {
            if (failed[i] || records[i] == nullptr || records[i]->abstained()) return;
            try {
                IrsParams params{cfg.sigma, n_p, cfg.alpha, cfg.alpha_zeta, cfg.gamma, cfg.seed, cfg.batch_size};
                est[i] = estimate_zeta(pool.get(worker), exp.inputs.row(i), params, *records[i]);
            } catch (const Error& e) {
                std::lock_guard lock(failure_mutex);
                failed[i] = true;
                local.push_back({i, exp.inputs.ids[i], e.what()});
            }
        });
        ZetaRow row;
        row.n_p = n_p;
        row.min_zeta = std::numeric_limits<double>::infinity();
        row.max_zeta = 0.0;
        double exact_sum = 0.0;
        bool all_exact = true;
        for (std::size_t i = 0; i < count; ++i) {
            if (!est[i]) continue;
            ++row.inputs;
            row.mean_zeta += est[i]->zeta;
            row.min_zeta = std::min(row.min_zeta, est[i]->zeta);
            row.max_zeta = std::max(row.max_zeta, est[i]->zeta);
            row.mean_disagreement_rate +=
                static_cast<double>(est[i]->disagreements) / static_cast<double>(est[i]->samples);
            if (exact[i]) {
                exact_sum += *exact[i];
            } else {
                all_exact = false;
            }
        }
        if (row.inputs == 0) throw UsageError("no certified cache record matches the inputs");
        const double k = static_cast<double>(row.inputs);
        row.mean_zeta /= k;
        row.mean_disagreement_rate /= k;
        if (all_exact) row.mean_exact_disagreement = exact_sum / k;
        rows.push_back(row);
    }
    sort_failures(local);
    if (failures) *failures = std::move(local);
    return rows;
}

Table failure_table(const std::vector<InputFailure>& failures) {
    Table t{{"index", "input_id", "error"}, {}};
    for (const auto& f : failures) t.add_row({f.index, f.input_id, f.message});
    return t;
}

}  // namespace irs::harness
