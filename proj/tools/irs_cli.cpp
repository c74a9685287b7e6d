// Command-line front end for certification, incremental recertification and
// the comparison / planning reports.
//
// Exit status: 0 success, 1 some inputs failed, 2 usage error, 3 other error.

#include "irs/errors.hpp"
#include "irs/harness.hpp"
#include "irs/sample_planner.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace irs;
using namespace irs::harness;

struct Overrides {
    std::string config_path;
    std::optional<std::string> cache;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<double>> np_fractions;
    std::optional<std::vector<double>> gammas;
    std::optional<double> gamma;
    std::optional<double> alpha;
    std::optional<double> alpha_zeta;
    std::optional<double> sigma;
    std::optional<std::size_t> n;
    std::optional<std::size_t> n0;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> repetitions;
    std::optional<std::size_t> batch_size;
    std::optional<std::string> output;
    bool json = false;
};

void add_experiment_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config_path, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
    cmd->add_option("--cache", o.cache, "certification cache path");
    cmd->add_option("--seed", o.seed, "global master seed");
    cmd->add_option("--np-fractions", o.np_fractions, "n_p sweep as fractions of n")->delimiter(',');
    cmd->add_option("--gamma", o.gamma, "cached p_A threshold for the zeta branch");
    cmd->add_option("--alpha", o.alpha, "error rate of the original certification");
    cmd->add_option("--alpha-zeta", o.alpha_zeta, "error rate of the zeta bound");
    cmd->add_option("--sigma", o.sigma, "noise standard deviation");
    cmd->add_option("--n", o.n, "estimation samples of the original certification");
    cmd->add_option("--n0", o.n0, "selection samples");
    cmd->add_option("--workers", o.workers, "worker threads (0 = logical cores)");
    cmd->add_option("--repetitions", o.repetitions, "repetitions per n_p (compare)");
    cmd->add_option("--batch-size", o.batch_size, "noisy inputs per classifier call");
    cmd->add_option("-o,--output", o.output, "output file, - for stdout");
    cmd->add_flag("--json", o.json, "emit JSON lines instead of CSV");
}

ExperimentConfig resolve(const Overrides& o) {
    auto c = load_config(o.config_path);
    if (o.cache) c.cache = *o.cache;
    if (o.seed) c.seed = *o.seed;
    if (o.np_fractions) c.np_fractions = *o.np_fractions;
    if (o.gammas) c.gammas = *o.gammas;
    if (o.gamma) c.gamma = *o.gamma;
    if (o.alpha) c.alpha = *o.alpha;
    if (o.alpha_zeta) c.alpha_zeta = *o.alpha_zeta;
    if (o.sigma) c.sigma = *o.sigma;
    if (o.n) c.n = *o.n;
    if (o.n0) c.n0 = *o.n0;
    if (o.workers) c.workers = *o.workers;
    if (o.repetitions) c.repetitions = *o.repetitions;
    if (o.batch_size) c.batch_size = *o.batch_size;
    if (o.output) c.output = *o.output;
    if (o.json) c.json_lines = true;
    return c;
}

void emit(const ExperimentConfig& c, const Table& table) {
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!c.output.empty() && c.output != "-") {
        file.open(c.output, std::ios::trunc);
        if (!file) throw UsageError("cannot open " + c.output + " for writing");
        out = &file;
    }
    if (c.json_lines) {
        write_json_lines(*out, table);
    } else {
        write_csv(*out, table);
    }
}

int report_failures(const std::vector<InputFailure>& failures) {
    if (failures.empty()) return 0;
    std::cerr << failures.size() << " input(s) failed:\n";
    write_csv(std::cerr, failure_table(failures));
    return 1;
}

std::size_t resolve_np(std::optional<std::size_t> np, const ExperimentConfig& c, const CacheFile& cache) {
    if (np) {
        if (*np == 0) throw UsageError("--np must be at least 1");
        return *np;
    }
    return np_from_fraction(c.np_fractions.front(), cache.header.n);
}

std::filesystem::path config_dir(const Overrides& o) {
    return std::filesystem::path(o.config_path).parent_path();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomized-smoothing certification with incremental recertification"};
    app.require_subcommand(1);

    Overrides certify_o, recert_o, compare_o, zeta_o, sweep_o;
    std::optional<std::size_t> recert_np, sweep_np;

    auto* certify_cmd = app.add_subcommand("certify", "certify the original classifier and write the cache");
    add_experiment_flags(certify_cmd, certify_o);

    auto* recert_cmd = app.add_subcommand("recertify", "recertify the approximated classifier from the cache");
    add_experiment_flags(recert_cmd, recert_o);
    recert_cmd->add_option("--np", recert_np, "samples for the approximated classifier (default: first fraction)");

    auto* compare_cmd = app.add_subcommand("compare", "IRS against from-scratch certification over the n_p sweep");
    add_experiment_flags(compare_cmd, compare_o);

    auto* zeta_cmd = app.add_subcommand("zeta", "disagreement bound report over the n_p sweep");
    add_experiment_flags(zeta_cmd, zeta_o);

    auto* sweep_cmd = app.add_subcommand("gamma-sweep", "ACR of IRS for each gamma");
    add_experiment_flags(sweep_cmd, sweep_o);
    sweep_cmd->add_option("--np", sweep_np, "samples for the approximated classifier (default: first fraction)");
    sweep_cmd->add_option("--gammas", sweep_o.gammas, "gamma values")->delimiter(',');

    std::vector<std::string> plan_methods{"cp"};
    std::vector<double> plan_chis{0.005};
    std::vector<double> plan_ps;
    double plan_alpha = 0.01;
    double plan_step = 0.01;
    std::string plan_side = "width";
    std::string plan_output;
    auto* plan_cmd = app.add_subcommand("plan", "samples needed to reach a target error chi");
    plan_cmd->add_option("--method", plan_methods, "cp, wilson, ac")->delimiter(',');
    plan_cmd->add_option("--chi", plan_chis, "target errors")->delimiter(',');
    plan_cmd->add_option("--p", plan_ps, "proportions (default: grid over [step, 1-step])")->delimiter(',');
    plan_cmd->add_option("--p-step", plan_step, "grid step when --p is absent")->check(CLI::Range(1e-6, 0.5));
    plan_cmd->add_option("--alpha", plan_alpha, "one-sided error rate");
    plan_cmd->add_option("--side", plan_side, "lower, upper or width");
    plan_cmd->add_option("-o,--output", plan_output, "output file, - for stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*certify_cmd) {
            const auto cfg = resolve(certify_o);
            const auto exp = prepare(cfg, config_dir(certify_o));
            const auto run = run_certify(exp);
            emit(cfg, run.table(exp.inputs));
            return report_failures(run.failures);
        }
        if (*recert_cmd) {
            const auto cfg = resolve(recert_o);
            const auto exp = prepare(cfg, config_dir(recert_o));
            const auto cache = load_cache_for(cfg);
            const auto run = run_recertify(exp, cache, resolve_np(recert_np, cfg, cache));
            emit(cfg, run.table(exp.inputs));
            return report_failures(run.failures);
        }
        if (*compare_cmd) {
            const auto cfg = resolve(compare_o);
            const auto exp = prepare(cfg, config_dir(compare_o));
            const auto cache = load_cache_for(cfg);
            const auto run = run_compare(exp, cache);
            emit(cfg, comparison_table(run.rows));
            if (run.rows.size() >= 2) {
                const auto aoc = aoc_speedup(run.rows);
                if (aoc.speedup) {
                    std::cerr << "aoc_speedup " << *aoc.speedup << " over ACR [" << aoc.common_lo << ", "
                              << aoc.common_hi << "]\n";
                } else {
                    std::cerr << "aoc_speedup incomparable: baseline ACR [" << aoc.baseline_acr_min << ", "
                              << aoc.baseline_acr_max << "], IRS ACR [" << aoc.irs_acr_min << ", "
                              << aoc.irs_acr_max << "]\n";
                }
            }
            return report_failures(run.failures);
        }
        if (*zeta_cmd) {
            const auto cfg = resolve(zeta_o);
            const auto exp = prepare(cfg, config_dir(zeta_o));
            const auto cache = load_cache_for(cfg);
            std::vector<InputFailure> failures;
            const auto rows = run_zeta_report(exp, cache, &failures);
            emit(cfg, zeta_table(rows));
            return report_failures(failures);
        }
        if (*sweep_cmd) {
            const auto cfg = resolve(sweep_o);
            const auto exp = prepare(cfg, config_dir(sweep_o));
            const auto cache = load_cache_for(cfg);
            std::vector<InputFailure> failures;
            const auto rows = run_gamma_sweep(exp, cache, resolve_np(sweep_np, cfg, cache), &failures);
            emit(cfg, gamma_table(rows));
            return report_failures(failures);
        }
        if (*plan_cmd) {
            if (plan_ps.empty()) {
                const auto steps = static_cast<int>(std::floor(1.0 / plan_step + 1e-9));
                for (int i = 1; i < steps; ++i) plan_ps.push_back(i * plan_step);
            }
            const auto side = parse_plan_side(plan_side);
            std::vector<CurvePoint> points;
            for (const auto& m : plan_methods) {
                const stats::ConfidenceBoundSpec spec{stats::parse_interval_method(m), plan_alpha};
                const auto curve = sample_curve(spec, plan_chis, plan_ps, side);
                points.insert(points.end(), curve.begin(), curve.end());
            }
            if (plan_output.empty() || plan_output == "-") {
                write_curve_csv(std::cout, points);
            } else {
                std::ofstream out(plan_output, std::ios::trunc);
                if (!out) throw UsageError("cannot open " + plan_output + " for writing");
                write_curve_csv(out, points);
            }
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
