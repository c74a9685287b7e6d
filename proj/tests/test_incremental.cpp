#include "irs/certify.hpp"
#include "irs/errors.hpp"
#include "irs/incremental.hpp"
#include "irs/interval_stats.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace irs;

namespace {

// A record as certify would write it, with a chosen p_lower.
CacheRecord make_record(const Classifier& f, std::span<const double> x, double sigma, double alpha, std::size_t n,
                        std::uint64_t master, std::optional<double> p_lower, ClassIndex top = 1) {
    CacheRecord r;
    r.input_id = "x";
    r.input_digest = input_digest(x);
    r.top_class = top;
    r.p_lower = p_lower;
    r.sigma = sigma;
    r.alpha = alpha;
    r.n = n;
    r.generator_id = std::string(kDefaultGeneratorId);
    if (p_lower) {
        r.seeds = derive_seed_list(master, n);
        r.predictions = predict_under_noise(f, x, NoiseSpec{sigma, x.size(), r.generator_id}, r.seeds, 512);
    }
    return r;
}

double phi(double z) { return static_cast<double>(oracle::normal_cdf(z)); }
double phi_inv(double p) { return static_cast<double>(oracle::inverse_normal_cdf(p)); }

// Threshold t' whose same-orientation disagreement with threshold 0 at x is d.
double shifted_threshold(double x, double sigma, double d) {
    // Disagreement is Phi(x/sigma) - Phi((x - t')/sigma) for t' > 0.
    return x - sigma * phi_inv(phi(x / sigma) - d);
}

}  // namespace

TEST_SUITE("incremental") {

TEST_CASE("identical classifier hits the zero-disagreement floor") {
    const ThresholdClassifier f(0.0);
    const std::vector<double> x{0.3};
    const auto rec = make_record(f, x, 1.0, 0.001, 2000, 5, 0.6);
    IrsParams p;
    p.n_p = 1000;
    const auto est = estimate_zeta(f, x, p, rec);
    CHECK(est.disagreements == 0);
    CHECK(est.samples == 1000);
    CHECK(std::fabs(est.zeta - (1.0 - std::pow(0.001, 1.0 / 1000.0))) < 1e-10);
    CHECK(std::fabs(est.zeta - static_cast<double>(oracle::cp_upper(0, 1000, 0.001L))) < 1e-10);
}

TEST_CASE("constant flip gives zeta one") {
    const ThresholdClassifier f(0.0);
    const ThresholdClassifier flip(0.0, ThresholdClassifier::Orientation::BelowPositive);
    const std::vector<double> x{0.0};
    const auto rec = make_record(f, x, 1.0, 0.001, 500, 1, 0.6);
    IrsParams p;
    p.n_p = 500;
    const auto est = estimate_zeta(flip, x, p, rec);
    CHECK(est.disagreements == 500);
    CHECK(est.zeta == 1.0);
    const auto res = certify_irs(flip, x, p, rec);
    CHECK_FALSE(res.outcome.certified());
    CHECK(res.branch == IrsBranch::Zeta);
}

TEST_CASE("zeta upper-bounds the true disagreement in at least 999 of 1000 runs") {
    const ThresholdClassifier f(0.0), fp(0.1);
    const std::vector<double> x{0.0};
    const double truth = exact_disagreement_probability(f, fp, x, 1.0);
    CHECK(truth == doctest::Approx(0.039828).epsilon(1e-5));
    IrsParams p;
    p.n_p = 1000;
    int covered = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto rec = make_record(f, x, 1.0, 0.001, 1000, 7000 + s, 0.6);
        const auto est = estimate_zeta(fp, x, p, rec);
        CHECK(est.zeta >= static_cast<double>(est.disagreements) / 1000.0);
        covered += est.zeta >= truth;
    }
    CHECK(covered >= 999);
}

TEST_CASE("zeta branch radius") {
    const ThresholdClassifier f(0.0);
    const std::vector<double> x{0.3};
    const auto rec = make_record(f, x, 1.0, 0.001, 1000, 5, 0.9);
    IrsParams p;
    p.n_p = 1000;
    const auto res = certify_irs(f, x, p, rec);
    REQUIRE(res.outcome.certified());
    CHECK(res.branch == IrsBranch::Zeta);
    CHECK(res.outcome.prediction == ClassIndex{1});
    CHECK(res.outcome.radius == doctest::Approx(1.2432710).epsilon(1e-6));
    const double zeta = 1.0 - std::pow(0.001, 1.0 / 1000.0);
    CHECK(std::fabs(res.outcome.radius - phi_inv(0.9 - zeta)) < 1e-9);
    CHECK(res.outcome.samples_used == 1000);
}

TEST_CASE("irs radius examples and identity limit") {
    CHECK_FALSE(irs_radius(0.8, 0.3, 1.0).has_value());
    CHECK_FALSE(irs_radius(0.7, 0.2, 1.0).has_value());
    // Phi^-1(0.893116) = 1.2432710 by the bisection oracle.
    CHECK(std::fabs(*irs_radius(0.893116, 0.0, 1.0) - phi_inv(0.893116)) < 1e-9);
    CHECK(*irs_radius(0.893116, 0.0, 1.0) == doctest::Approx(1.2432710).epsilon(1e-6));
    for (double p : {0.6, 0.75, 0.9, 0.999}) {
        CHECK(*irs_radius(p, 0.0, 0.5) == doctest::Approx(*radius_from_lower_bound(p, 0.5)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(irs_radius(1.2, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(irs_radius(0.9, -0.1, 1.0), DomainError);
    CHECK_THROWS_AS(irs_radius(0.9, 0.0, 0.0), DomainError);
}

TEST_CASE("abstains when the bound minus zeta does not clear one half") {
    const ThresholdClassifier f(0.0), fp(0.5);
    const std::vector<double> x{0.1};
    const auto rec = make_record(f, x, 1.0, 0.001, 1000, 3, 0.52);
    IrsParams p;
    p.n_p = 1000;
    const auto res = certify_irs(fp, x, p, rec);
    CHECK_FALSE(res.outcome.certified());
    CHECK(res.outcome.radius == 0.0);
}

TEST_CASE("one-sided radius never exceeds the two-sided form") {
    for (double pa = 0.5; pa <= 1.0 - 1e-6; pa += 0.0125) {
        for (double frac = 0.0; frac <= 1.0; frac += 0.05) {
            const double zeta = frac * (pa - 0.5);
            for (double sigma : {0.25, 1.0}) {
                const double one = sigma * stats::inverse_normal_cdf(pa - zeta);
                const double two = irs_radius_two_sided(pa, 1.0 - pa, zeta, sigma);
                CHECK(one <= two + 1e-9);
            }
        }
    }
    CHECK(std::fabs(irs_radius_two_sided(0.9, 0.1, 0.0, 1.0) - phi_inv(0.9)) < 1e-12);
}

TEST_CASE("irs radius never exceeds the cached original radius") {
    for (double pa = 0.501; pa < 1.0; pa += 0.007) {
        const double original = *radius_from_lower_bound(pa, 1.0);
        for (double zeta = 0.0; zeta <= 1.0; zeta += 0.01) {
            if (pa - zeta < 0.0) break;
            CHECK(irs_radius(pa, zeta, 1.0).value_or(0.0) <= original);
        }
    }
}

TEST_CASE("union bound holds exactly on analytic pairs") {
    using O = ThresholdClassifier::Orientation;
    for (double t : {-1.0, 0.0, 0.7}) {
        for (double tp : {-1.2, -0.1, 0.0, 0.4, 2.0}) {
            for (double xv : {-2.0, -0.3, 0.0, 0.5, 1.5, 3.0}) {
                for (double sigma : {0.25, 1.0, 2.0}) {
                    const std::vector<double> x{xv};
                    for (O o : {O::AbovePositive, O::BelowPositive}) {
                        const ThresholdClassifier f(t), fp(tp, o);
                        const double pa = phi((xv - t) / sigma);
                        const ClassIndex ca = pa >= 0.5 ? 1 : 0;
                        const double pa_top = ca == 1 ? pa : 1.0 - pa;
                        const double d = exact_disagreement_probability(f, fp, x, sigma);
                        const double pp = phi((xv - tp) / sigma);
                        if (o == O::AbovePositive) {
                            CHECK(std::fabs(d - std::fabs(pa - pp)) < 1e-12);
                        } else {
                            // f^p = 1 below tp: disagree above max(t, tp) or below min(t, tp).
                            const double hi = std::max(t, tp), lo = std::min(t, tp);
                            CHECK(std::fabs(d - (phi((xv - hi) / sigma) + phi((lo - xv) / sigma))) < 1e-12);
                        }
                        CHECK(exact_smoothed_probability(fp, x, sigma, ca) >= pa_top - d - 1e-12);
                    }
                }
            }
        }
    }
}

TEST_CASE("certificate soundness with reused cached noise over 1000 runs") {
    const ThresholdClassifier f(0.0), fp(0.1);
    const std::vector<double> x{1.0};
    const double pa_fp = phi(0.9);
    IrsParams p;
    p.n_p = 1000;
    int unsound = 0, zeta_branch = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto cert = certify(f, x, CertifyParams{1.0, 50, 10'000, 0.001, 50'000 + s, 2048});
        REQUIRE(cert.outcome.certified());
        const auto res = certify_irs(fp, x, p, cert.record);
        zeta_branch += res.branch == IrsBranch::Zeta;
        unsound += res.outcome.p_lower > pa_fp;
    }
    CHECK(zeta_branch == 1000);
    const double rate = 0.002;
    CHECK(unsound <= rate * 1000 + 3 * std::sqrt(rate * (1 - rate) * 1000));
}

TEST_CASE("high cached bound takes the fresh-sample branch") {
    const ThresholdClassifier f(0.0), fp(0.2);
    const std::vector<double> x{4.0};
    const auto rec = make_record(f, x, 1.0, 0.001, 2000, 9, 0.995);
    IrsParams p;
    p.n_p = 1000;
    p.master_seed = 77;
    const auto res = certify_irs(fp, x, p, rec);
    CHECK(res.branch == IrsBranch::Fallback);
    CHECK_FALSE(res.zeta.has_value());
    const auto seeds = derive_seed_list(branch_seed(77, SeedBranch::Fallback), 1000);
    CHECK(seeds != std::vector<std::uint64_t>(rec.seeds.begin(), rec.seeds.begin() + 1000));
    const auto preds = predict_under_noise(fp, x, NoiseSpec{1.0, 1, std::string(kDefaultGeneratorId)}, seeds, 100);
    const auto hits = static_cast<std::uint64_t>(std::count(preds.begin(), preds.end(), ClassIndex{1}));
    const double expected = static_cast<double>(oracle::cp_lower(hits, 1000, 0.002L));
    CHECK(std::fabs(res.outcome.p_lower - expected) < 1e-10);
    REQUIRE(res.outcome.certified());
    CHECK(std::fabs(res.outcome.radius - phi_inv(expected)) < 1e-8);

    p.gamma = 0.999;
    CHECK(certify_irs(fp, x, p, rec).branch == IrsBranch::Zeta);
}

TEST_CASE("incompatible or unusable cache records are refused") {
    const ThresholdClassifier f(0.0);
    const std::vector<double> x{0.5};
    const auto good = make_record(f, x, 1.0, 0.001, 100, 1, 0.7);
    IrsParams p;
    p.n_p = 100;
    CHECK_NOTHROW(certify_irs(f, x, p, good));

    auto gen = good;
    gen.generator_id = "philox/2";
    CHECK_THROWS_AS(certify_irs(f, x, p, gen), CacheIncompatibleError);
    CHECK_THROWS_AS(estimate_zeta(f, x, p, gen), CacheIncompatibleError);

    auto sig = good;
    sig.sigma = 0.5;
    CHECK_THROWS_AS(certify_irs(f, x, p, sig), CacheIncompatibleError);

    auto alp = good;
    alp.alpha = 0.01;
    CHECK_THROWS_AS(certify_irs(f, x, p, alp), CacheIncompatibleError);

    const std::vector<double> other{0.5000001};
    CHECK_THROWS_AS(certify_irs(f, other, p, good), CacheIncompatibleError);

    const auto abst = make_record(f, x, 1.0, 0.001, 100, 1, std::nullopt);
    CHECK_THROWS_AS(certify_irs(f, x, p, abst), CacheError);

    p.n_p = 101;
    CHECK_THROWS_AS(estimate_zeta(f, x, p, good), DomainError);
    p.n_p = 0;
    CHECK_THROWS_AS(estimate_zeta(f, x, p, good), DomainError);
    p.n_p = 10;
    p.gamma = 0.5;
    CHECK_THROWS_AS(certify_irs(f, x, p, good), DomainError);
    p.gamma = 0.99;
    p.alpha = 0.3;
    p.alpha_zeta = 0.3;
    CHECK_THROWS_AS(certify_irs(f, x, p, good), DomainError);
}

TEST_CASE("prefix rule: n_p uses the first cached seeds") {
    const ThresholdClassifier f(0.0), fp(0.05);
    const std::vector<double> x{0.0};
    const auto big = make_record(f, x, 1.0, 0.001, 3000, 21, 0.6);
    const auto small = make_record(f, x, 1.0, 0.001, 800, 21, 0.6);
    IrsParams p;
    p.n_p = 800;
    const auto a = estimate_zeta(fp, x, p, big);
    const auto b = estimate_zeta(fp, x, p, small);
    CHECK(a.disagreements == b.disagreements);
    CHECK(a.zeta == b.zeta);
}

TEST_CASE("a tenth of the samples nearly matches full recertification") {
    // True p_A(f) = 0.8 and disagreement 0.01, so p_A(f^p) = 0.79.
    const double sigma = 1.0;
    const double xv = sigma * phi_inv(0.8);
    const std::vector<double> x{xv};
    const ThresholdClassifier f(0.0), fp(shifted_threshold(xv, sigma, 0.01));
    REQUIRE(exact_disagreement_probability(f, fp, x, sigma) == doctest::Approx(0.01).epsilon(1e-9));

    const std::size_t n = 10'000, n_p = 1'000, trials = 200;
    double irs_sum = 0.0, full_sum = 0.0, small_sum = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto cert = certify(f, x, CertifyParams{sigma, 100, n, 0.001, 900'000 + t, 2048});
        REQUIRE(cert.outcome.certified());
        IrsParams p;
        p.sigma = sigma;
        p.n_p = n_p;
        irs_sum += certify_irs(fp, x, p, cert.record).outcome.radius;
        full_sum += certify(fp, x, CertifyParams{sigma, 100, n, 0.002, 800'000 + t, 2048}).outcome.radius;
        small_sum += certify(fp, x, CertifyParams{sigma, 100, n_p, 0.002, 700'000 + t, 2048}).outcome.radius;
    }
    const double irs_mean = irs_sum / trials, full_mean = full_sum / trials, small_mean = small_sum / trials;
    MESSAGE("irs " << irs_mean << " full " << full_mean << " same-budget " << small_mean);
    CHECK(std::fabs(irs_mean - full_mean) <= 0.15 * full_mean);
    CHECK(small_mean < irs_mean);
}

}  // TEST_SUITE
