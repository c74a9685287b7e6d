#include "irs/certify.hpp"
#include "irs/errors.hpp"
#include "irs/interval_stats.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace irs;

TEST_SUITE("certify") {

TEST_CASE("far from the boundary certifies with the clopper-pearson radius") {
    const ThresholdClassifier f(0.0);
    const double sigma = 0.5;
    const std::vector<double> x{3.0 * sigma};
    CertifyParams params{sigma, 100, 10'000, 0.001, 11, 256};
    const auto res = certify(f, x, params, "far");
    REQUIRE(res.outcome.certified());
    CHECK(res.outcome.prediction == ClassIndex{1});
    std::size_t hits = 0;
    for (auto p : res.record.predictions) hits += p == 1;
    // Phi(3) n = 9986.5 with standard deviation 3.7; six deviations either side.
    CHECK(hits >= 9964);
    CHECK(hits <= 10'000);
    const double p_lower = static_cast<double>(oracle::cp_lower(hits, 10'000, 0.001L));
    CHECK(std::fabs(res.outcome.p_lower - p_lower) < 1e-10);
    CHECK(std::fabs(res.outcome.radius - sigma * static_cast<double>(oracle::inverse_normal_cdf(p_lower))) < 1e-8);
    CHECK(res.outcome.samples_used == 10'100);
}

TEST_CASE("on the boundary abstains in at least 95 of 100 runs") {
    const ThresholdClassifier f(0.0);
    const std::vector<double> x{0.0};
    int abstained = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        CertifyParams params{1.0, 100, 10'000, 0.001, seed, 512};
        abstained += !certify(f, x, params).outcome.certified();
    }
    CHECK(abstained >= 95);
}

TEST_CASE("a single sample cannot certify") {
    const ThresholdClassifier f(0.0);
    const std::vector<double> x{50.0};
    const auto res = certify(f, x, CertifyParams{1.0, 1, 1, 0.001, 0, 1});
    CHECK_FALSE(res.outcome.certified());
    CHECK(res.outcome.p_lower == doctest::Approx(0.001));
    CHECK(res.outcome.radius == 0.0);
    CHECK_FALSE(res.outcome.prediction.has_value());
    CHECK(res.record.abstained());
    CHECK(res.record.seeds.empty());
}

TEST_CASE("average certified radius") {
    const auto abst = CertificationOutcome::abstain(0.3, 10);
    const auto good = CertificationOutcome::certify(1, 0.7, 0.5, 10);
    CHECK(average_certified_radius(std::vector<LabeledOutcome>{{abst, 0}, {abst, 1}}) == 0.0);
    CHECK(average_certified_radius(std::vector<LabeledOutcome>{{good, 1}, {abst, 1}}) == 0.25);
    CHECK(average_certified_radius(std::vector<LabeledOutcome>{{good, 0}}) == 0.0);
    CHECK_THROWS_AS(average_certified_radius(std::vector<LabeledOutcome>{}), DomainError);
}

TEST_CASE("same master seed gives the same outcome and record") {
    const LinearClassifier f({1.0, 0.0, -1.0, 0.5, 0.0, 1.0}, {0.0, 0.1, -0.1}, 2);
    const std::vector<double> x{0.4, 0.3};
    const CertifyParams params{0.25, 50, 2000, 0.001, 99, 100};
    const auto a = certify(f, x, params, "x");
    const auto b = certify(f, x, params, "x");
    CHECK(same_result(a.outcome, b.outcome));
    CHECK(a.record == b.record);
    auto other = params;
    other.master_seed = 100;
    CHECK(certify(f, x, other, "x").record.seeds != a.record.seeds);
}

TEST_CASE("cache record holds the estimation seeds and predictions") {
    const ThresholdClassifier f(0.0);
    const std::vector<double> x{1.0};
    const CertifyParams params{1.0, 100, 3000, 0.001, 4, 64};
    const auto res = certify(f, x, params, "id");
    REQUIRE(res.outcome.certified());
    CHECK(res.record.seeds == derive_seed_list(4, 3000));
    const NoiseSpec noise{1.0, 1, std::string(kDefaultGeneratorId)};
    CHECK(res.record.predictions == predict_under_noise(f, x, noise, res.record.seeds, 1000));
    CHECK(res.record.p_lower == res.outcome.p_lower);
    CHECK(res.record.input_id == "id");
    CHECK(res.record.input_digest == input_digest(x));
    CHECK(res.record.top_class == 1);
    CHECK(res.record.generator_id == kDefaultGeneratorId);
}

TEST_CASE("top class breaks ties toward the lowest index") {
    CHECK(top_class(std::vector<std::size_t>{5, 5, 3}) == 0);
    CHECK(top_class(std::vector<std::size_t>{1, 7, 7}) == 1);
    CHECK_THROWS_AS(top_class(std::vector<std::size_t>{}), DomainError);
    CHECK_THROWS_AS(class_counts(std::vector<ClassIndex>{0, 3}, 2), DomainError);
}

TEST_CASE("radius is nondecreasing in the observed count") {
    double prev = 0.0;
    for (std::uint64_t k = 0; k <= 1000; ++k) {
        const double p = stats::lower_confidence_bound({k, 1000}, {stats::IntervalMethod::ClopperPearson, 0.001});
        const double r = radius_from_lower_bound(p, 0.5).value_or(0.0);
        CHECK(r >= prev);
        prev = r;
    }
    CHECK_FALSE(radius_from_lower_bound(0.5, 1.0).has_value());
    CHECK(std::isinf(*radius_from_lower_bound(1.0, 1.0)));
}

TEST_CASE("parameter validation") {
    const ThresholdClassifier f(0.0);
    const std::vector<double> x{0.0};
    CHECK_THROWS_AS(certify(f, x, CertifyParams{0.0, 1, 1, 0.001, 0, 1}), DomainError);
    CHECK_THROWS_AS(certify(f, x, CertifyParams{1.0, 0, 1, 0.001, 0, 1}), DomainError);
    CHECK_THROWS_AS(certify(f, x, CertifyParams{1.0, 1, 0, 0.001, 0, 1}), DomainError);
    CHECK_THROWS_AS(certify(f, x, CertifyParams{1.0, 1, 1, 0.7, 0, 1}), DomainError);
    CHECK_THROWS_AS(certify(f, x, CertifyParams{1.0, 1, 1, 0.001, 0, 0}), DomainError);
    CHECK_THROWS_AS(certify(f, std::vector<double>{0.0, 1.0}, CertifyParams{}), DomainError);
}

TEST_CASE("statistical soundness over 1000 seeded runs") {
    const ThresholdClassifier f(0.0);
    const double sigma = 1.0;
    const std::vector<double> x{1.0};
    const double p_true = static_cast<double>(oracle::normal_cdf(1.0L));
    int unsound = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto res = certify(f, x, CertifyParams{sigma, 50, 10'000, 0.001, 1000 + seed, 2048});
        unsound += res.outcome.p_lower > p_true;
    }
    CHECK(unsound <= 0.001 * 1000 + 3 * std::sqrt(0.001 * 0.999 * 1000));
}

TEST_CASE("certified radius is correct for the exact smoothed classifier when sound") {
    const ThresholdClassifier f(0.2);
    const double sigma = 0.5;
    int checked = 0;
    for (int i = 0; i < 40; ++i) {
        const std::vector<double> x{-1.0 + 0.06 * i};
        const auto res = certify(f, x, CertifyParams{sigma, 100, 2000, 0.001, static_cast<std::uint64_t>(i), 512});
        if (!res.outcome.certified()) continue;
        const ClassIndex c = *res.outcome.prediction;
        if (res.outcome.p_lower > exact_smoothed_probability(f, x, sigma, c)) continue;
        for (double delta : {-res.outcome.radius, res.outcome.radius}) {
            const std::vector<double> moved{x[0] + delta * 0.999999};
            CHECK(exact_smoothed_probability(f, moved, sigma, c) > 0.5);
        }
        ++checked;
    }
    CHECK(checked > 20);
}

}  // TEST_SUITE
