#include "irs/noise_engine.hpp"

#include "irs/errors.hpp"
#include "irs/interval_stats.hpp"

namespace irs {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// (top 53 bits + 1/2) * 2^-53: strictly inside (0, 1).
double to_open_unit(std::uint64_t r) {
    return (static_cast<double>(r >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

void NoiseSpec::validate() const {
    if (!(sigma > 0.0)) throw DomainError("noise sigma must be positive");
    if (dimension == 0) throw DomainError("noise dimension must be at least 1");
    if (generator_id.empty()) throw DomainError("generator id must be nonempty");
    require_supported_generator(generator_id);
}

void require_supported_generator(std::string_view generator_id) {
    if (generator_id != kDefaultGeneratorId) {
        throw UnsupportedGeneratorError("unsupported noise generator '" + std::string(generator_id) +
                                        "' (this build provides '" + std::string(kDefaultGeneratorId) +
                                        "')");
    }
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t branch_seed(std::uint64_t master_seed, SeedBranch branch) {
    if (branch == SeedBranch::Estimation) return master_seed;
    return mix64(master_seed ^ mix64(static_cast<std::uint64_t>(branch) * kGolden));
}

SeedList derive_seed_list(std::uint64_t master_seed, std::size_t count) {
    if (count == 0) throw DomainError("seed list needs a positive count");
    SeedList seeds(count);
    for (std::size_t i = 0; i < count; ++i) {
        seeds[i] = mix64(master_seed + (static_cast<std::uint64_t>(i) + 1) * kGolden);
    }
    return seeds;
}

void sample_noise_into(const NoiseSpec& spec, std::uint64_t seed, std::span<double> out) {
    if (out.size() != spec.dimension) throw DomainError("noise buffer does not match dimension");
    std::uint64_t state = seed;
    for (double& v : out) {
        state += kGolden;
        v = spec.sigma * stats::inverse_normal_cdf(to_open_unit(mix64(state)));
    }
}

std::vector<double> sample_noise(const NoiseSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::vector<double> out(spec.dimension);
    sample_noise_into(spec, seed, out);
    return out;
}

}  // namespace irs
