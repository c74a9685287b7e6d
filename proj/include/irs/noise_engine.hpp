#pragma once

// Seed-addressable Gaussian noise. Every sample owns a 64-bit seed, so any
// subset of a certification run can be regenerated independently.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace irs {

/// splitmix64 counter stream, each 53-bit uniform mapped through Phi^-1.
inline constexpr std::string_view kDefaultGeneratorId = "splitmix64-icdf/1";

struct NoiseSpec {
    double sigma = 1.0;
    std::size_t dimension = 1;
    std::string generator_id{kDefaultGeneratorId};

    void validate() const;
};

using SeedList = std::vector<std::uint64_t>;

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

/// Independent derivation branches of one master seed.
enum class SeedBranch : std::uint64_t {
    Estimation = 0,  // the n cached samples
    Selection = 1,   // the n0 top-class samples
    Fallback = 2,    // fresh f^p samples in the high-p_A branch of IRS
    Baseline = 3,    // from-scratch recertification in comparisons
};

/// Master seed for a branch. Estimation maps to the master itself.
std::uint64_t branch_seed(std::uint64_t master_seed, SeedBranch branch);

/// Counter-based expansion: element i is mix64(master + (i+1) * golden), so a
/// shorter list is always a prefix of a longer one.
SeedList derive_seed_list(std::uint64_t master_seed, std::size_t count);

/// Writes sigma * N(0, I) deviates for `seed` into `out` (size = dimension).
void sample_noise_into(const NoiseSpec& spec, std::uint64_t seed, std::span<double> out);

std::vector<double> sample_noise(const NoiseSpec& spec, std::uint64_t seed);

/// Throws UnsupportedGeneratorError for anything but kDefaultGeneratorId.
void require_supported_generator(std::string_view generator_id);

}  // namespace irs
