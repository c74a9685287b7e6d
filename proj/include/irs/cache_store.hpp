#pragma once

// Persistent certification cache: everything incremental recertification
// needs from the original run, one record per input.
//
// File layout (all integers little-endian):
//   "IRSC"  u16 format_version
//   u32 header_length  header JSON
//   per record:
//     u32 metadata_length  metadata JSON
//     u64 seeds[samples]   u16 predictions[samples]
//
// `samples` and an FNV-1a checksum over the two arrays live in the metadata.

#include "irs/classifier.hpp"
#include "irs/noise_engine.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace irs {

inline constexpr std::uint16_t kCacheFormatVersion = 1;
inline constexpr std::string_view kDigestAlgorithm = "fnv1a64-f64le";

/// FNV-1a over the little-endian IEEE-754 bytes of x.
std::uint64_t input_digest(std::span<const double> x);

struct CacheRecord {
    std::string input_id;
    std::uint64_t input_digest = 0;
    ClassIndex top_class = 0;
    /// Absent when the original certification abstained.
    std::optional<double> p_lower;
    double sigma = 0.0;
    double alpha = 0.0;
    std::size_t n = 0;
    /// Estimation-sample seeds and f's prediction on each; empty for
    /// abstained records.
    SeedList seeds;
    std::vector<ClassIndex> predictions;
    std::string generator_id;

    bool abstained() const { return !p_lower.has_value(); }
    bool operator==(const CacheRecord&) const = default;
};

struct CacheHeader {
    std::uint16_t format_version = kCacheFormatVersion;
    std::string generator_id{kDefaultGeneratorId};
    double sigma = 0.0;
    double alpha = 0.0;
    std::size_t n = 0;
    std::string classifier;
    std::string created;
    std::string digest_algorithm{kDigestAlgorithm};

    bool operator==(const CacheHeader&) const = default;
};

struct CacheFile {
    CacheHeader header;
    std::vector<CacheRecord> records;

    /// nullptr when absent.
    const CacheRecord* find(std::string_view input_id) const;
};

/// UTC ISO-8601 time; honours SOURCE_DATE_EPOCH for reproducible output.
std::string creation_timestamp();

/// Throws CacheValidationError on any invariant violation.
void validate_cache(const CacheHeader& header, std::span<const CacheRecord> records);

std::vector<std::uint8_t> encode_cache(const CacheHeader& header, std::span<const CacheRecord> records);
CacheFile decode_cache(std::span<const std::uint8_t> bytes);

/// Validates, then writes through a temporary file and rename.
void write_cache(const std::filesystem::path& path, const CacheHeader& header, std::span<const CacheRecord> records);
CacheFile read_cache(const std::filesystem::path& path);

}  // namespace irs
