#include "irs/cache_store.hpp"

#include "irs/errors.hpp"

#include <nlohmann/json.hpp>

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iterator>
#include <set>

namespace irs {

namespace {

constexpr char kMagic[4] = {'I', 'R', 'S', 'C'};
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_feed(std::uint64_t& h, std::uint64_t value, int bytes) {
    for (int i = 0; i < bytes; ++i) {
        h ^= (value >> (8 * i)) & 0xFF;
        h *= kFnvPrime;
    }
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
    if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos) {
        throw CorruptCacheError("malformed 64-bit hex field '" + s + "'");
    }
    return std::strtoull(s.c_str(), nullptr, 16);
}

std::uint64_t array_checksum(const CacheRecord& r) {
    std::uint64_t h = kFnvOffset;
    for (auto s : r.seeds) fnv_feed(h, s, 8);
    for (auto p : r.predictions) fnv_feed(h, p, 2);
    return h;
}

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_block(std::vector<std::uint8_t>& out, const std::string& text) {
    put_le(out, text.size(), 4);
    out.insert(out.end(), text.begin(), text.end());
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t le(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    std::span<const std::uint8_t> take(std::size_t count) {
        need(count);
        auto out = bytes_.subspan(pos_, count);
        pos_ += count;
        return out;
    }

    nlohmann::json json_block(const char* what) {
        const auto len = static_cast<std::size_t>(le(4));
        const auto text = take(len);
        try {
            return nlohmann::json::parse(text.begin(), text.end());
        } catch (const nlohmann::json::exception& e) {
            throw CorruptCacheError(std::string("unparseable ") + what + ": " + e.what());
        }
    }

    bool at_end() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t count) const {
        if (count > bytes_.size() - pos_) {
            throw CorruptCacheError("cache truncated at byte " + std::to_string(pos_) + " (wanted " +
                                    std::to_string(count) + " more)");
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t input_digest(std::span<const double> x) {
    std::uint64_t h = kFnvOffset;
    for (double v : x) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        fnv_feed(h, bits, 8);
    }
    return h;
}

const CacheRecord* CacheFile::find(std::string_view input_id) const {
    for (const auto& r : records) {
        if (r.input_id == input_id) return &r;
    }
    return nullptr;
}

std::string creation_timestamp() {
    std::time_t t = 0;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch != nullptr && *epoch != '\0') {
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void validate_cache(const CacheHeader& header, std::span<const CacheRecord> records) {
    if (header.format_version != kCacheFormatVersion) {
        throw CacheValidationError("cannot write format version " + std::to_string(header.format_version));
    }
    if (header.generator_id.empty()) throw CacheValidationError("header generator id is empty");
    if (!(header.sigma > 0.0)) throw CacheValidationError("header sigma must be positive");
    if (!(header.alpha > 0.0 && header.alpha <= 0.5)) throw CacheValidationError("header alpha must lie in (0, 0.5]");
    if (header.n == 0) throw CacheValidationError("header n must be positive");
    std::set<std::string_view> ids;
    for (const auto& r : records) {
        const std::string who = "record '" + r.input_id + "'";
        if (!ids.insert(r.input_id).second) throw CacheValidationError("duplicate " + who);
        if (r.sigma != header.sigma || r.alpha != header.alpha || r.n != header.n ||
            r.generator_id != header.generator_id) {
            throw CacheValidationError(who + " disagrees with the header (sigma, alpha, n, generator)");
        }
        if (r.seeds.size() != r.predictions.size()) {
            throw CacheValidationError(who + " has " + std::to_string(r.seeds.size()) + " seeds but " +
                                       std::to_string(r.predictions.size()) + " predictions");
        }
        if (r.p_lower) {
            if (!(*r.p_lower > 0.5 && *r.p_lower <= 1.0)) {
                throw CacheValidationError(who + " has p_lower outside (1/2, 1]");
            }
            if (r.predictions.size() != r.n) {
                throw CacheValidationError(who + " holds " + std::to_string(r.predictions.size()) +
                                           " predictions, expected n = " + std::to_string(r.n));
            }
        } else if (!r.predictions.empty() && r.predictions.size() != r.n) {
            throw CacheValidationError(who + " (abstained) holds a partial sample list");
        }
        if (r.top_class > 0xFFFF) throw CacheValidationError(who + " top class does not fit in u16");
        for (auto p : r.predictions) {
            if (p > 0xFFFF) throw CacheValidationError(who + " has a prediction that does not fit in u16");
        }
    }
}

std::vector<std::uint8_t> encode_cache(const CacheHeader& header, std::span<const CacheRecord> records) {
    validate_cache(header, records);
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_le(out, header.format_version, 2);
    const nlohmann::json head = {
        {"generator_id", header.generator_id}, {"sigma", header.sigma},
        {"alpha", header.alpha},               {"n", header.n},
        {"classifier", header.classifier},     {"created", header.created},
        {"digest_algorithm", header.digest_algorithm}, {"records", records.size()},
    };
    put_block(out, head.dump());
    for (const auto& r : records) {
        const nlohmann::json meta = {
            {"input_id", r.input_id},
            {"input_digest", hex64(r.input_digest)},
            {"top_class", r.top_class},
            {"p_lower", r.p_lower ? nlohmann::json(*r.p_lower) : nlohmann::json(nullptr)},
            {"samples", r.seeds.size()},
            {"checksum", hex64(array_checksum(r))},
        };
        put_block(out, meta.dump());
        for (auto s : r.seeds) put_le(out, s, 8);
        for (auto p : r.predictions) put_le(out, p, 2);
    }
    return out;
}

CacheFile decode_cache(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    const auto magic = in.take(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw CorruptCacheError("not a certification cache (bad magic)");
    CacheFile file;
    file.header.format_version = static_cast<std::uint16_t>(in.le(2));
    if (file.header.format_version != kCacheFormatVersion) {
        throw UnsupportedVersionError("cache format version " + std::to_string(file.header.format_version) +
                                      " is not supported (expected " + std::to_string(kCacheFormatVersion) + ")");
    }
    std::size_t record_count = 0;
    try {
        const auto head = in.json_block("header");
        file.header.generator_id = head.at("generator_id").get<std::string>();
        file.header.sigma = head.at("sigma").get<double>();
        file.header.alpha = head.at("alpha").get<double>();
        file.header.n = head.at("n").get<std::size_t>();
        file.header.classifier = head.at("classifier").get<std::string>();
        file.header.created = head.at("created").get<std::string>();
        file.header.digest_algorithm = head.at("digest_algorithm").get<std::string>();
        record_count = head.at("records").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCacheError(std::string("malformed cache header: ") + e.what());
    }
    if (file.header.digest_algorithm != kDigestAlgorithm) {
        throw CacheIncompatibleError("cache uses input digest '" + file.header.digest_algorithm + "'");
    }
    for (std::size_t i = 0; i < record_count; ++i) {
        CacheRecord r;
        std::size_t samples = 0;
        std::uint64_t checksum = 0;
        try {
            const auto meta = in.json_block("record metadata");
            r.input_id = meta.at("input_id").get<std::string>();
            r.input_digest = parse_hex64(meta.at("input_digest").get<std::string>());
            r.top_class = meta.at("top_class").get<ClassIndex>();
            if (!meta.at("p_lower").is_null()) r.p_lower = meta.at("p_lower").get<double>();
            samples = meta.at("samples").get<std::size_t>();
            checksum = parse_hex64(meta.at("checksum").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw CorruptCacheError("malformed metadata for record " + std::to_string(i) + ": " + e.what());
        }
        if (samples > in.remaining() / 10) throw CorruptCacheError("record " + std::to_string(i) + " is truncated");
        r.seeds.resize(samples);
        r.predictions.resize(samples);
        for (auto& s : r.seeds) s = in.le(8);
        for (auto& p : r.predictions) p = static_cast<ClassIndex>(in.le(2));
        if (array_checksum(r) != checksum) {
            throw CorruptCacheError("checksum mismatch in record '" + r.input_id + "'");
        }
        r.sigma = file.header.sigma;
        r.alpha = file.header.alpha;
        r.n = file.header.n;
        r.generator_id = file.header.generator_id;
        file.records.push_back(std::move(r));
    }
    if (!in.at_end()) throw CorruptCacheError("trailing bytes after the last record");
    try {
        validate_cache(file.header, file.records);
    } catch (const CacheValidationError& e) {
        throw CorruptCacheError(std::string("cache content is inconsistent: ") + e.what());
    }
    return file;
}

void write_cache(const std::filesystem::path& path, const CacheHeader& header, std::span<const CacheRecord> records) {
    const auto bytes = encode_cache(header, records);
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CacheError("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp);
            throw CacheError("write to " + tmp.string() + " failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw CacheError("cannot move cache into place at " + path.string() + ": " + ec.message());
    }
}

CacheFile read_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CacheError("cannot open cache " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_cache(bytes);
}

}  // namespace irs
