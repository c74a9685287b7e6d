#pragma once

// Length-prefixed classifier protocol spoken with out-of-process models.
//
//   frame    := u32 little-endian payload length, payload
//   request  := JSON header line terminated by '\n', then (predict only)
//               count * dim little-endian f32 values
//   response := JSON, {"ok":true,...} or {"ok":false,"error":"..."}
//
// Requests are {"op":"predict","count":N,"dim":M,"dtype":"f32"} and
// {"op":"info"}; info answers carry "label_count" and "model".

#include "irs/classifier.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace irs::wire {

inline constexpr std::uint32_t kMaxFrameBytes = 1U << 30;
inline constexpr std::size_t kDefaultBatchSize = 256;

using Bytes = std::vector<std::uint8_t>;

/// Blocking, bidirectional byte stream.
class ByteStream {
public:
    virtual ~ByteStream() = default;
    virtual void write_all(std::span<const std::uint8_t> bytes) = 0;
    /// Fills `out` completely or throws TransportError.
    virtual void read_exact(std::span<std::uint8_t> out) = 0;
    /// Like read_exact but returns false on a clean end of stream before the
    /// first byte.
    virtual bool read_exact_or_eof(std::span<std::uint8_t> out) = 0;
    virtual std::string describe() const = 0;
};

/// Stream over a pair of file descriptors (pipes or a socket). Owns both.
class FdStream : public ByteStream {
public:
    FdStream(int read_fd, int write_fd, std::string description);
    ~FdStream() override;
    FdStream(const FdStream&) = delete;
    FdStream& operator=(const FdStream&) = delete;

    void write_all(std::span<const std::uint8_t> bytes) override;
    void read_exact(std::span<std::uint8_t> out) override;
    bool read_exact_or_eof(std::span<std::uint8_t> out) override;
    std::string describe() const override { return description_; }

    /// Closes the write side so the peer sees end of stream.
    void close_write();

private:
    int read_fd_;
    int write_fd_;
    std::string description_;
};

/// Runs `/bin/sh -c command` with its stdin/stdout connected to the stream.
class SubprocessStream final : public FdStream {
public:
    explicit SubprocessStream(const std::string& command);
    ~SubprocessStream() override;

private:
    struct Launched {
        int read_fd;
        int write_fd;
        int pid;
    };
    static Launched launch(const std::string& command);
    SubprocessStream(Launched launched, const std::string& command);

    int pid_;
};

/// Connects to host:port over TCP.
std::unique_ptr<FdStream> connect_tcp(const std::string& host, std::uint16_t port);

/// Listening TCP socket on the loopback interface (port 0 picks a free one).
class TcpListener {
public:
    explicit TcpListener(std::uint16_t port = 0);
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::uint16_t port() const { return port_; }
    std::unique_ptr<FdStream> accept();

private:
    int fd_;
    std::uint16_t port_;
};

void write_frame(ByteStream& stream, std::span<const std::uint8_t> payload);
Bytes read_frame(ByteStream& stream);
/// Returns false on a clean end of stream instead of throwing.
bool read_frame_or_eof(ByteStream& stream, Bytes& payload);

Bytes encode_info_request();
/// Casts each value to f32; `inputs` is row-major count x dim.
Bytes encode_predict_request(std::span<const double> inputs, std::size_t dim);

struct Request {
    std::string op;
    nlohmann::json header;
    std::vector<float> values;  // predict only
    std::size_t count = 0;
    std::size_t dim = 0;
};

/// Parses a request payload; throws TransportError on malformed frames.
Request decode_request(std::span<const std::uint8_t> payload);

Bytes encode_response(const nlohmann::json& body);
nlohmann::json decode_response(std::span<const std::uint8_t> payload);

struct ModelInfo {
    std::size_t label_count = 0;
    std::string model;
};

using PredictFn = std::function<std::vector<ClassIndex>(std::span<const float> values, std::size_t count,
                                                         std::size_t dim)>;

/// Serves requests until the peer closes the stream. Malformed frames and
/// predictor exceptions are answered with {"ok":false} and the loop goes on.
void serve(ByteStream& stream, const ModelInfo& info, const PredictFn& predict);

/// Classifier backed by a protocol peer. One connection per handle; calls are
/// serialized.
class ExternalClassifier final : public Classifier {
public:
    ExternalClassifier(std::unique_ptr<ByteStream> stream, std::size_t dimension,
                       std::size_t batch_size = kDefaultBatchSize);

    ClassifierKind kind() const override { return ClassifierKind::External; }
    std::size_t dimension() const override { return dimension_; }
    std::size_t label_count() const override { return info_.label_count; }
    std::string identity() const override { return "external(" + info_.model + ")"; }
    std::vector<ClassIndex> predict_batch(std::span<const double> inputs) const override;
    using Classifier::predict_batch;

private:
    nlohmann::json round_trip(std::span<const std::uint8_t> request) const;

    mutable std::mutex mutex_;
    std::unique_ptr<ByteStream> stream_;
    std::size_t dimension_;
    std::size_t batch_size_;
    ModelInfo info_;
};

}  // namespace irs::wire
