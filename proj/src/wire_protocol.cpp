#include "irs/wire_protocol.hpp"

#include "irs/errors.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <thread>

extern char** environ;

namespace irs::wire {

namespace {

std::string errno_text() {
    return std::strerror(errno);
}

void ignore_sigpipe_once() {
    static std::once_flag flag;
    std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

void put_u32(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

Bytes header_line(const nlohmann::json& header) {
    const std::string text = header.dump() + "\n";
    return Bytes(text.begin(), text.end());
}

}  // namespace

// --- streams -------------------------------------------------------------

FdStream::FdStream(int read_fd, int write_fd, std::string description)
    : read_fd_(read_fd), write_fd_(write_fd), description_(std::move(description)) {}

FdStream::~FdStream() {
    close_write();
    if (read_fd_ >= 0) ::close(read_fd_);
}

void FdStream::close_write() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (write_fd_ == read_fd_ && write_fd_ >= 0) ::shutdown(write_fd_, SHUT_WR);
    write_fd_ = -1;
}

void FdStream::write_all(std::span<const std::uint8_t> bytes) {
    if (write_fd_ < 0) throw TransportError(description_ + ": write side is closed");
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::write(write_fd_, bytes.data() + done, bytes.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(description_ + ": write failed: " + errno_text());
        }
        done += static_cast<std::size_t>(n);
    }
}

bool FdStream::read_exact_or_eof(std::span<std::uint8_t> out) {
    std::size_t done = 0;
    while (done < out.size()) {
        const ssize_t n = ::read(read_fd_, out.data() + done, out.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(description_ + ": read failed: " + errno_text());
        }
        if (n == 0) {
            if (done == 0) return false;
            throw TransportError(description_ + ": stream ended mid-frame");
        }
        done += static_cast<std::size_t>(n);
    }
    return true;
}

void FdStream::read_exact(std::span<std::uint8_t> out) {
    if (!read_exact_or_eof(out)) throw TransportError(description_ + ": peer closed the stream");
}

SubprocessStream::SubprocessStream(const std::string& command) : SubprocessStream(launch(command), command) {}

SubprocessStream::SubprocessStream(Launched launched, const std::string& command)
    : FdStream(launched.read_fd, launched.write_fd, "adapter `" + command + "`"), pid_(launched.pid) {}

SubprocessStream::Launched SubprocessStream::launch(const std::string& command) {
    ignore_sigpipe_once();
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw TransportError("pipe failed: " + errno_text());
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw TransportError("pipe failed: " + errno_text());
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

    std::string sh = "/bin/sh";
    std::string dash_c = "-c";
    std::string cmd = command;
    char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    pid_t pid = 0;
    const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
        ::close(to_child[1]);
        ::close(from_child[0]);
        throw TransportError("could not launch adapter `" + command + "`: " + std::strerror(rc));
    }
    return {from_child[0], to_child[1], static_cast<int>(pid)};
}

SubprocessStream::~SubprocessStream() {
    close_write();
    using namespace std::chrono_literals;
    int status = 0;
    for (int i = 0; i < 200; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) != 0) return;
        std::this_thread::sleep_for(5ms);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
}

std::unique_ptr<FdStream> connect_tcp(const std::string& host, std::uint16_t port) {
    ignore_sigpipe_once();
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const std::string where = host + ":" + std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &found); rc != 0) {
        throw TransportError("cannot resolve " + where + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(found);
    if (fd < 0) throw TransportError("cannot connect to adapter at " + where + ": " + errno_text());
    return std::make_unique<FdStream>(fd, fd, "adapter at " + where);
}

TcpListener::TcpListener(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) throw TransportError("socket failed: " + errno_text());
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 8) != 0) {
        const std::string why = errno_text();
        ::close(fd_);
        throw TransportError("cannot listen on port " + std::to_string(port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
    ::close(fd_);
}

std::unique_ptr<FdStream> TcpListener::accept() {
    ignore_sigpipe_once();
    const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) throw TransportError("accept failed: " + errno_text());
    return std::make_unique<FdStream>(fd, fd, "client on port " + std::to_string(port_));
}

// --- framing -------------------------------------------------------------

void write_frame(ByteStream& stream, std::span<const std::uint8_t> payload) {
    if (payload.size() > kMaxFrameBytes) throw TransportError("frame exceeds the 1 GiB limit");
    Bytes frame;
    frame.reserve(4 + payload.size());
    put_u32(frame, static_cast<std::uint32_t>(payload.size()));
    frame.insert(frame.end(), payload.begin(), payload.end());
    stream.write_all(frame);
}

bool read_frame_or_eof(ByteStream& stream, Bytes& payload) {
    std::uint8_t prefix[4];
    if (!stream.read_exact_or_eof(prefix)) return false;
    const std::uint32_t len = get_u32(prefix);
    if (len > kMaxFrameBytes) {
        throw TransportError(stream.describe() + ": frame length " + std::to_string(len) + " exceeds the limit");
    }
    payload.resize(len);
    stream.read_exact(payload);
    return true;
}

Bytes read_frame(ByteStream& stream) {
    Bytes payload;
    if (!read_frame_or_eof(stream, payload)) throw TransportError(stream.describe() + ": peer closed the stream");
    return payload;
}

Bytes encode_info_request() {
    return header_line({{"op", "info"}});
}

Bytes encode_predict_request(std::span<const double> inputs, std::size_t dim) {
    if (dim == 0 || inputs.size() % dim != 0) throw DomainError("predict batch is not a multiple of dim");
    const std::size_t count = inputs.size() / dim;
    Bytes out = header_line({{"op", "predict"}, {"count", count}, {"dim", dim}, {"dtype", "f32"}});
    out.reserve(out.size() + 4 * inputs.size());
    for (double v : inputs) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        put_u32(out, bits);
    }
    return out;
}

Request decode_request(std::span<const std::uint8_t> payload) {
    const auto* begin = payload.data();
    const auto* newline = static_cast<const std::uint8_t*>(std::memchr(begin, '\n', payload.size()));
    if (newline == nullptr) throw TransportError("request header is not newline-terminated");
    Request req;
    try {
        req.header = nlohmann::json::parse(begin, newline);
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("request header is not valid JSON: ") + e.what());
    }
    if (!req.header.is_object() || !req.header.contains("op") || !req.header["op"].is_string()) {
        throw TransportError("request header lacks an \"op\" string");
    }
    req.op = req.header["op"].get<std::string>();
    const std::size_t body_offset = static_cast<std::size_t>(newline - begin) + 1;
    const std::size_t body_size = payload.size() - body_offset;
    if (req.op == "info") {
        if (body_size != 0) throw TransportError("info request carries a body");
        return req;
    }
    if (req.op != "predict") throw TransportError("unknown op \"" + req.op + "\"");
    try {
        req.count = req.header.at("count").get<std::size_t>();
        req.dim = req.header.at("dim").get<std::size_t>();
        if (req.header.value("dtype", std::string("f32")) != "f32") throw TransportError("only dtype f32 is supported");
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed predict header: ") + e.what());
    }
    if (req.dim == 0) throw TransportError("predict dim must be positive");
    if (req.count > kMaxFrameBytes / 4 / req.dim || body_size != 4 * req.count * req.dim) {
        throw TransportError("predict body holds " + std::to_string(body_size) + " bytes, header promises " +
                             std::to_string(req.count) + "x" + std::to_string(req.dim) + " f32");
    }
    req.values.resize(req.count * req.dim);
    for (std::size_t i = 0; i < req.values.size(); ++i) {
        const std::uint32_t bits = get_u32(begin + body_offset + 4 * i);
        std::memcpy(&req.values[i], &bits, sizeof bits);
    }
    return req;
}

Bytes encode_response(const nlohmann::json& body) {
    const std::string text = body.dump();
    return Bytes(text.begin(), text.end());
}

nlohmann::json decode_response(std::span<const std::uint8_t> payload) {
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(payload.begin(), payload.end());
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("response is not valid JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("ok") || !body["ok"].is_boolean()) {
        throw TransportError("response lacks a boolean \"ok\"");
    }
    return body;
}

void serve(ByteStream& stream, const ModelInfo& info, const PredictFn& predict) {
    Bytes payload;
    while (read_frame_or_eof(stream, payload)) {
        nlohmann::json reply;
        try {
            const Request req = decode_request(payload);
            if (req.op == "info") {
                reply = {{"ok", true}, {"label_count", info.label_count}, {"model", info.model}};
            } else {
                auto labels = predict(req.values, req.count, req.dim);
                if (labels.size() != req.count) throw TransportError("predictor returned the wrong number of labels");
                reply = {{"ok", true}, {"labels", labels}};
            }
        } catch (const std::exception& e) {
            reply = {{"ok", false}, {"error", e.what()}};
        }
        write_frame(stream, encode_response(reply));
    }
}

// --- client --------------------------------------------------------------

ExternalClassifier::ExternalClassifier(std::unique_ptr<ByteStream> stream, std::size_t dimension,
                                       std::size_t batch_size)
    : stream_(std::move(stream)), dimension_(dimension), batch_size_(batch_size) {
    if (!stream_) throw DomainError("external classifier needs a stream");
    if (dimension_ == 0) throw DomainError("classifier dimension must be at least 1");
    if (batch_size_ == 0) throw DomainError("batch size must be positive");
    const auto body = round_trip(encode_info_request());
    try {
        info_.label_count = body.at("label_count").get<std::size_t>();
        info_.model = body.value("model", std::string("unnamed"));
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(stream_->describe() + ": malformed info response: " + e.what());
    }
    if (info_.label_count < 2) throw TransportError(stream_->describe() + ": adapter reports fewer than two labels");
}

nlohmann::json ExternalClassifier::round_trip(std::span<const std::uint8_t> request) const {
    write_frame(*stream_, request);
    auto body = decode_response(read_frame(*stream_));
    if (!body["ok"].get<bool>()) {
        throw TransportError(stream_->describe() + ": adapter error: " + body.value("error", std::string("(none)")));
    }
    return body;
}

std::vector<ClassIndex> ExternalClassifier::predict_batch(std::span<const double> inputs) const {
    const std::size_t rows = checked_rows(inputs);
    std::vector<ClassIndex> out;
    out.reserve(rows);
    std::lock_guard lock(mutex_);
    for (std::size_t start = 0; start < rows; start += batch_size_) {
        const std::size_t count = std::min(batch_size_, rows - start);
        const auto chunk = inputs.subspan(start * dimension_, count * dimension_);
        const auto body = round_trip(encode_predict_request(chunk, dimension_));
        const auto& labels = body.contains("labels") ? body["labels"] : nlohmann::json();
        if (!labels.is_array() || labels.size() != count) {
            throw TransportError(stream_->describe() + ": expected " + std::to_string(count) + " labels");
        }
        for (const auto& label : labels) {
            if (!label.is_number_unsigned() || label.get<std::size_t>() >= info_.label_count) {
                throw TransportError(stream_->describe() + ": label out of range: " + label.dump());
            }
            out.push_back(label.get<ClassIndex>());
        }
    }
    return out;
}

}  // namespace irs::wire
