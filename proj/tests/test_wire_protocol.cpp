#include "irs/classifier.hpp"
#include "irs/errors.hpp"
#include "irs/noise_engine.hpp"
#include "irs/wire_protocol.hpp"

#include <doctest.h>

#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <deque>
#include <random>
#include <thread>

using namespace irs;
using namespace irs::wire;

namespace {

// Loopback stream: whatever is written can be read back.
class MemoryStream final : public ByteStream {
public:
    void write_all(std::span<const std::uint8_t> bytes) override { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
    void read_exact(std::span<std::uint8_t> out) override {
        if (!read_exact_or_eof(out)) throw TransportError("memory: empty");
    }
    bool read_exact_or_eof(std::span<std::uint8_t> out) override {
        if (out.empty()) return true;
        if (buf_.empty()) return false;
        if (buf_.size() < out.size()) throw TransportError("memory: short");
        for (auto& b : out) {
            b = buf_.front();
            buf_.pop_front();
        }
        return true;
    }
    std::string describe() const override { return "memory"; }
    std::size_t size() const { return buf_.size(); }

private:
    std::deque<std::uint8_t> buf_;
};

Bytes raw(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::pair<std::unique_ptr<FdStream>, std::unique_ptr<FdStream>> socket_pair() {
    int fds[2];
    REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) == 0);
    return {std::make_unique<FdStream>(fds[0], ::dup(fds[0]), "left"),
            std::make_unique<FdStream>(fds[1], ::dup(fds[1]), "right")};
}

const PredictFn sign_predict = [](std::span<const float> v, std::size_t count, std::size_t dim) {
    std::vector<ClassIndex> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = v[i * dim] >= 0.0f ? 1 : 0;
    return out;
};

std::vector<double> random_batch(std::mt19937_64& rng, std::size_t count, std::size_t dim) {
    std::normal_distribution<double> g(0.0, 2.0);
    std::vector<double> v(count * dim);
    for (auto& x : v) x = g(rng);
    return v;
}

}  // namespace

TEST_SUITE("wire_protocol") {

TEST_CASE("frames carry a little-endian length prefix") {
    MemoryStream s;
    const Bytes payload = raw("abc");
    write_frame(s, payload);
    CHECK(s.size() == 7);
    std::array<std::uint8_t, 4> len{};
    s.read_exact(len);
    CHECK(len == std::array<std::uint8_t, 4>{3, 0, 0, 0});
    Bytes rest(3);
    s.read_exact(rest);
    CHECK(rest == payload);
    write_frame(s, payload);
    CHECK(read_frame(s) == payload);
    Bytes none;
    CHECK_FALSE(read_frame_or_eof(s, none));
}

TEST_CASE("predict request layout") {
    const std::vector<double> in{1.5, -2.0, 0.25, 8.0};
    const auto bytes = encode_predict_request(in, 2);
    const auto nl = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
    REQUIRE(nl != bytes.end());
    const auto head = nlohmann::json::parse(bytes.begin(), nl);
    CHECK(head == nlohmann::json{{"op", "predict"}, {"count", 2}, {"dim", 2}, {"dtype", "f32"}});
    const std::size_t body = static_cast<std::size_t>(bytes.end() - nl - 1);
    REQUIRE(body == 16);
    for (std::size_t i = 0; i < 4; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(*(nl + 1 + 4 * i + b)) << (8 * b);
        CHECK(std::bit_cast<float>(bits) == static_cast<float>(in[i]));
    }
    const auto req = decode_request(bytes);
    CHECK(req.op == "predict");
    CHECK(req.count == 2);
    CHECK(req.dim == 2);
    CHECK(req.values == std::vector<float>{1.5f, -2.0f, 0.25f, 8.0f});
    CHECK(decode_request(encode_info_request()).op == "info");
    CHECK_THROWS_AS(encode_predict_request(std::vector<double>{1.0, 2.0, 3.0}, 2), DomainError);
}

TEST_CASE("malformed requests are rejected by the decoder") {
    CHECK_THROWS_AS(decode_request(raw("{\"op\":\"info\"}")), TransportError);
    CHECK_THROWS_AS(decode_request(raw("not json\n")), TransportError);
    CHECK_THROWS_AS(decode_request(raw("{\"op\":\"train\"}\n")), TransportError);
    CHECK_THROWS_AS(decode_request(raw("{\"op\":\"predict\",\"count\":1,\"dim\":2,\"dtype\":\"f32\"}\nabcd")),
                    TransportError);
    CHECK_THROWS_AS(decode_request(raw("{\"op\":\"predict\",\"count\":1,\"dim\":1,\"dtype\":\"f64\"}\nabcdabcd")),
                    TransportError);
    CHECK_THROWS_AS(decode_response(raw("{\"labels\":[]}")), TransportError);
}

TEST_CASE("server answers bad frames with ok false and keeps serving") {
    MemoryStream in;
    write_frame(in, raw("garbage"));
    write_frame(in, raw("{\"op\":\"predict\",\"count\":2,\"dim\":1,\"dtype\":\"f32\"}\nxx"));
    write_frame(in, encode_info_request());
    write_frame(in, encode_predict_request(std::vector<double>{-1.0, 3.0}, 1));

    // serve() reads and writes the same stream, so drain requests into a
    // second stream that collects responses.
    class Split final : public ByteStream {
    public:
        Split(MemoryStream& r, MemoryStream& w) : r_(r), w_(w) {}
        void write_all(std::span<const std::uint8_t> b) override { w_.write_all(b); }
        void read_exact(std::span<std::uint8_t> o) override { r_.read_exact(o); }
        bool read_exact_or_eof(std::span<std::uint8_t> o) override { return r_.read_exact_or_eof(o); }
        std::string describe() const override { return "split"; }

    private:
        MemoryStream& r_;
        MemoryStream& w_;
    };
    MemoryStream out;
    Split split(in, out);
    serve(split, ModelInfo{2, "sign"}, sign_predict);

    const auto r1 = decode_response(read_frame(out));
    const auto r2 = decode_response(read_frame(out));
    const auto r3 = decode_response(read_frame(out));
    const auto r4 = decode_response(read_frame(out));
    CHECK(r1["ok"] == false);
    CHECK(r1["error"].is_string());
    CHECK(r2["ok"] == false);
    CHECK(r3 == nlohmann::json{{"ok", true}, {"label_count", 2}, {"model", "sign"}});
    CHECK(r4 == nlohmann::json{{"ok", true}, {"labels", {0, 1}}});
    Bytes rest;
    CHECK_FALSE(read_frame_or_eof(out, rest));
}

TEST_CASE("external classifier over a socket pair") {
    auto [client, server] = socket_pair();
    std::jthread peer([s = std::move(server)]() mutable {
        serve(*s, ModelInfo{2, "sign"}, sign_predict);
    });
    const ThresholdClassifier local(0.0, ThresholdClassifier::Orientation::AbovePositive, 3);
    {
        ExternalClassifier ext(std::move(client), 3, 7);
        CHECK(ext.label_count() == 2);
        CHECK(ext.identity() == "external(sign)");
        std::mt19937_64 rng(1);
        const auto batch = random_batch(rng, 100, 3);
        CHECK(ext.predict_batch(batch) == local.predict_batch(batch));
        CHECK(ext.predict_batch(std::span<const double>{}).empty());
        CHECK_THROWS_AS(ext.predict_batch(std::vector<double>{1.0, 2.0}), DomainError);
    }
}

TEST_CASE("predictor failures surface as transport errors") {
    auto [client, server] = socket_pair();
    std::jthread peer([s = std::move(server)]() mutable {
        serve(*s, ModelInfo{3, "bad"}, [](std::span<const float>, std::size_t count, std::size_t) {
            if (count > 1) throw std::runtime_error("out of memory");
            return std::vector<ClassIndex>{7};
        });
    });
    ExternalClassifier ext(std::move(client), 1);
    CHECK(ext.label_count() == 3);
    try {
        (void)ext.predict_batch(std::vector<double>{1.0, 2.0});
        FAIL("expected a transport error");
    } catch (const TransportError& e) {
        CHECK(std::string(e.what()).find("out of memory") != std::string::npos);
    }
    CHECK_THROWS_AS(ext.predict_batch(std::vector<double>{1.0}), TransportError);  // label 7 out of range
}

TEST_CASE("echo adapter subprocess agrees with the local threshold on 10^4 batches") {
    ExternalClassifier ext(std::make_unique<SubprocessStream>(IRS_ECHO_ADAPTER), 2, 64);
    CHECK(ext.label_count() == 2);
    const ThresholdClassifier local(0.0, ThresholdClassifier::Orientation::AbovePositive, 2);
    std::mt19937_64 rng(42);
    std::size_t mismatched = 0;
    for (int b = 0; b < 10'000; ++b) {
        const auto batch = random_batch(rng, 1 + rng() % 16, 2);
        mismatched += ext.predict_batch(batch) != local.predict_batch(batch);
    }
    CHECK(mismatched == 0);
}

TEST_CASE("echo adapter over tcp") {
    const std::string cmd = std::string(IRS_ECHO_ADAPTER) + " --tcp 0 --threshold 0.5";
    FILE* proc = ::popen(cmd.c_str(), "r");
    REQUIRE(proc != nullptr);
    char line[32] = {};
    REQUIRE(std::fgets(line, sizeof line, proc) != nullptr);
    const auto port = static_cast<std::uint16_t>(std::stoi(line));
    {
        ExternalClassifier ext(connect_tcp("127.0.0.1", port), 1);
        CHECK(ext.identity().find("echo-sign") != std::string::npos);
        const ThresholdClassifier local(0.5);
        std::mt19937_64 rng(7);
        const auto batch = random_batch(rng, 1000, 1);
        CHECK(ext.predict_batch(batch) == local.predict_batch(batch));
    }
    CHECK(::pclose(proc) == 0);
}

TEST_CASE("unreachable adapters raise transport errors") {
    CHECK_THROWS_AS(ExternalClassifier(std::make_unique<SubprocessStream>("exit 0"), 1), TransportError);
    CHECK_THROWS_AS(ExternalClassifier(std::make_unique<SubprocessStream>("/nonexistent/adapter"), 1),
                    TransportError);
    std::uint16_t closed_port = 0;
    {
        TcpListener l;
        closed_port = l.port();
    }
    CHECK_THROWS_AS(connect_tcp("127.0.0.1", closed_port), TransportError);
}

}  // TEST_SUITE
