// Minimal protocol peer: labels each input by the sign of its first
// coordinate (class 1 iff x0 >= threshold). Serves stdio by default; with
// --tcp it listens on loopback, prints the bound port and serves one client.

#include "irs/errors.hpp"
#include "irs/wire_protocol.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Echo classifier speaking the certification wire protocol"};
    double threshold = 0.0;
    std::optional<std::uint16_t> tcp_port;
    app.add_option("--threshold", threshold, "decision threshold on coordinate 0");
    app.add_option("--tcp", tcp_port, "listen on this loopback port (0 picks one) instead of stdio");
    CLI11_PARSE(app, argc, argv);

    const irs::wire::ModelInfo info{2, "echo-sign(t=" + std::to_string(threshold) + ")"};
    const irs::wire::PredictFn predict = [threshold](std::span<const float> values, std::size_t count,
                                                     std::size_t dim) {
        std::vector<irs::ClassIndex> labels(count);
        for (std::size_t i = 0; i < count; ++i) {
            labels[i] = static_cast<double>(values[i * dim]) >= threshold ? 1 : 0;
        }
        return labels;
    };

    try {
        if (tcp_port) {
            irs::wire::TcpListener listener(*tcp_port);
            std::cout << listener.port() << std::endl;
            auto stream = listener.accept();
            irs::wire::serve(*stream, info, predict);
        } else {
            irs::wire::FdStream stream(0, 1, "stdio");
            irs::wire::serve(stream, info, predict);
        }
    } catch (const std::exception& e) {
        std::cerr << "irs_echo_adapter: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
