// Serves the deterministic stub extractor over the feature wire protocol.
// Useful for end-to-end runs without model checkpoints.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "metricforge/extractor_service.hpp"
#include "metricforge/stub_extractor.hpp"

namespace mf = metricforge;

int main(int argc, char** argv) {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t max_batch = 32;
    std::string port_file;
    int load_delay_ms = 0;

    CLI::App app{"Stub feature service (sem_sim from unigram overlap)."};
    app.name("metricforge-stub-extractor");
    app.add_option("--host", host, "Address to bind");
    app.add_option("--port", port, "Port to bind; 0 picks a free one");
    app.add_option("--max-batch", max_batch, "Largest accepted batch")->check(CLI::PositiveNumber);
    app.add_option("--port-file", port_file, "Write the bound port to this file once listening");
    app.add_option("--load-delay-ms", load_delay_ms, "Answer 503 for this long after start");
    CLI11_PARSE(app, argc, argv);

    // Termination signals are taken synchronously by a watcher thread.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    mf::StubExtractor stub(max_batch);
    std::atomic<bool> ready{load_delay_ms <= 0};
    httplib::Server server;
    mf::install_feature_routes(server, stub, {std::string(mf::kStubExtractorVersion), max_batch, &ready});

    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return 2;
    }
    std::thread loader;
    if (!ready) {
        loader = std::thread([&] {
            std::this_thread::sleep_for(std::chrono::milliseconds(load_delay_ms));
            ready = true;
        });
    }
    std::thread watcher([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    watcher.detach();

    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    if (!port_file.empty()) {
        std::ofstream(port_file + ".tmp") << bound << "\n";
        std::rename((port_file + ".tmp").c_str(), port_file.c_str());
    }
    std::cout << "listening on http://" << host << ":" << bound << std::endl;
    listener.join();
    if (loader.joinable()) loader.join();
    std::cout << "served " << stub.pairs_served() << " pairs" << std::endl;
    return 0;
}
