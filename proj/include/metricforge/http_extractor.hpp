#pragma once

// HTTP client for the remote feature service.

#include <chrono>
#include <cstddef>
#include <string>
#include <thread>

#include <httplib.h>

#include "metricforge/error.hpp"
#include "metricforge/extractor.hpp"

namespace metricforge {

struct RetryPolicy {
    std::size_t attempts = 3;
    std::chrono::milliseconds backoff{200};  // multiplied by the attempt number
};

struct ExtractorEndpoint {
    std::string base_url;  // e.g. http://localhost:8080 or http://host/prefix
    std::chrono::milliseconds timeout{30000};
    std::size_t max_batch = 32;
    std::size_t max_in_flight = 1;
    RetryPolicy retry{};
};

class HttpExtractor final : public FeatureExtractor {
public:
    explicit HttpExtractor(ExtractorEndpoint endpoint) : endpoint_(std::move(endpoint)) {
        if (endpoint_.max_batch < 1) throw std::invalid_argument("extractor endpoint: max_batch must be >= 1");
        if (endpoint_.max_in_flight < 1) throw std::invalid_argument("extractor endpoint: max_in_flight must be >= 1");
        if (endpoint_.retry.attempts < 1) throw std::invalid_argument("extractor endpoint: attempts must be >= 1");
        split_url();
    }

    std::size_t max_batch() const override { return endpoint_.max_batch; }
    std::size_t max_in_flight() const override { return endpoint_.max_in_flight; }

    ExtractionBatch extract(std::span<const SentencePair> pairs) override {
        const std::string body = wire::encode_request(pairs).dump();
        std::string last_error;
        for (std::size_t attempt = 1; attempt <= endpoint_.retry.attempts; ++attempt) {
            if (attempt > 1) std::this_thread::sleep_for(endpoint_.retry.backoff * (attempt - 1));
            auto client = make_client();
            auto res = client.Post(prefix_ + "/v1/features", body, "application/json");
            if (!res) {
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status == 200) return wire::decode_response(res->body, pairs.size());
            if (res->status == 422) throw ProtocolError("feature service rejected request (422): " + res->body);
            if (res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            throw ProtocolError("feature service returned unexpected HTTP " + std::to_string(res->status));
        }
        throw ExtractionError("feature service unreachable at " + endpoint_.base_url + " after " +
                              std::to_string(endpoint_.retry.attempts) + " attempts: " + last_error);
    }

    wire::Health health() {
        auto client = make_client();
        auto res = client.Get(prefix_ + "/v1/health");
        if (!res) throw ExtractionError("health check failed: " + httplib::to_string(res.error()));
        if (res->status != 200) {
            throw ExtractionError("health check returned HTTP " + std::to_string(res->status));
        }
        return wire::decode_health(res->body);
    }

    const ExtractorEndpoint& endpoint() const noexcept { return endpoint_; }

private:
    void split_url() {
        const auto scheme_end = endpoint_.base_url.find("://");
        const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        const auto path_start = endpoint_.base_url.find('/', host_start);
        if (path_start == std::string::npos) {
            host_ = endpoint_.base_url;
        } else {
            host_ = endpoint_.base_url.substr(0, path_start);
            prefix_ = endpoint_.base_url.substr(path_start);
            while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        }
        if (host_.size() <= host_start) throw std::invalid_argument("extractor endpoint: bad URL " + endpoint_.base_url);
    }

    httplib::Client make_client() const {
        httplib::Client client(host_);
        client.set_connection_timeout(endpoint_.timeout);
        client.set_read_timeout(endpoint_.timeout);
        client.set_write_timeout(endpoint_.timeout);
        return client;
    }

    ExtractorEndpoint endpoint_;
    std::string host_;
    std::string prefix_;
};

}  // namespace metricforge
