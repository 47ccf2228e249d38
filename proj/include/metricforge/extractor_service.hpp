#pragma once

// Server side of the feature wire protocol, for serving any FeatureExtractor
// over HTTP (the stub server and in-process test fixtures use it).

#include <atomic>
#include <cstddef>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "metricforge/extractor.hpp"

namespace metricforge {

struct ServiceOptions {
    std::string extractor_version;
    std::size_t max_batch = 32;
    const std::atomic<bool>* ready = nullptr;  // null means always ready
};

inline void install_feature_routes(httplib::Server& server, FeatureExtractor& extractor, ServiceOptions options) {
    auto is_ready = [ready = options.ready] { return ready == nullptr || ready->load(); };

    server.Get("/v1/health", [=](const httplib::Request&, httplib::Response& res) {
        const bool up = is_ready();
        res.status = up ? 200 : 503;
        res.set_content(nlohmann::json{{"status", up ? "ready" : "loading"},
                                       {"extractor_version", options.extractor_version}}
                            .dump(),
                        "application/json");
    });

    server.Post("/v1/features", [=, &extractor](const httplib::Request& req, httplib::Response& res) {
        if (!is_ready()) {
            res.status = 503;
            res.set_content(R"({"errors":[{"index":-1,"error":"models loading"}]})", "application/json");
            return;
        }
        auto reject = [&](nlohmann::json errors) {
            res.status = 422;
            res.set_content(nlohmann::json{{"errors", std::move(errors)}}.dump(), "application/json");
        };
        std::vector<wire::RequestItem> items;
        try {
            items = wire::decode_request(req.body);
        } catch (const ProtocolError& e) {
            reject(nlohmann::json::array({{{"index", -1}, {"error", e.what()}}}));
            return;
        }
        if (items.empty() || items.size() > options.max_batch) {
            reject(nlohmann::json::array(
                {{{"index", -1}, {"error", "batch size must be in [1, " + std::to_string(options.max_batch) + "]"}}}));
            return;
        }
        auto errors = nlohmann::json::array();
        std::vector<SentencePair> pairs;
        for (std::size_t i = 0; i < items.size(); ++i) {
            try {
                pairs.emplace_back(items[i].reference, items[i].candidate);
            } catch (const DataError& e) {
                errors.push_back({{"index", i}, {"error", e.what()}});
            }
        }
        if (!errors.empty()) {
            reject(std::move(errors));
            return;
        }
        ExtractionBatch batch = extractor.extract(pairs);
        batch.extractor_version = options.extractor_version;
        res.set_content(wire::encode_response(batch).dump(), "application/json");
    });
}

}  // namespace metricforge
