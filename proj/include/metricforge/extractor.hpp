#pragma once

// Neural feature extractor interface and the JSON wire protocol shared with
// the remote feature service.
//
//   POST /v1/features  {"pairs":[{"reference":..,"candidate":..}]}
//     200 -> {"features":[{"sem_sim":..,"mnli":[c,n,e],"ppl_ref":..,"ppl_cand":..}],
//             "extractor_version":..}
//     422 -> {"errors":[{"index":i,"error":..}]}
//   GET  /v1/health -> {"status":..,"extractor_version":..}

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metricforge/core.hpp"
#include "metricforge/error.hpp"

namespace metricforge {

/// The model-derived part of a FeatureVector; word counts are computed locally.
struct NeuralFeatures {
    double sem_sim = 0.0;
    std::array<double, 3> mnli{};  // contradiction, neutral, entailment
    double ppl_ref = 1.0;
    double ppl_cand = 1.0;

    friend bool operator==(const NeuralFeatures&, const NeuralFeatures&) = default;
};

struct ExtractionBatch {
    std::vector<NeuralFeatures> features;  // same order as the request
    std::string extractor_version;
};

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;

    /// Features for at most max_batch() pairs. May be called concurrently
    /// when max_in_flight() > 1.
    virtual ExtractionBatch extract(std::span<const SentencePair> pairs) = 0;
    virtual std::size_t max_batch() const = 0;
    virtual std::size_t max_in_flight() const { return 1; }
};

namespace wire {

inline nlohmann::json encode_request(std::span<const SentencePair> pairs) {
    auto items = nlohmann::json::array();
    for (const auto& p : pairs) items.push_back({{"reference", p.reference()}, {"candidate", p.candidate()}});
    return {{"pairs", items}};
}

struct RequestItem {
    std::string reference;
    std::string candidate;
};

/// Server side. Throws ProtocolError on a malformed body.
inline std::vector<RequestItem> decode_request(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        std::vector<RequestItem> out;
        for (const auto& item : j.at("pairs")) {
            out.push_back({item.at("reference").get<std::string>(), item.at("candidate").get<std::string>()});
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed features request: ") + e.what());
    }
}

inline nlohmann::json encode_response(const ExtractionBatch& batch) {
    auto items = nlohmann::json::array();
    for (const auto& f : batch.features) {
        items.push_back({{"sem_sim", f.sem_sim},
                         {"mnli", {f.mnli[0], f.mnli[1], f.mnli[2]}},
                         {"ppl_ref", f.ppl_ref},
                         {"ppl_cand", f.ppl_cand}});
    }
    return {{"features", items}, {"extractor_version", batch.extractor_version}};
}

/// Client side. Throws ProtocolError unless the body carries exactly `expected` feature items.
inline ExtractionBatch decode_response(const std::string& body, std::size_t expected) {
    ExtractionBatch batch;
    try {
        const auto j = nlohmann::json::parse(body);
        batch.extractor_version = j.at("extractor_version").get<std::string>();
        if (batch.extractor_version.empty()) throw ProtocolError("features response: empty extractor_version");
        const auto& items = j.at("features");
        if (!items.is_array() || items.size() != expected) {
            throw ProtocolError("features response: expected " + std::to_string(expected) + " items, got " +
                                std::to_string(items.is_array() ? items.size() : 0));
        }
        for (const auto& item : items) {
            NeuralFeatures f;
            f.sem_sim = item.at("sem_sim").get<double>();
            const auto mnli = item.at("mnli").get<std::vector<double>>();
            if (mnli.size() != 3) throw ProtocolError("features response: mnli must have 3 probabilities");
            f.mnli = {mnli[0], mnli[1], mnli[2]};
            f.ppl_ref = item.at("ppl_ref").get<double>();
            f.ppl_cand = item.at("ppl_cand").get<double>();
            batch.features.push_back(f);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed features response: ") + e.what());
    }
    return batch;
}

struct Health {
    std::string status;
    std::string extractor_version;
};

inline Health decode_health(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        return {j.at("status").get<std::string>(), j.at("extractor_version").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed health response: ") + e.what());
    }
}

}  // namespace wire
}  // namespace metricforge
