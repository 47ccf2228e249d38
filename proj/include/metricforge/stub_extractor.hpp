#pragma once

// Deterministic stand-in for the neural feature service. Its semantic
// similarity is a monotone function of clipped unigram overlap, which makes
// end-to-end runs reproducible without model checkpoints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "metricforge/baseline_metrics.hpp"
#include "metricforge/extractor.hpp"
#include "metricforge/text.hpp"

namespace metricforge {

inline constexpr std::string_view kStubExtractorVersion = "stub-overlap-1";

/// Clipped unigram F1 between the token bags of two texts, in [0,1].
inline double unigram_overlap(std::string_view reference, std::string_view candidate) {
    const auto ref = tokenize(reference);
    const auto cand = tokenize(candidate);
    if (ref.empty() || cand.empty()) return 0.0;
    std::map<std::string, std::size_t> bag;
    for (const auto& t : ref) ++bag[t];
    std::size_t matched = 0;
    for (const auto& t : cand) {
        auto it = bag.find(t);
        if (it != bag.end() && it->second > 0) {
            --it->second;
            ++matched;
        }
    }
    return static_cast<double>(2 * matched) / static_cast<double>(ref.size() + cand.size());
}

/// Pseudo-perplexity in [e, e^2], a fixed function of the canonical text.
inline double stub_perplexity(std::string_view s) {
    const std::string digest = text::sha256_hex(text::canonical(s));
    const auto bucket = std::stoul(digest.substr(0, 8), nullptr, 16) % 1000;
    return std::exp(1.0 + static_cast<double>(bucket) / 1000.0);
}

inline NeuralFeatures stub_features(std::string_view reference, std::string_view candidate) {
    const double overlap = unigram_overlap(reference, candidate);
    NeuralFeatures f;
    f.sem_sim = 5.0 * overlap;
    const double entail = 0.05 + 0.9 * overlap * overlap;
    const double contra = 0.05 + 0.9 * (1.0 - overlap) * (1.0 - overlap);
    f.mnli = {contra, std::max(0.0, 1.0 - entail - contra), entail};
    f.ppl_ref = stub_perplexity(reference);
    f.ppl_cand = stub_perplexity(candidate);
    return f;
}

class StubExtractor final : public FeatureExtractor {
public:
    explicit StubExtractor(std::size_t max_batch = 32, std::size_t max_in_flight = 1,
                           std::string version = std::string(kStubExtractorVersion))
        : max_batch_(max_batch), max_in_flight_(max_in_flight), version_(std::move(version)) {}

    ExtractionBatch extract(std::span<const SentencePair> pairs) override {
        {
            std::lock_guard lock(mutex_);
            batch_sizes_.push_back(pairs.size());
            requested_ += pairs.size();
        }
        ExtractionBatch batch;
        batch.extractor_version = version_;
        for (const auto& p : pairs) batch.features.push_back(stub_features(p.reference(), p.candidate()));
        return batch;
    }

    std::size_t max_batch() const override { return max_batch_; }
    std::size_t max_in_flight() const override { return max_in_flight_; }
    const std::string& version() const noexcept { return version_; }

    /// Sizes of every batch served so far, in call order.
    std::vector<std::size_t> batch_sizes() const {
        std::lock_guard lock(mutex_);
        return batch_sizes_;
    }

    std::size_t pairs_served() const {
        std::lock_guard lock(mutex_);
        return requested_;
    }

private:
    std::size_t max_batch_;
    std::size_t max_in_flight_;
    std::string version_;
    mutable std::mutex mutex_;
    std::vector<std::size_t> batch_sizes_;
    std::size_t requested_ = 0;
};

}  // namespace metricforge
