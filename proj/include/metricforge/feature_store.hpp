#pragma once

// Content-addressed feature cache persisted as append-only JSON Lines.
//
// Line 1 is a header:
//   {"format_version":1,"extractor_version":...,"tokenizer_version":...,"pair_digest":...}
// Every following line is one FeatureRecord. The pair digest is
//   lowercase-hex SHA-256( trim(NFC(reference)) + U+001F + trim(NFC(candidate)) )
// where trim removes leading/trailing White_Space code points.

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "metricforge/baseline_metrics.hpp"
#include "metricforge/core.hpp"
#include "metricforge/error.hpp"
#include "metricforge/text.hpp"

namespace metricforge {

inline constexpr int kCacheFormatVersion = 1;
inline constexpr std::string_view kPairDigestDescription =
    "sha256_hex(trim(NFC(reference)) + U+001F + trim(NFC(candidate)))";

inline std::string pair_digest(std::string_view reference, std::string_view candidate) {
    return text::sha256_hex(text::canonical(reference) + '\x1f' + text::canonical(candidate));
}

inline std::string pair_digest(const SentencePair& pair) { return pair_digest(pair.reference(), pair.candidate()); }

struct FeatureRecord {
    std::string pair_digest;
    SentencePair pair;
    FeatureVector features;
    std::string extractor_version;

    friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

inline nlohmann::ordered_json to_json(const FeatureVector& fv) {
    return {{"sem_sim", fv.sem_sim},
            {"mnli", {fv.mnli_contradiction, fv.mnli_neutral, fv.mnli_entailment}},
            {"ppl_ref", fv.ppl_ref},
            {"ppl_cand", fv.ppl_cand},
            {"len_ref", fv.len_ref},
            {"len_cand", fv.len_cand}};
}

inline nlohmann::ordered_json to_json(const FeatureRecord& r) {
    return {{"pair_digest", r.pair_digest},
            {"reference", r.pair.reference()},
            {"candidate", r.pair.candidate()},
            {"features", to_json(r.features)},
            {"extractor_version", r.extractor_version}};
}

inline FeatureRecord record_from_json(const nlohmann::json& j) {
    const auto& f = j.at("features");
    const auto mnli = f.at("mnli").get<std::vector<double>>();
    if (mnli.size() != 3) throw DataError("feature record: mnli must have 3 entries");
    FeatureVector fv{f.at("sem_sim").get<double>(),
                     mnli[0],
                     mnli[1],
                     mnli[2],
                     f.at("ppl_ref").get<double>(),
                     f.at("ppl_cand").get<double>(),
                     f.at("len_ref").get<std::uint64_t>(),
                     f.at("len_cand").get<std::uint64_t>()};
    return FeatureRecord{j.at("pair_digest").get<std::string>(),
                         SentencePair(j.at("reference").get<std::string>(), j.at("candidate").get<std::string>()),
                         fv, j.at("extractor_version").get<std::string>()};
}

struct FeatureStoreOptions {
    bool allow_mixed = false;  // accept records whose extractor_version differs from the header
};

/// Thread-safe: concurrent lookups, appends serialized through one writer lock.
class FeatureStore {
public:
    /// In-memory store, nothing persisted.
    explicit FeatureStore(FeatureStoreOptions options = {}) : options_(options) {}

    /// Store backed by `path`; existing content is loaded and validated.
    explicit FeatureStore(std::filesystem::path path, FeatureStoreOptions options = {})
        : path_(std::move(path)), options_(options) {
        load();
    }

    FeatureStore(const FeatureStore&) = delete;
    FeatureStore& operator=(const FeatureStore&) = delete;

    std::optional<FeatureRecord> find(const std::string& digest) const {
        std::shared_lock lock(mutex_);
        auto it = index_.find(digest);
        if (it == index_.end()) return std::nullopt;
        return records_[it->second];
    }

    bool contains(const std::string& digest) const {
        std::shared_lock lock(mutex_);
        return index_.contains(digest);
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return records_.size();
    }

    std::optional<std::string> extractor_version() const {
        std::shared_lock lock(mutex_);
        return version_;
    }

    /// Records in insertion order.
    std::vector<FeatureRecord> records() const {
        std::shared_lock lock(mutex_);
        return records_;
    }

    const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

    /// Appends records not already present. Returns how many were new.
    std::size_t append(std::span<const FeatureRecord> batch) {
        std::unique_lock lock(mutex_);
        std::vector<const FeatureRecord*> fresh;
        std::optional<std::string> version = version_;
        for (const auto& r : batch) {
            if (index_.contains(r.pair_digest)) continue;
            if (r.pair_digest != pair_digest(r.pair)) throw DataError("feature record digest does not match its texts");
            if (!validate_features(r.features).empty()) throw DataError("feature record violates invariants");
            if (!version) version = r.extractor_version;
            if (r.extractor_version != *version && !options_.allow_mixed) {
                throw DataError("extractor version mismatch: cache holds '" + *version + "', record has '" +
                                r.extractor_version + "' (use --allow-mixed to override)");
            }
            bool duplicate_in_batch = false;
            for (const auto* f : fresh) duplicate_in_batch = duplicate_in_batch || f->pair_digest == r.pair_digest;
            if (!duplicate_in_batch) fresh.push_back(&r);
        }
        if (fresh.empty()) return 0;
        version_ = version;

        if (path_) {
            const bool need_header = !std::filesystem::exists(*path_) || std::filesystem::file_size(*path_) == 0;
            std::ofstream out(*path_, std::ios::binary | std::ios::app);
            if (!out) throw DataError("cannot open feature cache " + path_->string() + " for append");
            if (need_header) out << header_json().dump() << '\n';
            for (const auto* r : fresh) out << to_json(*r).dump() << '\n';
            out.flush();
            if (!out) throw DataError("failed writing feature cache " + path_->string());
        }
        for (const auto* r : fresh) {
            index_.emplace(r->pair_digest, records_.size());
            records_.push_back(*r);
        }
        return fresh.size();
    }

private:
    nlohmann::ordered_json header_json() const {
        return {{"format_version", kCacheFormatVersion},
                {"extractor_version", version_.value_or("")},
                {"tokenizer_version", kTokenizerVersion},
                {"pair_digest", kPairDigestDescription}};
    }

    void load() {
        if (!std::filesystem::exists(*path_)) return;
        std::ifstream in(*path_, std::ios::binary);
        if (!in) throw DataError("cannot open feature cache " + path_->string());
        const std::string source = path_->string();
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(source, line_no, 0, std::string("invalid JSON: ") + e.what());
            }
            if (line_no == 1) {
                read_header(j, source);
                continue;
            }
            FeatureRecord record = [&] {
                try {
                    return record_from_json(j);
                } catch (const nlohmann::json::exception& e) {
                    throw ParseError(source, line_no, 0, std::string("malformed record: ") + e.what());
                } catch (const DataError& e) {
                    throw ParseError(source, line_no, 0, e.what());
                }
            }();
            if (record.pair_digest != pair_digest(record.pair)) {
                throw ParseError(source, line_no, 0, "pair_digest does not match record texts");
            }
            if (!validate_features(record.features).empty()) {
                throw ParseError(source, line_no, 0, "record features violate invariants");
            }
            if (record.extractor_version != *version_ && !options_.allow_mixed) {
                throw ParseError(source, line_no, 0,
                                 "extractor_version '" + record.extractor_version + "' differs from header '" +
                                     *version_ + "' (use --allow-mixed to override)");
            }
            if (index_.contains(record.pair_digest)) continue;
            index_.emplace(record.pair_digest, records_.size());
            records_.push_back(std::move(record));
        }
    }

    void read_header(const nlohmann::json& j, const std::string& source) {
        try {
            if (j.at("format_version").get<int>() != kCacheFormatVersion) {
                throw ParseError(source, 1, 0, "unsupported cache format_version");
            }
            if (j.at("tokenizer_version").get<std::string>() != kTokenizerVersion) {
                throw ParseError(source, 1, 0, "cache built with a different tokenizer version");
            }
            version_ = j.at("extractor_version").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(source, 1, 0, std::string("malformed cache header: ") + e.what());
        }
    }

    std::optional<std::filesystem::path> path_;
    FeatureStoreOptions options_;
    std::optional<std::string> version_;
    std::vector<FeatureRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
    mutable std::shared_mutex mutex_;
};

}  // namespace metricforge
