#pragma once

// End-to-end scoring: cache-first feature acquisition, aggregation, and
// calibration by the reference self-score; plus evaluation-set scoring and
// the feature-group ablation driver.

#include <algorithm>
#include <cstddef>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "metricforge/aggregator.hpp"
#include "metricforge/baseline_metrics.hpp"
#include "metricforge/core.hpp"
#include "metricforge/correlation.hpp"
#include "metricforge/error.hpp"
#include "metricforge/extractor.hpp"
#include "metricforge/feature_store.hpp"
#include "metricforge/ingestion.hpp"

namespace metricforge {

/// Word count under the canonical tokenizer.
inline std::size_t count_words(std::string_view s) { return tokenize(s).size(); }

/// Where features come from. A null extractor means offline: cache only.
struct FeatureSource {
    FeatureExtractor* extractor = nullptr;
    FeatureStore& cache;
};

inline FeatureVector merge_features(const NeuralFeatures& n, const SentencePair& pair) {
    return FeatureVector{n.sem_sim,  n.mnli[0],  n.mnli[1],
                         n.mnli[2],  n.ppl_ref,  n.ppl_cand,
                         count_words(pair.reference()), count_words(pair.candidate())};
}

enum class AcquireFailure { none, cache_miss, transport, protocol };

struct Acquisition {
    std::unordered_map<std::string, FeatureRecord> records;  // by pair digest
    std::vector<std::string> missing;                        // digests not obtained
    AcquireFailure failure = AcquireFailure::none;
    std::string message;
    std::size_t fetched = 0;  // distinct pairs obtained from the extractor
    std::size_t cached = 0;   // distinct pairs served from the cache
};

/// Best-effort acquisition: collects what it can and reports what it could not.
inline Acquisition acquire_features(std::span<const SentencePair> pairs, FeatureSource& source) {
    Acquisition result;
    std::vector<SentencePair> misses;
    std::vector<std::string> miss_digests;
    std::unordered_set<std::string> seen;
    for (const auto& pair : pairs) {
        std::string digest = pair_digest(pair);
        if (!seen.insert(digest).second) continue;
        if (auto hit = source.cache.find(digest)) {
            result.records.emplace(digest, std::move(*hit));
            ++result.cached;
        } else {
            misses.push_back(pair);
            miss_digests.push_back(std::move(digest));
        }
    }
    if (misses.empty()) return result;

    if (source.extractor == nullptr) {
        result.failure = AcquireFailure::cache_miss;
        result.message = std::to_string(misses.size()) + " pair(s) not in cache and no extractor available";
        result.missing = std::move(miss_digests);
        return result;
    }

    FeatureExtractor& extractor = *source.extractor;
    const std::size_t batch = std::max<std::size_t>(1, extractor.max_batch());
    const std::size_t in_flight = std::max<std::size_t>(1, extractor.max_in_flight());
    struct Slice {
        std::size_t begin, end;
    };
    std::vector<Slice> slices;
    for (std::size_t b = 0; b < misses.size(); b += batch) slices.push_back({b, std::min(b + batch, misses.size())});

    auto fail_slice = [&](const Slice& s, AcquireFailure kind, const std::string& message) {
        for (std::size_t i = s.begin; i < s.end; ++i) result.missing.push_back(miss_digests[i]);
        if (result.failure == AcquireFailure::none || kind == AcquireFailure::transport) {
            result.failure = kind;
            result.message = message;
        }
    };

    bool transport_down = false;
    for (std::size_t window = 0; window < slices.size(); window += in_flight) {
        const std::size_t window_end = std::min(window + in_flight, slices.size());
        if (transport_down) {
            for (std::size_t w = window; w < window_end; ++w) fail_slice(slices[w], AcquireFailure::transport, result.message);
            continue;
        }
        std::vector<std::future<ExtractionBatch>> pending;
        for (std::size_t w = window; w < window_end; ++w) {
            // Texts go out in canonical form; the digest is defined over the same form.
            std::vector<SentencePair> request;
            for (std::size_t i = slices[w].begin; i < slices[w].end; ++i) {
                request.emplace_back(text::canonical(misses[i].reference()), text::canonical(misses[i].candidate()));
            }
            pending.push_back(std::async(std::launch::async, [&extractor, request = std::move(request)] {
                return extractor.extract(request);
            }));
        }
        // Completion order does not matter: slices are merged in request order.
        for (std::size_t w = window; w < window_end; ++w) {
            const Slice& s = slices[w];
            ExtractionBatch got;
            try {
                got = pending[w - window].get();
            } catch (const ProtocolError& e) {
                fail_slice(s, AcquireFailure::protocol, e.what());
                continue;
            } catch (const ExtractionError& e) {
                fail_slice(s, AcquireFailure::transport, e.what());
                transport_down = true;
                continue;
            }
            if (got.features.size() != s.end - s.begin) {
                fail_slice(s, AcquireFailure::protocol, "extractor returned a wrong number of feature items");
                continue;
            }
            std::vector<FeatureRecord> fresh;
            std::string invalid;
            for (std::size_t i = s.begin; i < s.end; ++i) {
                FeatureVector fv = merge_features(got.features[i - s.begin], misses[i]);
                if (auto v = validate_features(fv); !v.empty()) {
                    invalid = "extractor returned invalid features (" + v.front() + ")";
                    break;
                }
                fresh.push_back(FeatureRecord{miss_digests[i], misses[i], fv, got.extractor_version});
            }
            if (!invalid.empty()) {
                fail_slice(s, AcquireFailure::protocol, invalid);
                continue;
            }
            source.cache.append(fresh);
            for (auto& r : fresh) {
                std::string digest = r.pair_digest;
                result.records.emplace(std::move(digest), std::move(r));
                ++result.fetched;
            }
        }
    }
    return result;
}

[[noreturn]] inline void throw_acquisition_failure(const Acquisition& a) {
    std::string what = a.message + "; unfetched:";
    for (const auto& d : a.missing) what += " " + d;
    switch (a.failure) {
        case AcquireFailure::cache_miss: throw CacheMissError("cache miss: " + what, a.missing);
        case AcquireFailure::protocol: throw ProtocolError("protocol error: " + what, a.missing);
        default: throw ExtractionError("extraction failed: " + what, a.missing);
    }
}

/// Cache-first features for every pair, returned in input order.
inline std::vector<FeatureRecord> extract_features(std::span<const SentencePair> pairs, FeatureSource& source) {
    Acquisition a = acquire_features(pairs, source);
    if (!a.missing.empty()) throw_acquisition_failure(a);
    std::vector<FeatureRecord> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) out.push_back(a.records.at(pair_digest(pair)));
    return out;
}

/// Features of (text, text).
inline FeatureVector self_features(const std::string& text, FeatureSource& source) {
    const SentencePair self(text, text);
    return extract_features(std::span(&self, 1), source).front().features;
}

// ---- calibration -----------------------------------------------------------

enum class SelfScoreMode { reference, candidate };

struct CalibrationOptions {
    SelfScoreMode mode = SelfScoreMode::reference;
    double epsilon = 1e-6;
};

struct NubiaScore {
    double score = 0.0;       // calibrated, in [0,1]
    double raw = 0.0;         // regressor output for the pair
    double self = 0.0;        // regressor output for the self pair
    bool normalized = false;  // false when self <= epsilon
    std::string warning;
};

inline NubiaScore calibrate(double raw, double self, const CalibrationOptions& options = {}) {
    NubiaScore s;
    s.raw = raw;
    s.self = self;
    double value = raw;
    if (self > options.epsilon) {
        value = raw / self;
        s.normalized = true;
    } else {
        s.warning = "self-score " + std::to_string(self) + " <= epsilon; normalization skipped";
    }
    s.score = std::clamp(value, 0.0, 1.0);
    return s;
}

inline SentencePair self_pair(const SentencePair& pair, SelfScoreMode mode) {
    const auto& t = mode == SelfScoreMode::reference ? pair.reference() : pair.candidate();
    return SentencePair(t, t);
}

inline NubiaScore nubia_score(const TrainedAggregator& model, const SentencePair& pair, FeatureSource& source,
                              const CalibrationOptions& options = {}) {
    const std::vector<SentencePair> request{pair, self_pair(pair, options.mode)};
    const auto records = extract_features(request, source);
    return calibrate(predict_raw(model, records[0].features), predict_raw(model, records[1].features), options);
}

/// Multiple references: the candidate is scored against each independently; the best score wins.
inline NubiaScore nubia_score_multi(const TrainedAggregator& model, const std::string& candidate,
                                    std::span<const std::string> references, FeatureSource& source,
                                    const CalibrationOptions& options = {}) {
    if (references.empty()) throw std::invalid_argument("nubia_score_multi: no references");
    std::optional<NubiaScore> best;
    for (const auto& ref : references) {
        NubiaScore s = nubia_score(model, SentencePair(ref, candidate), source, options);
        if (!best || s.score > best->score) best = std::move(s);
    }
    return *best;
}

struct PairFailure {
    std::size_t index;
    std::string message;
};

struct BatchScores {
    std::vector<std::optional<NubiaScore>> scores;  // one slot per input pair
    std::vector<PairFailure> errors;                // manifest of the empty slots
};

/// Elementwise nubia_score with one feature lookup per distinct pair (self
/// pairs included). Failures are collected per pair.
inline BatchScores score_batch(const TrainedAggregator& model, std::span<const SentencePair> pairs,
                               FeatureSource& source, const CalibrationOptions& options = {}) {
    std::vector<SentencePair> request(pairs.begin(), pairs.end());
    for (const auto& p : pairs) request.push_back(self_pair(p, options.mode));
    const Acquisition a = acquire_features(request, source);
    const std::unordered_set<std::string> missing(a.missing.begin(), a.missing.end());

    BatchScores out;
    out.scores.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::string d = pair_digest(pairs[i]);
        const std::string sd = pair_digest(self_pair(pairs[i], options.mode));
        if (missing.contains(d) || missing.contains(sd)) {
            out.errors.push_back({i, "features unavailable: " + a.message});
            continue;
        }
        try {
            out.scores[i] = calibrate(predict_raw(model, a.records.at(d).features),
                                      predict_raw(model, a.records.at(sd).features), options);
        } catch (const Error& e) {
            out.errors.push_back({i, e.what()});
        }
    }
    return out;
}

// ---- evaluation sets -------------------------------------------------------

enum class Protocol { pearson, darr, tau_b };

inline Protocol parse_protocol(std::string_view s) {
    if (s == "pearson") return Protocol::pearson;
    if (s == "darr") return Protocol::darr;
    if (s == "tau_b") return Protocol::tau_b;
    throw std::invalid_argument("unknown protocol '" + std::string(s) + "'");
}

constexpr std::string_view protocol_name(Protocol p) {
    switch (p) {
        case Protocol::pearson: return "pearson";
        case Protocol::darr: return "darr";
        case Protocol::tau_b: return "tau_b";
    }
    return "?";
}

/// One test segment: a candidate, its references, and the human label
/// (DA 0..100 for darr, DA/100 for pearson, mean expert score for tau_b).
struct EvalItem {
    std::string lang_pair;
    std::int64_t segment_id = 0;
    std::string system_id;
    std::string candidate;
    std::vector<std::string> references;
    double human_score = 0.0;
};

struct EvalSet {
    Protocol protocol = Protocol::pearson;
    std::vector<EvalItem> items;
    std::vector<RankedPair> ranked;  // darr only
};

inline EvalSet make_da_eval_set(std::span<const CanonicalDaRow> rows, Protocol protocol) {
    if (protocol == Protocol::tau_b) throw std::invalid_argument("tau_b protocol needs caption judgments");
    EvalSet set;
    set.protocol = protocol;
    for (const auto& r : rows) {
        set.items.push_back(EvalItem{r.lang_pair, r.segment_id, r.system_id, r.candidate, {r.reference},
                                     protocol == Protocol::pearson ? r.human_score / 100.0 : r.human_score});
    }
    if (protocol == Protocol::darr) set.ranked = da_to_relative_ranking(rows_to_da_groups(rows));
    return set;
}

inline EvalSet make_caption_eval_set(std::span<const CaptionJudgment> judgments) {
    EvalSet set;
    set.protocol = Protocol::tau_b;
    std::int64_t index = 0;
    for (const auto& j : judgments) {
        set.items.push_back(EvalItem{"flickr8k", index++, j.caption_id, j.candidate_caption, j.references,
                                     j.human_target()});
    }
    return set;
}

/// Features for each (reference, candidate) of an item and the matching self pairs.
struct ItemFeatures {
    std::vector<FeatureVector> pair;
    std::vector<FeatureVector> self;
};

inline std::vector<ItemFeatures> featurize(const EvalSet& set, FeatureSource& source,
                                           const CalibrationOptions& options = {}) {
    std::vector<SentencePair> request;
    for (const auto& item : set.items) {
        for (const auto& ref : item.references) {
            SentencePair p(ref, item.candidate);
            request.push_back(self_pair(p, options.mode));
            request.push_back(std::move(p));
        }
    }
    const Acquisition a = acquire_features(request, source);
    if (!a.missing.empty()) throw_acquisition_failure(a);
    std::vector<ItemFeatures> out;
    out.reserve(set.items.size());
    for (const auto& item : set.items) {
        ItemFeatures f;
        for (const auto& ref : item.references) {
            SentencePair p(ref, item.candidate);
            f.pair.push_back(a.records.at(pair_digest(p)).features);
            f.self.push_back(a.records.at(pair_digest(self_pair(p, options.mode))).features);
        }
        out.push_back(std::move(f));
    }
    return out;
}

struct ItemScores {
    std::vector<double> raw;         // best raw over references
    std::vector<double> calibrated;  // best calibrated over references
};

inline ItemScores score_items(const TrainedAggregator& model, std::span<const ItemFeatures> features,
                              const CalibrationOptions& options = {}) {
    ItemScores out;
    for (const auto& f : features) {
        double best_raw = -std::numeric_limits<double>::infinity();
        double best_cal = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < f.pair.size(); ++k) {
            const NubiaScore s = calibrate(predict_raw(model, f.pair[k]), predict_raw(model, f.self[k]), options);
            best_raw = std::max(best_raw, s.raw);
            best_cal = std::max(best_cal, s.score);
        }
        out.raw.push_back(best_raw);
        out.calibrated.push_back(best_cal);
    }
    return out;
}

struct BaselineScores {
    std::vector<double> bleu;     // smoothed sentence BLEU-4 against all references
    std::vector<double> rouge_l;  // best ROUGE-L F1 over references
};

inline BaselineScores score_baselines(const EvalSet& set) {
    BaselineScores out;
    for (const auto& item : set.items) {
        const auto cand = tokenize(item.candidate);
        std::vector<TokenSequence> refs;
        for (const auto& r : item.references) refs.push_back(tokenize(r));
        out.bleu.push_back(sentence_bleu(cand, refs));
        double best = 0.0;
        for (const auto& r : refs) best = std::max(best, rouge_l(cand, r));
        out.rouge_l.push_back(best);
    }
    return out;
}

/// Correlates per-item metric scores with the set's human labels under its protocol.
inline EvalReport evaluate_scores(const EvalSet& set, std::span<const double> metric) {
    if (metric.size() != set.items.size()) throw ShapeError("evaluate: one metric score per item required");
    if (set.protocol == Protocol::darr) {
        MetricScores scores;
        for (std::size_t i = 0; i < set.items.size(); ++i) {
            const auto& it = set.items[i];
            scores[CandidateKey{it.lang_pair, it.segment_id, it.candidate}] = metric[i];
        }
        return evaluate_darr(set.ranked, scores);
    }
    std::vector<ScoredItem> scored;
    for (std::size_t i = 0; i < set.items.size(); ++i) {
        scored.push_back(ScoredItem{set.items[i].lang_pair, set.items[i].human_score, metric[i]});
    }
    return set.protocol == Protocol::pearson ? evaluate_da(scored) : evaluate_tau_b(scored);
}

inline std::vector<TrainingExample> training_examples(std::span<const JudgedPair> judged, FeatureSource& source) {
    std::vector<SentencePair> pairs;
    pairs.reserve(judged.size());
    for (const auto& j : judged) pairs.push_back(j.pair);
    const auto records = extract_features(pairs, source);
    std::vector<TrainingExample> out;
    out.reserve(judged.size());
    for (std::size_t i = 0; i < judged.size(); ++i) out.push_back({records[i].features, judged[i].human_score});
    return out;
}

// ---- ablation --------------------------------------------------------------

/// The seven feature subsets of the ablation table, in table order.
inline std::vector<FeatureMask> table5_masks() {
    using G = FeatureGroup;
    return {{G::LI}, {G::SI}, {G::SS}, {G::LI, G::SI}, {G::SS, G::LI}, {G::SS, G::SI}, {G::SS, G::LI, G::SI}};
}

struct AblationData {
    std::vector<TrainingExample> train;
    EvalSet test;
    std::vector<ItemFeatures> test_features;
};

struct AblationResult {
    FeatureMask mask;
    std::optional<EvalReport> raw;
    std::optional<EvalReport> calibrated;
    std::string error;  // set when training or evaluation failed for this mask
};

/// Trains one model per mask on the same data, seed and config, and
/// evaluates each on the test partition. A failing mask does not stop the others.
inline std::vector<AblationResult> run_ablation(const AblationData& data, std::span<const FeatureMask> masks,
                                                AggregatorKind kind, const TrainConfig& config,
                                                const CalibrationOptions& options = {}) {
    if (masks.empty()) throw std::invalid_argument("run_ablation: no masks");
    std::vector<AblationResult> results;
    for (const auto& mask : masks) {
        AblationResult r{mask, std::nullopt, std::nullopt, {}};
        try {
            const TrainedAggregator model = train(data.train, mask, kind, config);
            const ItemScores scores = score_items(model, data.test_features, options);
            r.raw = evaluate_scores(data.test, scores.raw);
            r.calibrated = evaluate_scores(data.test, scores.calibrated);
        } catch (const Error& e) {
            r.error = e.what();
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace metricforge
