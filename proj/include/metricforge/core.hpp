#pragma once

// Domain types shared across the toolkit: sentence pairs, the 8-feature
// vector, feature-group masks, judged/ranked pairs and evaluation reports.

#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "metricforge/error.hpp"
#include "metricforge/text.hpp"

namespace metricforge {

/// A reference text and a candidate text. Both must be nonempty after trimming.
class SentencePair {
public:
    SentencePair(std::string reference, std::string candidate)
        : reference_(std::move(reference)), candidate_(std::move(candidate)) {
        if (text::trim(reference_).empty()) throw DataError("sentence pair: empty reference");
        if (text::trim(candidate_).empty()) throw DataError("sentence pair: empty candidate");
    }

    const std::string& reference() const noexcept { return reference_; }
    const std::string& candidate() const noexcept { return candidate_; }

    friend bool operator==(const SentencePair&, const SentencePair&) = default;

private:
    std::string reference_;
    std::string candidate_;
};

/// MNLI class order: contradiction, neutral, entailment.
enum class MnliClass : std::size_t { contradiction = 0, neutral = 1, entailment = 2 };

struct FeatureVector {
    double sem_sim = 0.0;             // STS scale, 0..5
    double mnli_contradiction = 0.0;  // class probabilities, sum to 1
    double mnli_neutral = 0.0;
    double mnli_entailment = 0.0;
    double ppl_ref = 1.0;
    double ppl_cand = 1.0;
    std::uint64_t len_ref = 0;
    std::uint64_t len_cand = 0;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline constexpr double kMnliSimplexTolerance = 1e-6;

/// Every invariant `fv` breaks. Empty means valid.
inline std::vector<std::string> validate_features(const FeatureVector& fv) {
    std::vector<std::string> violations;
    const std::array<double, 6> reals{fv.sem_sim,      fv.mnli_contradiction, fv.mnli_neutral,
                                      fv.mnli_entailment, fv.ppl_ref,        fv.ppl_cand};
    for (double v : reals) {
        if (!std::isfinite(v)) {
            violations.emplace_back("non-finite value");
            return violations;
        }
    }
    if (fv.sem_sim < 0.0 || fv.sem_sim > 5.0) violations.emplace_back("sem_sim range");
    const double probs[] = {fv.mnli_contradiction, fv.mnli_neutral, fv.mnli_entailment};
    for (double p : probs) {
        if (p < 0.0 || p > 1.0) {
            violations.emplace_back("mnli range");
            break;
        }
    }
    if (std::abs(probs[0] + probs[1] + probs[2] - 1.0) > kMnliSimplexTolerance) {
        violations.emplace_back("mnli simplex");
    }
    if (fv.ppl_ref < 1.0) violations.emplace_back("ppl_ref range");
    if (fv.ppl_cand < 1.0) violations.emplace_back("ppl_cand range");
    return violations;
}

// ---- feature masks ---------------------------------------------------------

/// Feature groups in their fixed projection order.
enum class FeatureGroup : unsigned { SS = 0, LI = 1, SI = 2, LEN = 3 };

inline constexpr std::array<FeatureGroup, 4> kGroupOrder{FeatureGroup::SS, FeatureGroup::LI,
                                                        FeatureGroup::SI, FeatureGroup::LEN};

constexpr std::size_t group_width(FeatureGroup g) {
    switch (g) {
        case FeatureGroup::SS: return 1;
        case FeatureGroup::LI: return 3;
        case FeatureGroup::SI: return 2;
        case FeatureGroup::LEN: return 2;
    }
    return 0;
}

constexpr std::string_view group_name(FeatureGroup g) {
    switch (g) {
        case FeatureGroup::SS: return "SS";
        case FeatureGroup::LI: return "LI";
        case FeatureGroup::SI: return "SI";
        case FeatureGroup::LEN: return "LEN";
    }
    return "?";
}

/// Nonempty subset of {SS, LI, SI, LEN}.
class FeatureMask {
public:
    FeatureMask(std::initializer_list<FeatureGroup> groups) {
        for (FeatureGroup g : groups) bits_ |= bit(g);
        if (bits_ == 0) throw std::invalid_argument("feature mask must be nonempty");
    }

    static FeatureMask from_groups(std::span<const FeatureGroup> groups) {
        FeatureMask mask;
        for (FeatureGroup g : groups) mask.bits_ |= bit(g);
        if (mask.bits_ == 0) throw std::invalid_argument("feature mask must be nonempty");
        return mask;
    }

    static FeatureMask all() { return {FeatureGroup::SS, FeatureGroup::LI, FeatureGroup::SI, FeatureGroup::LEN}; }
    static FeatureMask neural() { return {FeatureGroup::SS, FeatureGroup::LI, FeatureGroup::SI}; }

    /// Parses a comma-separated group list such as "SS,LI,SI" (case-insensitive, order-free).
    static FeatureMask parse(std::string_view spec) {
        FeatureMask mask;
        std::size_t pos = 0;
        while (pos <= spec.size()) {
            std::size_t comma = spec.find(',', pos);
            if (comma == std::string_view::npos) comma = spec.size();
            std::string item;
            for (char c : spec.substr(pos, comma - pos)) {
                if (c != ' ' && c != '\t') item.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
            }
            bool matched = false;
            for (FeatureGroup g : kGroupOrder) {
                if (item == group_name(g)) {
                    mask.bits_ |= bit(g);
                    matched = true;
                }
            }
            if (!matched) throw std::invalid_argument("unknown feature group '" + item + "'");
            pos = comma + 1;
        }
        if (mask.bits_ == 0) throw std::invalid_argument("feature mask must be nonempty");
        return mask;
    }

    bool has(FeatureGroup g) const noexcept { return (bits_ & bit(g)) != 0; }

    std::size_t dimension() const noexcept {
        std::size_t d = 0;
        for (FeatureGroup g : kGroupOrder) {
            if (has(g)) d += group_width(g);
        }
        return d;
    }

    /// Canonical text form, groups in projection order: "SS,LI,SI".
    std::string to_string() const {
        std::string out;
        for (FeatureGroup g : kGroupOrder) {
            if (!has(g)) continue;
            if (!out.empty()) out += ',';
            out += group_name(g);
        }
        return out;
    }

    unsigned bits() const noexcept { return bits_; }

    friend bool operator==(const FeatureMask&, const FeatureMask&) = default;
    friend auto operator<=>(const FeatureMask&, const FeatureMask&) = default;

private:
    FeatureMask() = default;
    static constexpr unsigned bit(FeatureGroup g) { return 1u << static_cast<unsigned>(g); }

    unsigned bits_ = 0;
};

/// Concatenates the masked groups in SS, LI, SI, LEN order.
inline std::vector<double> project(const FeatureVector& fv, const FeatureMask& mask) {
    std::vector<double> out;
    out.reserve(mask.dimension());
    if (mask.has(FeatureGroup::SS)) out.push_back(fv.sem_sim);
    if (mask.has(FeatureGroup::LI)) {
        out.push_back(fv.mnli_contradiction);
        out.push_back(fv.mnli_neutral);
        out.push_back(fv.mnli_entailment);
    }
    if (mask.has(FeatureGroup::SI)) {
        out.push_back(fv.ppl_ref);
        out.push_back(fv.ppl_cand);
    }
    if (mask.has(FeatureGroup::LEN)) {
        out.push_back(static_cast<double>(fv.len_ref));
        out.push_back(static_cast<double>(fv.len_cand));
    }
    return out;
}

// ---- judged data -----------------------------------------------------------

/// A human-scored pair. `human_score` is the DA average rescaled to [0,1].
struct JudgedPair {
    SentencePair pair;
    double human_score;
    std::string lang_pair;
    std::int64_t segment_id;
    std::string system_id;
};

/// Two candidates for one reference, ordered by human judgment.
struct RankedPair {
    std::string reference;
    std::string better_candidate;
    std::string worse_candidate;
    std::string lang_pair;
    std::int64_t segment_id;

    friend bool operator==(const RankedPair&, const RankedPair&) = default;
};

enum class StatisticKind { abs_pearson, kendall_wmt, kendall_tau_b };

constexpr std::string_view statistic_name(StatisticKind k) {
    switch (k) {
        case StatisticKind::abs_pearson: return "abs_pearson";
        case StatisticKind::kendall_wmt: return "kendall_wmt";
        case StatisticKind::kendall_tau_b: return "kendall_tau_b";
    }
    return "?";
}

struct ReportCell {
    double statistic = 0.0;
    std::size_t n = 0;

    friend bool operator==(const ReportCell&, const ReportCell&) = default;
};

/// Correlation per language pair plus an aggregate over the pooled union.
struct EvalReport {
    StatisticKind kind = StatisticKind::abs_pearson;
    std::map<std::string, ReportCell> per_lang;
    ReportCell aggregate;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

}  // namespace metricforge
