#pragma once

// Sentence-level BLEU and ROUGE-L over the canonical tokenizer.
//
// Tokenizer: NFC-normalize, lowercase (root locale), split on code points with
// the Unicode White_Space property, then strip leading and trailing code points
// of general category P* (all punctuation) from every token. Tokens left empty
// by stripping are dropped.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "metricforge/text.hpp"

namespace metricforge {

using TokenSequence = std::vector<std::string>;

inline constexpr std::string_view kTokenizerVersion = "mf-tok-1";

namespace detail {

inline std::string strip_punctuation(std::string_view token) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(token.data());
    const auto length = static_cast<std::int32_t>(token.size());
    std::int32_t begin = 0;
    while (begin < length) {
        std::int32_t next = begin;
        UChar32 c;
        U8_NEXT(bytes, next, length, c);
        if (c < 0 || !u_ispunct(c)) break;
        begin = next;
    }
    std::int32_t end = length;
    while (end > begin) {
        std::int32_t prev = end;
        UChar32 c;
        U8_PREV(bytes, 0, prev, c);
        if (c < 0 || !u_ispunct(c)) break;
        end = prev;
    }
    return std::string(token.substr(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin)));
}

}  // namespace detail

inline TokenSequence tokenize(std::string_view input) {
    const std::string lowered = text::lowercase(text::nfc(input));
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(lowered.data());
    const auto length = static_cast<std::int32_t>(lowered.size());

    TokenSequence tokens;
    std::int32_t i = 0;
    std::int32_t token_start = -1;
    auto flush = [&](std::int32_t end) {
        if (token_start < 0) return;
        std::string token = detail::strip_punctuation(
            std::string_view(lowered).substr(static_cast<std::size_t>(token_start),
                                             static_cast<std::size_t>(end - token_start)));
        if (!token.empty()) tokens.push_back(std::move(token));
        token_start = -1;
    };
    while (i < length) {
        const std::int32_t start = i;
        UChar32 c;
        U8_NEXT(bytes, i, length, c);
        if (c >= 0 && u_isUWhiteSpace(c)) {
            flush(start);
        } else if (token_start < 0) {
            token_start = start;
        }
    }
    flush(length);
    return tokens;
}

/// Length of the longest common subsequence.
inline std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.size() < b.size()) std::swap(a, b);
    // Two rows over the shorter sequence.
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> curr(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
        }
        std::swap(prev, curr);
    }
    return prev[b.size()];
}

/// ROUGE-L F1. Computed as 2*LCS / (|candidate| + |reference|), which equals
/// 2PR/(P+R) with P = LCS/|candidate| and R = LCS/|reference|.
inline double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
    if (candidate.empty() || reference.empty()) return 0.0;
    const std::size_t lcs = lcs_length(candidate, reference);
    return static_cast<double>(2 * lcs) / static_cast<double>(candidate.size() + reference.size());
}

// ---- BLEU ------------------------------------------------------------------

/// Integer sufficient statistics of sentence BLEU.
struct BleuStats {
    std::vector<std::size_t> matches;  // clipped n-gram matches, index n-1
    std::vector<std::size_t> totals;   // candidate n-gram count, index n-1
    std::size_t candidate_length = 0;
    std::size_t reference_length = 0;  // closest reference length, ties to the shorter
};

namespace detail {

struct SpanLess {
    bool operator()(std::span<const std::string> x, std::span<const std::string> y) const {
        return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
    }
};

using NgramCounts = std::map<std::span<const std::string>, std::size_t, SpanLess>;

inline NgramCounts count_ngrams(std::span<const std::string> tokens, std::size_t n) {
    NgramCounts counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[tokens.subspan(i, n)];
    return counts;
}

}  // namespace detail

inline BleuStats bleu_stats(std::span<const std::string> candidate, std::span<const TokenSequence> references,
                            std::size_t max_n = 4) {
    if (max_n < 1) throw std::invalid_argument("sentence_bleu: max_n must be >= 1");
    if (references.empty()) throw std::invalid_argument("sentence_bleu: at least one reference required");

    BleuStats stats;
    stats.candidate_length = candidate.size();
    stats.reference_length = references.front().size();
    for (const auto& ref : references) {
        const auto diff = [&](std::size_t len) {
            return len > candidate.size() ? len - candidate.size() : candidate.size() - len;
        };
        const std::size_t d = diff(ref.size());
        const std::size_t best = diff(stats.reference_length);
        if (d < best || (d == best && ref.size() < stats.reference_length)) stats.reference_length = ref.size();
    }

    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto cand_counts = detail::count_ngrams(candidate, n);
        detail::NgramCounts max_ref;
        for (const auto& ref : references) {
            for (const auto& [gram, count] : detail::count_ngrams(ref, n)) {
                auto& slot = max_ref[gram];
                slot = std::max(slot, count);
            }
        }
        std::size_t matched = 0;
        std::size_t total = 0;
        for (const auto& [gram, count] : cand_counts) {
            total += count;
            if (auto it = max_ref.find(gram); it != max_ref.end()) matched += std::min(count, it->second);
        }
        stats.matches.push_back(matched);
        stats.totals.push_back(total);
    }
    return stats;
}

enum class BleuSmoothing { off, add_one };

/// BLEU score from sufficient statistics.
///
/// Orders for which the candidate has no n-grams (candidate shorter than n)
/// are left out of the geometric mean, so the effective order is
/// min(max_n, |candidate|). With add_one smoothing, an order n >= 2 whose
/// clipped match count is 0 uses (0 + 1) / (total + 1); unigram precision is
/// never smoothed.
inline double bleu_from_stats(const BleuStats& stats, BleuSmoothing smoothing) {
    if (stats.candidate_length == 0) return 0.0;
    double log_sum = 0.0;
    std::size_t orders = 0;
    for (std::size_t i = 0; i < stats.totals.size(); ++i) {
        if (stats.totals[i] == 0) break;
        double num = static_cast<double>(stats.matches[i]);
        double den = static_cast<double>(stats.totals[i]);
        if (stats.matches[i] == 0) {
            if (smoothing == BleuSmoothing::off || i == 0) return 0.0;
            num += 1.0;
            den += 1.0;
        }
        log_sum += std::log(num / den);
        ++orders;
    }
    const double c = static_cast<double>(stats.candidate_length);
    const double r = static_cast<double>(stats.reference_length);
    const double brevity = stats.candidate_length < stats.reference_length ? std::exp(1.0 - r / c) : 1.0;
    return brevity * std::exp(log_sum / static_cast<double>(orders));
}

inline double sentence_bleu(std::span<const std::string> candidate, std::span<const TokenSequence> references,
                            std::size_t max_n = 4, BleuSmoothing smoothing = BleuSmoothing::add_one) {
    if (max_n < 1) throw std::invalid_argument("sentence_bleu: max_n must be >= 1");
    if (references.empty()) throw std::invalid_argument("sentence_bleu: at least one reference required");
    if (candidate.empty()) return 0.0;
    return bleu_from_stats(bleu_stats(candidate, references, max_n), smoothing);
}

}  // namespace metricforge
