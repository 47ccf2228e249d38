#pragma once

// Correlation statistics for the three evaluation protocols: absolute Pearson
// over DA scores, the WMT Kendall variant over DA-derived relative rankings,
// and tau-b for averaged caption judgments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "metricforge/core.hpp"
#include "metricforge/error.hpp"

namespace metricforge {

/// Sample Pearson correlation, clamped to [-1, 1].
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DegenerateInputError("pearson: length mismatch");
    if (xs.size() < 2) throw DegenerateInputError("pearson: need at least 2 points");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    const auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (constant(xs) || constant(ys)) throw DegenerateInputError("pearson: constant input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// ---- DA -> relative ranking ------------------------------------------------

struct DaEntry {
    std::string system_id;
    std::string candidate;
    double human_score;  // 0..100
};

/// All candidates produced for one source segment.
struct DaSegmentGroup {
    std::string dataset;
    std::string lang_pair;
    std::int64_t segment_id = 0;
    std::string reference;
    std::vector<DaEntry> entries;
};

/// Emits one RankedPair for every within-group pair whose human score gap is
/// strictly greater than `threshold`. Entries with identical candidate text
/// are never paired: no reference-based metric can order them.
inline std::vector<RankedPair> da_to_relative_ranking(std::span<const DaSegmentGroup> groups,
                                                      double threshold = 25.0) {
    if (!(threshold > 0.0)) throw std::invalid_argument("da_to_relative_ranking: threshold must be > 0");
    std::vector<RankedPair> out;
    for (const auto& group : groups) {
        const auto& e = group.entries;
        for (std::size_t i = 0; i < e.size(); ++i) {
            for (std::size_t j = i + 1; j < e.size(); ++j) {
                if (e[i].candidate == e[j].candidate) continue;
                if (!(std::abs(e[i].human_score - e[j].human_score) > threshold)) continue;
                const bool i_better = e[i].human_score > e[j].human_score;
                out.push_back(RankedPair{group.reference, i_better ? e[i].candidate : e[j].candidate,
                                         i_better ? e[j].candidate : e[i].candidate, group.lang_pair,
                                         group.segment_id});
            }
        }
    }
    return out;
}

/// Identifies a scored candidate. Segment ids repeat across language pairs,
/// so the language pair is part of the key.
struct CandidateKey {
    std::string lang_pair;
    std::int64_t segment_id = 0;
    std::string candidate;

    friend auto operator<=>(const CandidateKey&, const CandidateKey&) = default;
};

using MetricScores = std::map<CandidateKey, double>;

struct ConcordanceCounts {
    std::size_t concordant = 0;
    std::size_t discordant = 0;
};

inline ConcordanceCounts count_concordance(std::span<const RankedPair> ranked, const MetricScores& scores) {
    ConcordanceCounts counts;
    const auto lookup = [&](const RankedPair& p, const std::string& candidate) {
        auto it = scores.find(CandidateKey{p.lang_pair, p.segment_id, candidate});
        if (it == scores.end()) {
            throw LookupError("kendall_wmt: no metric score for " + p.lang_pair + " segment " +
                              std::to_string(p.segment_id) + " candidate \"" + candidate + "\"");
        }
        return it->second;
    };
    for (const auto& p : ranked) {
        // Metric ties count as discordant.
        if (lookup(p, p.better_candidate) > lookup(p, p.worse_candidate)) {
            ++counts.concordant;
        } else {
            ++counts.discordant;
        }
    }
    return counts;
}

/// WMT relative-ranking Kendall: (C - D) / (C + D), metric ties discordant.
inline double kendall_wmt(std::span<const RankedPair> ranked, const MetricScores& scores) {
    if (ranked.empty()) throw DegenerateInputError("kendall_wmt: no ranked pairs");
    const auto c = count_concordance(ranked, scores);
    return (static_cast<double>(c.concordant) - static_cast<double>(c.discordant)) /
           static_cast<double>(c.concordant + c.discordant);
}

// ---- tau-b -----------------------------------------------------------------

namespace detail {

/// Sum of t(t-1)/2 over runs of equal adjacent values.
template <typename Equal>
std::int64_t tied_pairs(std::size_t n, Equal equal) {
    std::int64_t total = 0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= n; ++i) {
        if (i < n && equal(i - 1, i)) {
            ++run;
        } else {
            total += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
            run = 1;
        }
    }
    return total;
}

/// Stable merge sort of `v` that returns the number of inversions.
inline std::int64_t sort_counting_inversions(std::vector<double>& v) {
    std::vector<double> buffer(v.size());
    std::int64_t swaps = 0;
    for (std::size_t width = 1; width < v.size(); width *= 2) {
        for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, v.size());
            const std::size_t hi = std::min(lo + 2 * width, v.size());
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (v[j] < v[i]) {
                    swaps += static_cast<std::int64_t>(mid - i);
                    buffer[k++] = v[j++];
                } else {
                    buffer[k++] = v[i++];
                }
            }
            while (i < mid) buffer[k++] = v[i++];
            while (j < hi) buffer[k++] = v[j++];
        }
        v.swap(buffer);
    }
    return swaps;
}

}  // namespace detail

/// Kendall tau-b in O(n log n) (Knight's algorithm).
inline double kendall_tau_b(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DegenerateInputError("kendall_tau_b: length mismatch");
    if (xs.size() < 2) throw DegenerateInputError("kendall_tau_b: need at least 2 points");
    const std::size_t n = xs.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(xs[a], ys[a]) < std::tie(xs[b], ys[b]);
    });

    const std::int64_t total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
    const std::int64_t ties_x =
        detail::tied_pairs(n, [&](std::size_t i, std::size_t j) { return xs[order[i]] == xs[order[j]]; });
    const std::int64_t ties_xy = detail::tied_pairs(n, [&](std::size_t i, std::size_t j) {
        return xs[order[i]] == xs[order[j]] && ys[order[i]] == ys[order[j]];
    });

    std::vector<double> y_sorted(n);
    for (std::size_t i = 0; i < n; ++i) y_sorted[i] = ys[order[i]];
    const std::int64_t swaps = detail::sort_counting_inversions(y_sorted);
    const std::int64_t ties_y =
        detail::tied_pairs(n, [&](std::size_t i, std::size_t j) { return y_sorted[i] == y_sorted[j]; });

    const std::int64_t not_tied_x = total - ties_x;
    const std::int64_t not_tied_y = total - ties_y;
    if (not_tied_x == 0 || not_tied_y == 0) throw DegenerateInputError("kendall_tau_b: all pairs tied");
    const std::int64_t c_minus_d = total - ties_x - ties_y + ties_xy - 2 * swaps;
    return std::clamp(static_cast<double>(c_minus_d) /
                          std::sqrt(static_cast<double>(not_tied_x) * static_cast<double>(not_tied_y)),
                      -1.0, 1.0);
}

// ---- reports ---------------------------------------------------------------

/// One scored test item for the DA and tau-b protocols.
struct ScoredItem {
    std::string lang_pair;
    double human_score;
    double metric_score;
};

namespace detail {

template <typename Statistic>
EvalReport grouped_report(std::span<const ScoredItem> items, StatisticKind kind, Statistic statistic) {
    EvalReport report;
    report.kind = kind;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
    std::vector<double> all_h, all_m;
    for (const auto& item : items) {
        auto& g = groups[item.lang_pair];
        g.first.push_back(item.human_score);
        g.second.push_back(item.metric_score);
        all_h.push_back(item.human_score);
        all_m.push_back(item.metric_score);
    }
    for (const auto& [lang, g] : groups) {
        try {
            report.per_lang[lang] = ReportCell{statistic(g.first, g.second), g.first.size()};
        } catch (const DegenerateInputError& e) {
            throw DegenerateInputError("group " + lang + ": " + e.what());
        }
    }
    try {
        report.aggregate = ReportCell{statistic(all_h, all_m), all_h.size()};
    } catch (const DegenerateInputError& e) {
        throw DegenerateInputError(std::string("aggregate: ") + e.what());
    }
    return report;
}

}  // namespace detail

/// Per-language |Pearson| plus |Pearson| over the pooled union of all items.
inline EvalReport evaluate_da(std::span<const ScoredItem> items) {
    return detail::grouped_report(items, StatisticKind::abs_pearson,
                                  [](std::span<const double> h, std::span<const double> m) {
                                      return std::abs(pearson(h, m));
                                  });
}

/// Tau-b per group and pooled.
inline EvalReport evaluate_tau_b(std::span<const ScoredItem> items) {
    return detail::grouped_report(items, StatisticKind::kendall_tau_b,
                                  [](std::span<const double> h, std::span<const double> m) {
                                      return kendall_tau_b(h, m);
                                  });
}

/// kendall_wmt per language pair plus over all ranked pairs pooled.
inline EvalReport evaluate_darr(std::span<const RankedPair> ranked, const MetricScores& scores) {
    EvalReport report;
    report.kind = StatisticKind::kendall_wmt;
    std::map<std::string, std::vector<RankedPair>> groups;
    for (const auto& p : ranked) groups[p.lang_pair].push_back(p);
    for (const auto& [lang, pairs] : groups) {
        report.per_lang[lang] = ReportCell{kendall_wmt(pairs, scores), pairs.size()};
    }
    try {
        report.aggregate = ReportCell{kendall_wmt(ranked, scores), ranked.size()};
    } catch (const DegenerateInputError& e) {
        throw DegenerateInputError(std::string("aggregate: ") + e.what());
    }
    return report;
}

}  // namespace metricforge
