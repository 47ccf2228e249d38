#pragma once

// Exact rational oracles for sentence BLEU and ROUGE-L, and the ten-case
// golden table derived by hand from them.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include <boost/rational.hpp>

#include "metricforge/baseline_metrics.hpp"

namespace fixtures {

namespace mf = metricforge;
using Rational = boost::rational<long long>;
using Tokens = mf::TokenSequence;

// Note: compare rationals against Rational(k), never a bare int. With Boost
// 1.74 under C++20 the mixed operator== rewrites into itself and never returns.

inline double to_double(const Rational& r) { return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator()); }

// Brute-force LCS over all subsequences of the shorter side (tiny inputs only).
inline std::size_t lcs_brute(const Tokens& a, const Tokens& b) {
    const Tokens& s = a.size() <= b.size() ? a : b;
    const Tokens& l = a.size() <= b.size() ? b : a;
    std::size_t best = 0;
    for (unsigned mask = 0; mask < (1u << s.size()); ++mask) {
        Tokens sub;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (mask & (1u << i)) sub.push_back(s[i]);
        }
        std::size_t j = 0;
        for (const auto& t : l) {
            if (j < sub.size() && t == sub[j]) ++j;
        }
        if (j == sub.size()) best = std::max(best, sub.size());
    }
    return best;
}

// Hand-derived fixture table. Each BLEU value is written as
// exp(brevity_exponent) * radicand^(1 / orders) where every precision and the
// brevity exponent 1 - r/c are exact rationals.

struct GoldenCase {
    const char* name;
    const char* candidate;
    std::vector<const char*> references;
    std::vector<Rational> precisions;  // smoothed, effective orders only; empty when BLEU is 0
    Rational brevity_exponent;         // 0 when c >= r
    Rational rouge;                    // ROUGE-L F1 against the first reference
};

inline const std::vector<GoldenCase>& golden_cases() {
    static const std::vector<GoldenCase> cases{
        {"identity", "the cat sat on the mat", {"the cat sat on the mat"},
         {Rational(1), Rational(1), Rational(1), Rational(1)}, Rational(0), Rational(1)},
        {"clipped unigrams", "the the the the the the the", {"the cat is on the mat"},
         {Rational(2, 7), Rational(1, 7), Rational(1, 6), Rational(1, 5)}, Rational(0), Rational(4, 13)},
        {"disjoint", "x y z", {"a b c"}, {}, Rational(0), Rational(0)},
        {"single token identity", "hello", {"hello"}, {Rational(1)}, Rational(0), Rational(1)},
        {"short candidate", "the cat", {"the cat sat on the mat"},
         {Rational(1), Rational(1)}, Rational(-2), Rational(1, 2)},
        {"closest length tie", "a b c d", {"a b c d e", "a b c"},
         {Rational(1), Rational(1), Rational(1), Rational(1)}, Rational(0), Rational(8, 9)},
        {"one substitution", "the cat sat on a mat", {"the cat sat on the mat"},
         {Rational(5, 6), Rational(3, 5), Rational(2, 4), Rational(1, 3)}, Rational(0), Rational(5, 6)},
        {"scrambled", "mat the on sat cat the", {"the cat sat on the mat"},
         {Rational(1), Rational(1, 6), Rational(1, 5), Rational(1, 4)}, Rational(0), Rational(1, 2)},
        {"short with smoothing", "a b a", {"a b c d e f"},
         {Rational(2, 3), Rational(1, 2), Rational(1, 2)}, Rational(-1), Rational(4, 9)},
        {"repeated tail", "it is a test it is", {"it is a test"},
         {Rational(2, 3), Rational(3, 5), Rational(1, 2), Rational(1, 3)}, Rational(0), Rational(4, 5)},
    };
    return cases;
}

inline std::vector<Tokens> tokenize_all(const std::vector<const char*>& texts) {
    std::vector<Tokens> out;
    for (const char* t : texts) out.push_back(mf::tokenize(t));
    return out;
}

// Independent rational route from raw token lists: multiset n-gram counts via
// linear scans, clipping against the per-reference maximum.
inline std::vector<Rational> oracle_precisions(const Tokens& c, const std::vector<Tokens>& refs, std::size_t max_n) {
    auto count = [](const Tokens& seq, const Tokens& gram) {
        long long k = 0;
        for (std::size_t i = 0; i + gram.size() <= seq.size(); ++i) {
            if (std::equal(gram.begin(), gram.end(), seq.begin() + static_cast<std::ptrdiff_t>(i))) ++k;
        }
        return k;
    };
    std::vector<Rational> out;
    for (std::size_t n = 1; n <= max_n && n <= c.size(); ++n) {
        std::vector<Tokens> seen;
        long long matched = 0;
        const long long total = static_cast<long long>(c.size() - n + 1);
        for (std::size_t i = 0; i + n <= c.size(); ++i) {
            Tokens gram(c.begin() + static_cast<std::ptrdiff_t>(i), c.begin() + static_cast<std::ptrdiff_t>(i + n));
            if (std::find(seen.begin(), seen.end(), gram) != seen.end()) continue;
            seen.push_back(gram);
            long long ref_max = 0;
            for (const auto& r : refs) ref_max = std::max(ref_max, count(r, gram));
            matched += std::min(count(c, gram), ref_max);
        }
        if (matched == 0) {
            if (n == 1) return {};
            out.emplace_back(1, total + 1);
        } else {
            out.emplace_back(matched, total);
        }
    }
    return out;
}

inline Rational oracle_brevity_exponent(const Tokens& c, const std::vector<Tokens>& refs) {
    long long best = -1;
    const auto clen = static_cast<long long>(c.size());
    for (const auto& r : refs) {
        const auto rlen = static_cast<long long>(r.size());
        if (best < 0 || std::llabs(rlen - clen) < std::llabs(best - clen) ||
            (std::llabs(rlen - clen) == std::llabs(best - clen) && rlen < best)) {
            best = rlen;
        }
    }
    return clen >= best ? Rational(0) : Rational(1) - Rational(best, clen);
}

inline double bleu_from_rationals(const std::vector<Rational>& precisions, const Rational& brevity_exponent) {
    if (precisions.empty()) return 0.0;
    Rational radicand(1);
    for (const auto& p : precisions) radicand *= p;
    return std::exp(to_double(brevity_exponent)) *
           std::pow(to_double(radicand), 1.0 / static_cast<double>(precisions.size()));
}


}  // namespace fixtures
