#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "metricforge/baseline_metrics.hpp"
#include "support/golden_table.hpp"

namespace mf = metricforge;
using fixtures::Rational;
using fixtures::Tokens;
using namespace fixtures;

namespace {

Tokens random_tokens(std::mt19937_64& rng, std::size_t max_len, int vocab) {
    Tokens out(rng() % (max_len + 1));
    for (auto& t : out) t = std::string(1, static_cast<char>('a' + rng() % vocab));
    return out;
}

}  // namespace

TEST(Tokenize, Examples) {
    EXPECT_EQ(mf::tokenize("The cat sat."), (Tokens{"the", "cat", "sat"}));
    EXPECT_EQ(mf::tokenize(""), Tokens{});
    EXPECT_EQ(mf::tokenize("a  b\tc"), (Tokens{"a", "b", "c"}));
}

TEST(Tokenize, StripsOnlyOuterPunctuation) {
    EXPECT_EQ(mf::tokenize("\"Hello,\" she said -- don't!"), (Tokens{"hello", "she", "said", "don't"}));
    EXPECT_EQ(mf::tokenize("U.S. e-mail ... 3.5%"), (Tokens{"u.s", "e-mail", "3.5"}));
}

TEST(Tokenize, UnicodeWhitespaceAndCase) {
    // U+00A0 no-break space, U+2003 em space; "É" lowercases to "é".
    EXPECT_EQ(mf::tokenize("\xC3\x89t\xC3\xA9\xC2\xA0x\xE2\x80\x83y"), (Tokens{"\xC3\xA9t\xC3\xA9", "x", "y"}));
    // Decomposed e + combining acute normalizes to the composed form.
    EXPECT_EQ(mf::tokenize("e\xCC\x81"), Tokens{"\xC3\xA9"});
}

TEST(Lcs, Examples) {
    EXPECT_EQ(mf::lcs_length(Tokens{"a", "b", "c", "d", "e"}, Tokens{"a", "c", "e"}), 3u);
    const Tokens x{"p", "q", "r"};
    EXPECT_EQ(mf::lcs_length(x, x), 3u);
    EXPECT_EQ(mf::lcs_length(Tokens{"a", "b"}, Tokens{"c", "d"}), 0u);
}

TEST(Lcs, MatchesBruteForceAndIsSymmetric) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const auto a = random_tokens(rng, 9, 4);
        const auto b = random_tokens(rng, 9, 4);
        const auto l = mf::lcs_length(a, b);
        EXPECT_EQ(l, lcs_brute(a, b));
        EXPECT_EQ(l, mf::lcs_length(b, a));
        EXPECT_LE(l, std::min(a.size(), b.size()));
    }
}

TEST(RougeL, Examples) {
    const Tokens x{"the", "cat", "sat"};
    EXPECT_EQ(mf::rouge_l(x, x), 1.0);
    EXPECT_EQ(mf::rouge_l(x, Tokens{"the", "cat", "ate"}), to_double(Rational(2, 3)));
    EXPECT_EQ(mf::rouge_l(x, Tokens{"dog"}), 0.0);
    EXPECT_EQ(mf::rouge_l(Tokens{}, x), 0.0);
}

TEST(RougeL, EqualsRationalF1) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const auto c = random_tokens(rng, 8, 5);
        const auto r = random_tokens(rng, 8, 5);
        if (c.empty() || r.empty()) continue;
        const auto lcs = static_cast<long long>(lcs_brute(c, r));
        if (lcs == 0) {
            EXPECT_EQ(mf::rouge_l(c, r), 0.0);
            continue;
        }
        const Rational p(lcs, static_cast<long long>(c.size()));
        const Rational rec(lcs, static_cast<long long>(r.size()));
        const Rational f1 = 2 * p * rec / (p + rec);
        EXPECT_EQ(mf::rouge_l(c, r), to_double(f1));
    }
}

TEST(SentenceBleu, IdentityIsOne) {
    const Tokens x{"the", "cat", "sat", "on", "the", "mat"};
    const std::vector<Tokens> refs{x};
    EXPECT_EQ(mf::sentence_bleu(x, refs), 1.0);
    EXPECT_EQ(mf::sentence_bleu(x, refs, 4, mf::BleuSmoothing::off), 1.0);
    const Tokens one{"hello"};
    EXPECT_EQ(mf::sentence_bleu(one, std::vector<Tokens>{one}, 4, mf::BleuSmoothing::off), 1.0);
}

TEST(SentenceBleu, ClippedUnigramPrecision) {
    const Tokens cand(7, "the");
    const std::vector<Tokens> refs{{"the", "cat", "is", "on", "the", "mat"}};
    const auto stats = mf::bleu_stats(cand, refs);
    EXPECT_EQ(Rational(static_cast<long long>(stats.matches[0]), static_cast<long long>(stats.totals[0])),
              Rational(2, 7));
    EXPECT_EQ(mf::sentence_bleu(cand, refs, 4, mf::BleuSmoothing::off), 0.0);
    // Smoothed: (2/7 * 1/7 * 1/6 * 1/5)^(1/4), brevity penalty 1 (c = 7 > r = 6).
    EXPECT_NEAR(mf::sentence_bleu(cand, refs), std::pow(2.0 / 1470.0, 0.25), 1e-15);
}

TEST(SentenceBleu, DisjointIsZero) {
    const std::vector<Tokens> refs{{"a", "b", "c"}};
    EXPECT_EQ(mf::sentence_bleu(Tokens{"x", "y", "z"}, refs, 4, mf::BleuSmoothing::off), 0.0);
    EXPECT_EQ(mf::sentence_bleu(Tokens{"x", "y", "z"}, refs), 0.0);
}

TEST(SentenceBleu, EmptyCandidateAndPreconditions) {
    const std::vector<Tokens> refs{{"a"}};
    EXPECT_EQ(mf::sentence_bleu(Tokens{}, refs), 0.0);
    EXPECT_THROW(mf::sentence_bleu(Tokens{"a"}, std::vector<Tokens>{}), std::invalid_argument);
    EXPECT_THROW(mf::sentence_bleu(Tokens{"a"}, refs, 0), std::invalid_argument);
}

TEST(SentenceBleu, BrevityTieBreaksToShorterReference) {
    const Tokens cand{"a", "b", "c", "d"};
    const std::vector<Tokens> refs{{"a", "b", "c", "d", "e"}, {"a", "b", "c"}};
    const auto stats = mf::bleu_stats(cand, refs);
    EXPECT_EQ(stats.reference_length, 3u);
    EXPECT_EQ(mf::sentence_bleu(cand, refs), 1.0);
}

TEST(SentenceBleu, InvariantsOnRandomInputs) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        auto cand = random_tokens(rng, 10, 4);
        std::vector<Tokens> refs;
        const std::size_t nref = 1 + rng() % 3;
        for (std::size_t k = 0; k < nref; ++k) refs.push_back(random_tokens(rng, 10, 4));
        for (auto smoothing : {mf::BleuSmoothing::off, mf::BleuSmoothing::add_one}) {
            const double s = mf::sentence_bleu(cand, refs, 4, smoothing);
            EXPECT_GE(s, 0.0);
            EXPECT_LE(s, 1.0);
            auto shuffled = refs;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            EXPECT_EQ(s, mf::sentence_bleu(cand, shuffled, 4, smoothing));
        }
        if (!cand.empty()) {
            EXPECT_EQ(mf::sentence_bleu(cand, std::vector<Tokens>{cand}), 1.0);
            EXPECT_EQ(mf::rouge_l(cand, cand), 1.0);
        }
    }
}


TEST(GoldenTable, HandDerivedValuesAgreeWithRationalOracle) {
    for (const auto& g : golden_cases()) {
        SCOPED_TRACE(g.name);
        const auto c = mf::tokenize(g.candidate);
        const auto refs = tokenize_all(g.references);
        EXPECT_EQ(oracle_precisions(c, refs, 4), g.precisions);
        EXPECT_EQ(oracle_brevity_exponent(c, refs), g.brevity_exponent);
        const auto lcs = static_cast<long long>(lcs_brute(c, refs.front()));
        EXPECT_EQ(Rational(2 * lcs, static_cast<long long>(c.size() + refs.front().size())), g.rouge);
    }
}

TEST(GoldenTable, StatisticsMatchExactly) {
    for (const auto& g : golden_cases()) {
        SCOPED_TRACE(g.name);
        const auto c = mf::tokenize(g.candidate);
        const auto refs = tokenize_all(g.references);
        const auto stats = mf::bleu_stats(c, refs, 4);
        std::vector<Rational> smoothed;
        for (std::size_t i = 0; i < stats.totals.size() && stats.totals[i] > 0; ++i) {
            const auto m = static_cast<long long>(stats.matches[i]);
            const auto t = static_cast<long long>(stats.totals[i]);
            if (m == 0 && i == 0) {
                smoothed.clear();
                break;
            }
            smoothed.push_back(m == 0 ? Rational(1, t + 1) : Rational(m, t));
        }
        EXPECT_EQ(smoothed, g.precisions);
        const auto clen = static_cast<long long>(stats.candidate_length);
        const auto rlen = static_cast<long long>(stats.reference_length);
        EXPECT_EQ(clen >= rlen ? Rational(0) : Rational(1) - Rational(rlen, clen), g.brevity_exponent);
        EXPECT_EQ(mf::rouge_l(c, refs.front()), to_double(g.rouge));
    }
}

TEST(GoldenTable, ScoresMatchRationalClosedForm) {
    for (const auto& g : golden_cases()) {
        SCOPED_TRACE(g.name);
        const auto c = mf::tokenize(g.candidate);
        const auto refs = tokenize_all(g.references);
        const double expected = bleu_from_rationals(g.precisions, g.brevity_exponent);
        const double got = mf::sentence_bleu(c, refs);
        bool rational_valued = g.brevity_exponent == Rational(0);
        for (const auto& p : g.precisions) rational_valued = rational_valued && p == Rational(1);
        if (rational_valued || g.precisions.empty()) {
            EXPECT_EQ(got, expected);
        } else {
            // exp/pow of a rational are irrational; allow a few ulps of libm rounding.
            EXPECT_NEAR(got, expected, 1e-15 * expected);
        }
    }
}
