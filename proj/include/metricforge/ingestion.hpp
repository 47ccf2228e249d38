#pragma once

// Human-judgment dataset parsing and train/test split construction.
//
// Canonical DA TSV: UTF-8, tab-separated, exact header
//   dataset lang_pair segment_id system_id reference candidate human_score n_annotators
// dataset is one of wmt15..wmt19, lang_pair is xx-en, human_score in [0,100].
//
// Flickr8K expert judgments: whitespace-separated lines
//   image_id caption_id score1 score2 score3     (scores are integers 1..4)
// Captions file: caption_id TAB text, where caption_id is <image_id>#<k>.
// An image's references are its captions <image_id>#0 .. #4.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "metricforge/core.hpp"
#include "metricforge/correlation.hpp"
#include "metricforge/error.hpp"
#include "metricforge/text.hpp"

namespace metricforge {

inline constexpr std::array<std::string_view, 5> kWmtDatasets{"wmt15", "wmt16", "wmt17", "wmt18", "wmt19"};
inline constexpr std::string_view kCanonicalHeader =
    "dataset\tlang_pair\tsegment_id\tsystem_id\treference\tcandidate\thuman_score\tn_annotators";

struct CanonicalDaRow {
    std::string dataset;
    std::string lang_pair;
    std::int64_t segment_id = 0;
    std::string system_id;
    std::string reference;
    std::string candidate;
    double human_score = 0.0;  // 0..100
    std::int64_t n_annotators = 1;

    friend bool operator==(const CanonicalDaRow&, const CanonicalDaRow&) = default;
};

inline int dataset_rank(std::string_view dataset) {
    for (std::size_t i = 0; i < kWmtDatasets.size(); ++i) {
        if (kWmtDatasets[i] == dataset) return static_cast<int>(i);
    }
    return -1;
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline bool valid_lang_pair(std::string_view lp) {
    const auto dash = lp.find('-');
    if (dash == std::string_view::npos || dash < 2 || lp.size() - dash - 1 < 2) return false;
    return std::all_of(lp.begin(), lp.end(), [](char c) { return c == '-' || (c >= 'a' && c <= 'z'); }) &&
           lp.find('-', dash + 1) == std::string_view::npos;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

}  // namespace detail

inline std::vector<CanonicalDaRow> parse_canonical_tsv(std::istream& in, const std::string& source = "<tsv>") {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(source, 1, 0, "missing header");
    detail::strip_cr(line);
    if (line != kCanonicalHeader) throw ParseError(source, 1, 0, "header does not match the canonical DA header");

    std::vector<CanonicalDaRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        if (!text::is_valid_utf8(line)) throw ParseError(source, line_no, 0, "invalid UTF-8");
        const auto cols = detail::split(line, '\t');
        if (cols.size() != 8) {
            throw ParseError(source, line_no, 0, "expected 8 columns, found " + std::to_string(cols.size()));
        }
        auto fail = [&](std::size_t column, const std::string& message) {
            throw ParseError(source, line_no, column, message);
        };
        CanonicalDaRow row;
        row.dataset = std::string(cols[0]);
        if (dataset_rank(row.dataset) < 0) fail(1, "unknown dataset '" + row.dataset + "'");
        row.lang_pair = std::string(cols[1]);
        if (!detail::valid_lang_pair(row.lang_pair)) fail(2, "malformed lang_pair '" + row.lang_pair + "'");
        if (!row.lang_pair.ends_with("-en")) fail(2, "target language of '" + row.lang_pair + "' is not English");
        if (!detail::parse_number(cols[2], row.segment_id)) fail(3, "segment_id is not an integer");
        row.system_id = std::string(cols[3]);
        if (row.system_id.empty()) fail(4, "empty system_id");
        row.reference = std::string(cols[4]);
        if (text::trim(row.reference).empty()) fail(5, "empty reference");
        row.candidate = std::string(cols[5]);
        if (text::trim(row.candidate).empty()) fail(6, "empty candidate");
        if (!detail::parse_number(cols[6], row.human_score) || !std::isfinite(row.human_score)) {
            fail(7, "human_score is not a number");
        }
        if (row.human_score < 0.0 || row.human_score > 100.0) fail(7, "human_score outside [0,100]");
        if (!detail::parse_number(cols[7], row.n_annotators) || row.n_annotators < 1) {
            fail(8, "n_annotators must be a positive integer");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<CanonicalDaRow> parse_canonical_tsv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return parse_canonical_tsv(in, path);
}

inline void serialize_canonical_tsv(std::span<const CanonicalDaRow> rows, std::ostream& out) {
    out << kCanonicalHeader << '\n';
    for (const auto& r : rows) {
        for (const std::string* field : {&r.dataset, &r.lang_pair, &r.system_id, &r.reference, &r.candidate}) {
            if (field->find_first_of("\t\n\r") != std::string::npos) {
                throw DataError("canonical TSV field contains a tab or newline");
            }
        }
        out << r.dataset << '\t' << r.lang_pair << '\t' << r.segment_id << '\t' << r.system_id << '\t'
            << r.reference << '\t' << r.candidate << '\t' << detail::format_double(r.human_score) << '\t'
            << r.n_annotators << '\n';
    }
}

// ---- splits ----------------------------------------------------------------

inline JudgedPair to_judged(const CanonicalDaRow& row) {
    return JudgedPair{SentencePair(row.reference, row.candidate), row.human_score / 100.0, row.lang_pair,
                      row.segment_id, row.system_id};
}

struct DatasetSplit {
    std::vector<JudgedPair> train;
    std::vector<JudgedPair> test;
    std::vector<std::string> train_datasets;
};

/// Test = rows of `test_dataset`; train = rows of every earlier dataset among
/// wmt15, wmt16, wmt17 (wmt18 is never used for training). Scores rescaled to [0,1].
inline DatasetSplit build_split(std::span<const CanonicalDaRow> rows, std::string_view test_dataset) {
    const int test_rank = dataset_rank(test_dataset);
    if (test_rank < 0) throw SplitError("unknown test dataset '" + std::string(test_dataset) + "'");
    const int last_train_rank = dataset_rank("wmt17");

    DatasetSplit split;
    for (int r = 0; r < test_rank && r <= last_train_rank; ++r) split.train_datasets.emplace_back(kWmtDatasets[r]);
    for (const auto& row : rows) {
        const int rank = dataset_rank(row.dataset);
        if (rank == test_rank) {
            split.test.push_back(to_judged(row));
        } else if (rank < test_rank && rank <= last_train_rank) {
            split.train.push_back(to_judged(row));
        }
    }
    if (split.train.empty()) throw SplitError("empty training partition for test dataset " + std::string(test_dataset));
    if (split.test.empty()) throw SplitError("no rows for test dataset " + std::string(test_dataset));
    return split;
}

/// Groups rows by (dataset, lang_pair, segment_id), in order of first appearance.
inline std::vector<DaSegmentGroup> rows_to_da_groups(std::span<const CanonicalDaRow> rows) {
    std::vector<DaSegmentGroup> groups;
    std::map<std::tuple<std::string, std::string, std::int64_t>, std::size_t> index;
    std::set<std::tuple<std::string, std::string, std::int64_t, std::string>> seen;
    for (const auto& row : rows) {
        const auto key = std::make_tuple(row.dataset, row.lang_pair, row.segment_id);
        if (!seen.insert(std::make_tuple(row.dataset, row.lang_pair, row.segment_id, row.system_id)).second) {
            throw IngestionError("duplicate row for " + row.dataset + " " + row.lang_pair + " segment " +
                                 std::to_string(row.segment_id) + " system " + row.system_id);
        }
        auto [it, inserted] = index.try_emplace(key, groups.size());
        if (inserted) groups.push_back(DaSegmentGroup{row.dataset, row.lang_pair, row.segment_id, row.reference, {}});
        auto& group = groups[it->second];
        if (group.reference != row.reference) {
            throw IngestionError("segment " + std::to_string(row.segment_id) + " (" + row.lang_pair +
                                 ") has inconsistent references");
        }
        group.entries.push_back(DaEntry{row.system_id, row.candidate, row.human_score});
    }
    return groups;
}

// ---- Flickr8K --------------------------------------------------------------

struct CaptionJudgment {
    std::string image_id;
    std::string caption_id;
    std::string candidate_caption;
    std::vector<std::string> references;  // exactly 5
    std::array<int, 3> expert_scores{};   // each 1..4

    /// Unweighted mean of the three expert scores.
    double human_target() const {
        return static_cast<double>(expert_scores[0] + expert_scores[1] + expert_scores[2]) / 3.0;
    }
};

inline std::vector<CaptionJudgment> parse_flickr_judgments(std::istream& expert, std::istream& captions,
                                                           const std::string& expert_source = "<expert>",
                                                           const std::string& captions_source = "<captions>") {
    std::map<std::string, std::string> caption_text;
    std::map<std::string, std::map<int, std::string>> by_image;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(captions, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(captions_source, line_no, 0, "expected caption_id TAB text");
        std::string id = line.substr(0, tab);
        std::string body = line.substr(tab + 1);
        const auto hash = id.rfind('#');
        int k = 0;
        if (hash == std::string::npos || !detail::parse_number(std::string_view(id).substr(hash + 1), k)) {
            throw ParseError(captions_source, line_no, 1, "caption_id must be <image_id>#<k>");
        }
        if (!caption_text.emplace(id, body).second) {
            throw ParseError(captions_source, line_no, 1, "duplicate caption_id " + id);
        }
        by_image[id.substr(0, hash)][k] = std::move(body);
    }

    std::vector<CaptionJudgment> out;
    line_no = 0;
    while (std::getline(expert, line)) {
        ++line_no;
        detail::strip_cr(line);
        const auto fields = detail::split_whitespace(line);
        if (fields.empty()) continue;
        if (fields.size() != 5) {
            throw ParseError(expert_source, line_no, 0,
                             "expected image_id caption_id and 3 scores, found " + std::to_string(fields.size()) +
                                 " fields");
        }
        CaptionJudgment j;
        j.image_id = std::string(fields[0]);
        j.caption_id = std::string(fields[1]);
        for (std::size_t s = 0; s < 3; ++s) {
            int score = 0;
            if (!detail::parse_number(fields[2 + s], score) || score < 1 || score > 4) {
                throw ParseError(expert_source, line_no, 3 + s, "expert score must be an integer in [1,4]");
            }
            j.expert_scores[s] = score;
        }
        auto cap = caption_text.find(j.caption_id);
        if (cap == caption_text.end()) {
            throw JoinError(expert_source + ":" + std::to_string(line_no) + ": caption " + j.caption_id +
                            " not found in captions file");
        }
        j.candidate_caption = cap->second;
        auto refs = by_image.find(j.image_id);
        if (refs == by_image.end() || refs->second.size() != 5) {
            throw JoinError(expert_source + ":" + std::to_string(line_no) + ": image " + j.image_id +
                            " does not have exactly 5 reference captions");
        }
        for (const auto& [k, textual] : refs->second) j.references.push_back(textual);
        out.push_back(std::move(j));
    }
    return out;
}

inline std::vector<CaptionJudgment> parse_flickr_files(const std::string& expert_path, const std::string& captions_path) {
    std::ifstream expert(expert_path, std::ios::binary);
    if (!expert) throw DataError("cannot open " + expert_path);
    std::ifstream captions(captions_path, std::ios::binary);
    if (!captions) throw DataError("cannot open " + captions_path);
    return parse_flickr_judgments(expert, captions, expert_path, captions_path);
}

}  // namespace metricforge
