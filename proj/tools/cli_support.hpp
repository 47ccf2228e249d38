#pragma once

// Plumbing shared by the metricforge subcommands: feature sources, input
// loading, run manifests and report rendering.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metricforge/http_extractor.hpp"
#include "metricforge/metricforge.hpp"

namespace mfcli {

namespace mf = metricforge;
using ojson = nlohmann::ordered_json;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mf::DataError("cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw mf::DataError("cannot write " + path);
    out << content;
    if (!out.flush()) throw mf::DataError("write failed for " + path);
}

inline std::string file_digest(const std::string& path) { return mf::text::sha256_hex(read_file(path)); }

/// Shortest round-trip decimal form.
inline std::string number(double v) { return mf::detail::format_double(v); }

// ---- feature source ------------------------------------------------------

struct SourceOptions {
    std::string cache;     // empty: in-memory only
    std::string endpoint;  // "stub:" serves the deterministic stub in process
    bool offline = false;
    bool allow_mixed = false;
    std::string self_score = "reference";
};

/// Owns the store and extractor behind a FeatureSource.
class Features {
public:
    explicit Features(const SourceOptions& o) {
        const mf::FeatureStoreOptions store_options{.allow_mixed = o.allow_mixed};
        store_ = o.cache.empty() ? std::make_unique<mf::FeatureStore>(store_options)
                                 : std::make_unique<mf::FeatureStore>(std::filesystem::path(o.cache), store_options);
        if (!o.offline && !o.endpoint.empty()) {
            if (o.endpoint == "stub:") {
                extractor_ = std::make_unique<mf::StubExtractor>();
            } else {
                mf::ExtractorEndpoint e;
                e.base_url = o.endpoint;
                extractor_ = std::make_unique<mf::HttpExtractor>(e);
            }
        }
        source_ = std::make_unique<mf::FeatureSource>(mf::FeatureSource{extractor_.get(), *store_});
        initial_size_ = store_->size();
    }

    mf::FeatureSource& source() { return *source_; }
    mf::FeatureStore& store() { return *store_; }
    std::size_t fetched() const { return store_->size() - initial_size_; }
    std::string extractor_version() const { return store_->extractor_version().value_or(""); }

private:
    std::unique_ptr<mf::FeatureStore> store_;
    std::unique_ptr<mf::FeatureExtractor> extractor_;
    std::unique_ptr<mf::FeatureSource> source_;
    std::size_t initial_size_ = 0;
};

inline mf::CalibrationOptions calibration_options(const SourceOptions& o) {
    mf::CalibrationOptions c;
    if (o.self_score == "candidate") {
        c.mode = mf::SelfScoreMode::candidate;
    } else if (o.self_score != "reference") {
        throw mf::UsageError("--self-score must be 'reference' or 'candidate'");
    }
    return c;
}

// ---- inputs --------------------------------------------------------------

inline std::vector<mf::CanonicalDaRow> load_rows(const std::vector<std::string>& paths) {
    std::vector<mf::CanonicalDaRow> rows;
    for (const auto& p : paths) {
        auto part = mf::parse_canonical_tsv_file(p);
        rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return rows;
}

/// A pairs file is either a canonical DA TSV (recognized by its header) or
/// headerless lines of "reference TAB candidate".
inline std::vector<mf::SentencePair> load_pairs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mf::DataError("cannot open " + path);
    std::string first;
    std::getline(in, first);
    if (!first.empty() && first.back() == '\r') first.pop_back();
    std::vector<mf::SentencePair> pairs;
    if (first == mf::kCanonicalHeader) {
        for (const auto& r : mf::parse_canonical_tsv_file(path)) pairs.emplace_back(r.reference, r.candidate);
        return pairs;
    }
    in.clear();
    in.seekg(0);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!mf::text::is_valid_utf8(line)) throw mf::ParseError(path, line_no, 0, "invalid UTF-8");
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
            throw mf::ParseError(path, line_no, 0, "expected 'reference<TAB>candidate'");
        }
        try {
            pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
        } catch (const mf::DataError& e) {
            throw mf::ParseError(path, line_no, 0, e.what());
        }
    }
    return pairs;
}

// ---- manifest ------------------------------------------------------------

/// UTC ISO-8601 run time, pinned by SOURCE_DATE_EPOCH when it is set.
inline std::string run_timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* pinned = std::getenv("SOURCE_DATE_EPOCH"); pinned && *pinned) {
        t = static_cast<std::time_t>(std::strtoll(pinned, nullptr, 10));
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Manifest {
public:
    explicit Manifest(std::string command) {
        doc_["command"] = std::move(command);
        doc_["config_digest"] = "";
        doc_["inputs"] = ojson::object();
        doc_["model_digest"] = nullptr;
        doc_["extractor_version"] = nullptr;
        doc_["seed"] = nullptr;
        doc_["timestamp"] = run_timestamp();
    }

    void config(const ojson& options) {
        doc_["config"] = options;
        doc_["config_digest"] = mf::text::sha256_hex(options.dump());
    }
    void config_digest(const std::string& digest) { doc_["config_digest"] = digest; }
    void input(const std::string& path) { doc_["inputs"][path] = file_digest(path); }
    void model_digest(const std::string& d) { doc_["model_digest"] = d; }
    void extractor_version(const std::string& v) {
        if (!v.empty()) doc_["extractor_version"] = v;
    }
    void seed(std::uint64_t s) { doc_["seed"] = s; }
    ojson& extra() { return doc_["result"]; }

    /// Written once per run, whatever the outcome.
    void emit(int exit_code, const std::string& path) {
        doc_["exit_code"] = exit_code;
        const std::string text = doc_.dump();
        if (!path.empty()) {
            try {
                write_file(path, text + "\n");
                return;
            } catch (const mf::Error& e) {
                std::cerr << "warning: " << e.what() << "; manifest follows on stderr\n";
            }
        }
        std::cerr << "manifest: " << text << "\n";
    }

private:
    ojson doc_;
};

// ---- reports -------------------------------------------------------------

struct ReportRow {
    std::string label;
    mf::EvalReport report;
};

inline ojson report_json(const mf::EvalReport& r) {
    ojson per_lang = ojson::object();
    for (const auto& [lang, cell] : r.per_lang) per_lang[lang] = {{"statistic", cell.statistic}, {"n", cell.n}};
    return {{"statistic", mf::statistic_name(r.kind)},
            {"per_lang", per_lang},
            {"aggregate", {{"statistic", r.aggregate.statistic}, {"n", r.aggregate.n}}}};
}

/// Rows are metrics, columns are language pairs followed by the pooled AVG.
inline std::string render_table(const std::string& title, const std::vector<ReportRow>& rows) {
    std::set<std::string> langs;
    std::size_t label_width = 6;
    for (const auto& r : rows) {
        for (const auto& [lang, _] : r.report.per_lang) langs.insert(lang);
        label_width = std::max(label_width, r.label.size());
    }
    std::string out = title + "\n";
    char cell[64];
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(w, s.size()), ' ');
        return s;
    };
    out += pad("", label_width);
    for (const auto& l : langs) {
        std::snprintf(cell, sizeof cell, " %8s", l.c_str());
        out += cell;
    }
    out += "      AVG\n";
    for (const auto& r : rows) {
        out += pad(r.label, label_width);
        for (const auto& l : langs) {
            auto it = r.report.per_lang.find(l);
            if (it == r.report.per_lang.end()) {
                out += "        -";
            } else {
                std::snprintf(cell, sizeof cell, " %8.3f", it->second.statistic);
                out += cell;
            }
        }
        std::snprintf(cell, sizeof cell, " %8.3f\n", r.report.aggregate.statistic);
        out += cell;
    }
    if (!rows.empty()) {
        out += pad("n", label_width);
        for (const auto& l : langs) {
            std::snprintf(cell, sizeof cell, " %8zu", rows.front().report.per_lang.at(l).n);
            out += cell;
        }
        std::snprintf(cell, sizeof cell, " %8zu\n", rows.front().report.aggregate.n);
        out += cell;
    }
    return out;
}

inline const char* group_input_names(mf::FeatureGroup g, std::size_t i) {
    static const char* ss[] = {"sem_sim"};
    static const char* li[] = {"mnli_contradiction", "mnli_neutral", "mnli_entailment"};
    static const char* si[] = {"ppl_ref", "ppl_cand"};
    static const char* len[] = {"len_ref", "len_cand"};
    switch (g) {
        case mf::FeatureGroup::SS: return ss[i];
        case mf::FeatureGroup::LI: return li[i];
        case mf::FeatureGroup::SI: return si[i];
        case mf::FeatureGroup::LEN: return len[i];
    }
    return "?";
}

inline std::vector<std::string> input_names(const mf::FeatureMask& mask, bool log_perplexity) {
    std::vector<std::string> names;
    for (auto g : mf::kGroupOrder) {
        if (!mask.has(g)) continue;
        for (std::size_t i = 0; i < mf::group_width(g); ++i) {
            std::string n = group_input_names(g, i);
            if (g == mf::FeatureGroup::SI && log_perplexity) n = "ln_" + n;
            names.push_back(std::move(n));
        }
    }
    return names;
}

/// Linear coefficients mapped back from standardized to raw input units.
inline mf::LinearCoefficients destandardize(const mf::LinearCoefficients& c, const mf::StandardizationStats& s) {
    mf::LinearCoefficients out;
    out.b = c.b;
    for (std::size_t i = 0; i < c.w.size(); ++i) {
        out.w.push_back(c.w[i] / s.stddev[i]);
        out.b -= c.w[i] * s.mean[i] / s.stddev[i];
    }
    return out;
}

}  // namespace mfcli
