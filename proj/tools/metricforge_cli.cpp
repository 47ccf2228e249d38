// metricforge: extract features, train aggregators, evaluate and ablate.
//
// Exit status: 0 ok, 1 usage, 2 data, 3 extraction, 4 numeric.

#include <CLI11.hpp>

#include "cli_support.hpp"

namespace {

using namespace mfcli;

struct Options {
    SourceOptions source;
    std::string manifest;
    std::string json;

    std::string pairs;

    std::vector<std::string> data;
    std::string test_dataset = "wmt17";
    std::string mask = "SS,LI,SI,LEN";
    std::string kind = "nn";
    std::uint64_t seed = 0;
    std::string out;

    std::string model;
    std::vector<std::string> test;
    std::string protocol = "pearson";
    bool baselines = false;
    std::string dump_scatter;

    std::vector<std::string> masks{"preset:table5"};
};

ojson source_json(const SourceOptions& s) {
    return {{"cache", s.cache},
            {"endpoint", s.endpoint},
            {"offline", s.offline},
            {"allow_mixed", s.allow_mixed},
            {"self_score", s.self_score}};
}

void write_json(const std::string& path, const ojson& doc) {
    if (!path.empty()) write_file(path, doc.dump(2) + "\n");
}

mf::TrainConfig train_config(const Options& o) {
    mf::TrainConfig c;
    c.seed = o.seed;
    return c;
}

// ---- extract -------------------------------------------------------------

int cmd_extract(const Options& o, Manifest& manifest) {
    manifest.config({{"command", "extract"}, {"pairs", o.pairs}, {"source", source_json(o.source)}});
    manifest.input(o.pairs);
    const auto calibration = calibration_options(o.source);
    const auto pairs = load_pairs(o.pairs);

    // Self pairs are fetched too, so that later offline runs can calibrate.
    std::vector<mf::SentencePair> request(pairs);
    for (const auto& p : pairs) request.push_back(mf::self_pair(p, calibration.mode));

    Features features(o.source);
    const auto got = mf::acquire_features(request, features.source());
    manifest.extractor_version(features.extractor_version());
    manifest.extra() = {{"pairs", pairs.size()}, {"fetched", got.fetched}, {"cached", got.cached},
                        {"unfetched", got.missing.size()}};
    std::cout << got.fetched << " fetched, " << got.cached << " cached\n";
    if (!got.missing.empty()) mf::throw_acquisition_failure(got);
    return 0;
}

// ---- train ---------------------------------------------------------------

int cmd_train(const Options& o, Manifest& manifest) {
    const auto mask = mf::FeatureMask::parse(o.mask);
    const auto kind = mf::parse_kind(o.kind);
    const auto config = train_config(o);
    manifest.config_digest(mf::config_digest(kind, mask, config));
    manifest.seed(o.seed);
    for (const auto& p : o.data) manifest.input(p);

    const auto rows = load_rows(o.data);
    const auto split = mf::build_split(rows, o.test_dataset);
    Features features(o.source);
    const auto examples = mf::training_examples(split.train, features.source());
    const auto outcome = mf::fit_aggregator(examples, mask, kind, config);
    const std::string text = mf::serialize_model(outcome.model);
    write_file(o.out, text);

    manifest.model_digest(mf::text::sha256_hex(text));
    manifest.extractor_version(features.extractor_version());
    manifest.extra() = {{"train_n", examples.size()},
                        {"train_datasets", split.train_datasets},
                        {"test_dataset", o.test_dataset},
                        {"test_n", split.test.size()},
                        {"train_mse", outcome.train_mse},
                        {"features_fetched", features.fetched()}};

    std::string datasets;
    for (const auto& d : split.train_datasets) datasets += (datasets.empty() ? "" : ",") + d;
    std::cout << "trained " << mf::kind_name(kind) << " [" << mask.to_string() << "] on " << examples.size()
              << " pairs (" << datasets << "), test " << o.test_dataset << " has " << split.test.size() << " pairs\n";
    std::cout << "train MSE " << number(outcome.train_mse) << "\n";
    if (const auto* lin = std::get_if<mf::LinearCoefficients>(&outcome.model.params)) {
        const auto raw = destandardize(*lin, outcome.model.stats);
        const auto names = input_names(mask, config.log_perplexity);
        std::cout << "coefficients (raw input units)\n";
        for (std::size_t i = 0; i < names.size(); ++i) std::cout << "  " << names[i] << " " << number(raw.w[i]) << "\n";
        std::cout << "  intercept " << number(raw.b) << "\n";
    }
    std::cout << "wrote " << o.out << "\n";
    return 0;
}

// ---- eval ----------------------------------------------------------------

mf::EvalSet load_eval_set(const Options& o, mf::Protocol protocol) {
    if (protocol == mf::Protocol::tau_b) {
        if (o.test.size() != 2) throw mf::UsageError("tau_b needs --test EXPERT_FILE --test CAPTIONS_FILE");
        return mf::make_caption_eval_set(mf::parse_flickr_files(o.test[0], o.test[1]));
    }
    return mf::make_da_eval_set(load_rows(o.test), protocol);
}

std::string protocol_title(const mf::EvalSet& set) {
    const auto kind = set.protocol == mf::Protocol::pearson ? mf::StatisticKind::abs_pearson
                      : set.protocol == mf::Protocol::darr  ? mf::StatisticKind::kendall_wmt
                                                            : mf::StatisticKind::kendall_tau_b;
    std::string t = std::string(mf::statistic_name(kind)) + " (" + std::string(mf::protocol_name(set.protocol)) +
                    "), " + std::to_string(set.items.size()) + " segments";
    if (set.protocol == mf::Protocol::darr) t += ", " + std::to_string(set.ranked.size()) + " ranked pairs";
    return t;
}

int cmd_eval(const Options& o, Manifest& manifest) {
    const auto protocol = mf::parse_protocol(o.protocol);
    const auto calibration = calibration_options(o.source);
    manifest.config({{"command", "eval"},
                     {"protocol", o.protocol},
                     {"baselines", o.baselines},
                     {"source", source_json(o.source)}});
    manifest.input(o.model);
    for (const auto& p : o.test) manifest.input(p);

    const auto model = mf::load_model(o.model);
    manifest.model_digest(file_digest(o.model));
    const auto set = load_eval_set(o, protocol);
    Features features(o.source);
    const auto item_features = mf::featurize(set, features.source(), calibration);
    manifest.extractor_version(features.extractor_version());
    const auto scores = mf::score_items(model, item_features, calibration);

    std::vector<ReportRow> rows{{"NUBIA raw", mf::evaluate_scores(set, scores.raw)},
                                {"NUBIA calibrated", mf::evaluate_scores(set, scores.calibrated)}};
    std::optional<mf::BaselineScores> baselines;
    if (o.baselines || !o.dump_scatter.empty()) baselines = mf::score_baselines(set);
    if (o.baselines) {
        rows.push_back({"BLEU", mf::evaluate_scores(set, baselines->bleu)});
        rows.push_back({"ROUGE-L", mf::evaluate_scores(set, baselines->rouge_l)});
    }
    std::cout << render_table(protocol_title(set), rows);

    if (!o.dump_scatter.empty()) {
        std::string csv = "human_score,nubia,bleu,rouge_l\n";
        for (std::size_t i = 0; i < set.items.size(); ++i) {
            csv += number(set.items[i].human_score) + "," + number(scores.calibrated[i]) + "," +
                   number(baselines->bleu[i]) + "," + number(baselines->rouge_l[i]) + "\n";
        }
        write_file(o.dump_scatter, csv);
    }

    ojson doc{{"command", "eval"}, {"protocol", mf::protocol_name(protocol)}, {"segments", set.items.size()}};
    static const char* keys[] = {"nubia_raw", "nubia_calibrated", "bleu", "rouge_l"};
    for (std::size_t i = 0; i < rows.size(); ++i) doc["rows"][keys[i]] = report_json(rows[i].report);
    write_json(o.json, doc);
    manifest.extra() = {{"segments", set.items.size()}, {"aggregate", rows[1].report.aggregate.statistic},
                        {"features_fetched", features.fetched()}};
    return 0;
}

// ---- ablate --------------------------------------------------------------

std::vector<mf::FeatureMask> expand_masks(const std::vector<std::string>& specs) {
    std::vector<mf::FeatureMask> masks;
    for (const auto& spec : specs) {
        std::size_t pos = 0;
        while (pos <= spec.size()) {
            std::size_t end = spec.find(';', pos);
            if (end == std::string::npos) end = spec.size();
            const std::string item = spec.substr(pos, end - pos);
            if (item == "preset:table5") {
                for (const auto& m : mf::table5_masks()) masks.push_back(m);
            } else if (item.starts_with("preset:")) {
                throw mf::UsageError("unknown mask preset '" + item + "'");
            } else {
                masks.push_back(mf::FeatureMask::parse(item));
            }
            pos = end + 1;
        }
    }
    if (masks.empty()) throw mf::UsageError("no masks given");
    return masks;
}

int cmd_ablate(const Options& o, Manifest& manifest) {
    const auto masks = expand_masks(o.masks);
    const auto kind = mf::parse_kind(o.kind);
    const auto protocol = mf::parse_protocol(o.protocol);
    if (protocol == mf::Protocol::tau_b) throw mf::UsageError("ablate evaluates on the DA test partition; use pearson or darr");
    const auto calibration = calibration_options(o.source);
    const auto config = train_config(o);
    ojson mask_names = ojson::array();
    for (const auto& m : masks) mask_names.push_back(m.to_string());
    manifest.config({{"command", "ablate"},
                     {"masks", mask_names},
                     {"kind", mf::kind_name(kind)},
                     {"protocol", o.protocol},
                     {"test_dataset", o.test_dataset},
                     {"train_config", mf::to_json(config)},
                     {"source", source_json(o.source)}});
    manifest.seed(o.seed);
    for (const auto& p : o.data) manifest.input(p);

    const auto rows = load_rows(o.data);
    const auto split = mf::build_split(rows, o.test_dataset);
    std::vector<mf::CanonicalDaRow> test_rows;
    for (const auto& r : rows) {
        if (r.dataset == o.test_dataset) test_rows.push_back(r);
    }
    Features features(o.source);
    mf::AblationData data;
    data.train = mf::training_examples(split.train, features.source());
    data.test = mf::make_da_eval_set(test_rows, protocol);
    data.test_features = mf::featurize(data.test, features.source(), calibration);
    manifest.extractor_version(features.extractor_version());

    const auto results = mf::run_ablation(data, masks, kind, config, calibration);
    std::vector<ReportRow> raw, calibrated;
    ojson doc{{"command", "ablate"}, {"protocol", mf::protocol_name(protocol)}, {"masks", ojson::array()}};
    bool failed = false;
    for (const auto& r : results) {
        ojson entry{{"mask", r.mask.to_string()}};
        if (r.raw) {
            raw.push_back({r.mask.to_string(), *r.raw});
            calibrated.push_back({r.mask.to_string(), *r.calibrated});
            entry["nubia_raw"] = report_json(*r.raw);
            entry["nubia_calibrated"] = report_json(*r.calibrated);
        } else {
            failed = true;
            entry["error"] = r.error;
            std::cerr << "mask " << r.mask.to_string() << " failed: " << r.error << "\n";
        }
        doc["masks"].push_back(std::move(entry));
    }
    const std::string title = protocol_title(data.test);
    std::cout << render_table("raw scores, " + title, raw) << "\n"
              << render_table("calibrated scores, " + title, calibrated);
    write_json(o.json, doc);
    manifest.extra() = {{"train_n", data.train.size()}, {"test_n", data.test.items.size()},
                        {"masks", results.size()}, {"features_fetched", features.fetched()}};
    return failed ? static_cast<int>(mf::ErrorKind::numeric) : 0;
}

// ---- wiring --------------------------------------------------------------

void add_source_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--cache", o.source.cache, "Feature cache (JSONL); in-memory when omitted");
    cmd->add_option("--endpoint", o.source.endpoint, "Feature service base URL, or 'stub:' for the built-in stub")
        ->envname("METRICFORGE_ENDPOINT");
    cmd->add_flag("--offline", o.source.offline, "Serve features from the cache only");
    cmd->add_flag("--allow-mixed", o.source.allow_mixed, "Accept cache records from other extractor versions");
    cmd->add_option("--self-score", o.source.self_score, "Calibration self pair: reference or candidate")
        ->check(CLI::IsMember({"reference", "candidate"}));
}

void add_run_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--manifest", o.manifest, "Write the run manifest here instead of stderr");
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Train, calibrate and benchmark learned MT evaluation metrics."};
    app.name("metricforge");
    app.set_config("--config", "", "TOML/INI file whose keys mirror the flags");
    app.require_subcommand(1);

    auto* extract = app.add_subcommand("extract", "Fetch features for pairs into the cache");
    extract->add_option("--pairs", o.pairs, "Canonical DA TSV or 'reference<TAB>candidate' lines")->required();
    add_source_options(extract, o);
    add_run_options(extract, o);

    auto* train = app.add_subcommand("train", "Fit an aggregator on the training partition");
    train->add_option("--data", o.data, "Canonical DA TSV files")->required()->expected(1, -1);
    train->add_option("--test-dataset", o.test_dataset, "Held-out dataset; earlier ones are trained on");
    train->add_option("--mask", o.mask, "Feature groups, e.g. SS,LI,SI or SS,LI,SI,LEN");
    train->add_option("--kind", o.kind, "nn or lreg")->check(CLI::IsMember({"nn", "lreg", "mlp", "linreg"}));
    train->add_option("--seed", o.seed, "Initialization and shuffling seed");
    train->add_option("--out", o.out, "Model file to write")->required();
    add_source_options(train, o);
    add_run_options(train, o);

    auto* eval = app.add_subcommand("eval", "Correlate a model (and baselines) with human judgments");
    eval->add_option("--model", o.model, "Model file")->required();
    eval->add_option("--test", o.test, "Test TSV(s); for tau_b the expert file then the captions file")
        ->required()
        ->expected(1, -1);
    eval->add_option("--protocol", o.protocol, "pearson, darr or tau_b")
        ->check(CLI::IsMember({"pearson", "darr", "tau_b"}));
    eval->add_flag("--baselines", o.baselines, "Add sentence BLEU and ROUGE-L rows");
    eval->add_option("--dump-scatter", o.dump_scatter, "Write human_score,nubia,bleu,rouge_l per segment");
    eval->add_option("--json", o.json, "Also write the report as JSON");
    add_source_options(eval, o);
    add_run_options(eval, o);

    auto* ablate = app.add_subcommand("ablate", "Train and evaluate one model per feature mask");
    ablate->add_option("--data", o.data, "Canonical DA TSV files")->required()->expected(1, -1);
    ablate->add_option("--test-dataset", o.test_dataset, "Held-out dataset");
    ablate->add_option("--masks", o.masks, "preset:table5 or masks such as SS,LI (';' separates several)")
        ->expected(1, -1);
    ablate->add_option("--kind", o.kind, "nn or lreg")->check(CLI::IsMember({"nn", "lreg", "mlp", "linreg"}));
    ablate->add_option("--seed", o.seed, "Seed shared by every mask");
    ablate->add_option("--protocol", o.protocol, "pearson or darr")->check(CLI::IsMember({"pearson", "darr"}));
    ablate->add_option("--json", o.json, "Also write the report as JSON");
    add_source_options(ablate, o);
    add_run_options(ablate, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : static_cast<int>(mf::ErrorKind::usage);
    }

    CLI::App* chosen = app.get_subcommands().front();
    Manifest manifest(chosen->get_name());
    int rc = 0;
    try {
        if (chosen == extract) rc = cmd_extract(o, manifest);
        else if (chosen == train) rc = cmd_train(o, manifest);
        else if (chosen == eval) rc = cmd_eval(o, manifest);
        else rc = cmd_ablate(o, manifest);
    } catch (const mf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        rc = e.exit_code();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        rc = static_cast<int>(mf::ErrorKind::usage);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        rc = static_cast<int>(mf::ErrorKind::data);
    }
    std::cout.flush();
    manifest.emit(rc, o.manifest);
    return rc;
}
