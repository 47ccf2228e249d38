#pragma once

// Versioned JSON model file:
//   {format_version, kind, mask, log_perplexity, stats: {mean, stddev},
//    params, config_digest}
// Numbers are written as shortest round-trip decimals, so load(save(m)) == m.

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "metricforge/aggregator.hpp"
#include "metricforge/error.hpp"

namespace metricforge {

inline constexpr int kModelFormatVersion = 1;

inline std::string serialize_model(const TrainedAggregator& model) {
    nlohmann::ordered_json params;
    if (const auto* lin = std::get_if<LinearCoefficients>(&model.params)) {
        params = {{"w", lin->w}, {"b", lin->b}};
    } else {
        const auto& mlp = std::get<MlpParams>(model.params);
        auto hidden = nlohmann::ordered_json::array();
        for (const auto& layer : mlp.hidden) {
            hidden.push_back({{"inputs", layer.inputs},
                              {"outputs", layer.outputs},
                              {"weights", layer.weights},
                              {"bias", layer.bias}});
        }
        params = {{"hidden", hidden},
                  {"w_out", mlp.w_out},
                  {"b_out", mlp.b_out},
                  {"output_activation", mlp.output == OutputActivation::tanh ? "tanh" : "linear"}};
    }
    nlohmann::ordered_json j{{"format_version", kModelFormatVersion},
                             {"kind", kind_name(model.kind)},
                             {"mask", model.mask.to_string()},
                             {"log_perplexity", model.log_perplexity},
                             {"stats", {{"mean", model.stats.mean}, {"stddev", model.stats.stddev}}},
                             {"params", params},
                             {"config_digest", model.config_digest}};
    return j.dump(2) + "\n";
}

inline TrainedAggregator deserialize_model(const std::string& document, const std::string& source = "model") {
    TrainedAggregator model;
    try {
        const auto j = nlohmann::json::parse(document);
        if (j.at("format_version").get<int>() != kModelFormatVersion) {
            throw DataError(source + ": unsupported model format_version");
        }
        model.kind = parse_kind(j.at("kind").get<std::string>());
        model.mask = FeatureMask::parse(j.at("mask").get<std::string>());
        model.log_perplexity = j.at("log_perplexity").get<bool>();
        model.stats.mean = j.at("stats").at("mean").get<std::vector<double>>();
        model.stats.stddev = j.at("stats").at("stddev").get<std::vector<double>>();
        model.config_digest = j.at("config_digest").get<std::string>();
        const auto& p = j.at("params");
        const std::size_t dim = model.mask.dimension();
        if (model.stats.mean.size() != dim || model.stats.stddev.size() != dim) {
            throw DataError(source + ": standardization dimension does not match mask");
        }
        for (double s : model.stats.stddev) {
            if (!(s >= kStddevFloor)) throw DataError(source + ": stddev below floor");
        }
        if (model.kind == AggregatorKind::linreg) {
            LinearCoefficients lin{p.at("w").get<std::vector<double>>(), p.at("b").get<double>()};
            if (lin.w.size() != dim) throw DataError(source + ": coefficient dimension does not match mask");
            model.params = std::move(lin);
        } else {
            MlpParams mlp;
            for (const auto& layer : p.at("hidden")) {
                DenseLayer d{layer.at("inputs").get<std::size_t>(), layer.at("outputs").get<std::size_t>(),
                             layer.at("weights").get<std::vector<double>>(),
                             layer.at("bias").get<std::vector<double>>()};
                const std::size_t expected_in = mlp.hidden.empty() ? dim : mlp.hidden.back().outputs;
                if (d.inputs != expected_in || d.weights.size() != d.inputs * d.outputs ||
                    d.bias.size() != d.outputs) {
                    throw DataError(source + ": inconsistent hidden layer shape");
                }
                mlp.hidden.push_back(std::move(d));
            }
            if (mlp.hidden.empty()) throw DataError(source + ": network has no hidden layer");
            mlp.w_out = p.at("w_out").get<std::vector<double>>();
            mlp.b_out = p.at("b_out").get<double>();
            const auto act = p.at("output_activation").get<std::string>();
            if (act != "linear" && act != "tanh") throw DataError(source + ": unknown output activation");
            mlp.output = act == "tanh" ? OutputActivation::tanh : OutputActivation::linear;
            if (mlp.w_out.size() != mlp.hidden.back().outputs) throw DataError(source + ": output layer shape");
            for (double v : mlp.flatten()) {
                if (!std::isfinite(v)) throw DataError(source + ": non-finite parameter");
            }
            model.params = std::move(mlp);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(source + ": malformed model file: " + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(source + ": " + e.what());
    }
    return model;
}

inline void save_model(const TrainedAggregator& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model file " + path);
    out << serialize_model(model);
    if (!out) throw DataError("failed writing model file " + path);
}

inline TrainedAggregator load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return deserialize_model(buffer.str(), path);
}

}  // namespace metricforge
