#pragma once

// Regressors mapping feature vectors to predicted human quality: ordinary
// least squares and a tanh feed-forward network trained with ADAM.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

// <resolv.h> (pulled in by httplib) defines _res, which Eigen uses as a
// parameter name; hide it while Eigen is parsed.
#pragma push_macro("_res")
#undef _res
#include <Eigen/Dense>
#pragma pop_macro("_res")
#include <nlohmann/json.hpp>

#include "metricforge/core.hpp"
#include "metricforge/error.hpp"
#include "metricforge/text.hpp"

namespace metricforge {

enum class AggregatorKind { linreg, mlp };

constexpr std::string_view kind_name(AggregatorKind k) { return k == AggregatorKind::mlp ? "mlp" : "linreg"; }

inline AggregatorKind parse_kind(std::string_view s) {
    if (s == "mlp" || s == "nn") return AggregatorKind::mlp;
    if (s == "linreg" || s == "lreg") return AggregatorKind::linreg;
    throw std::invalid_argument("unknown aggregator kind '" + std::string(s) + "'");
}

enum class OutputActivation { linear, tanh };

struct TrainConfig {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    std::size_t hidden_width = 10;
    std::size_t hidden_layers = 1;
    OutputActivation output_activation = OutputActivation::linear;
    bool log_perplexity = true;  // feed ln(perplexity) instead of raw perplexity

    void validate() const {
        if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate must be > 0");
        if (adam_beta1 < 0.0 || adam_beta1 >= 1.0) throw std::invalid_argument("train config: beta1 outside [0,1)");
        if (adam_beta2 < 0.0 || adam_beta2 >= 1.0) throw std::invalid_argument("train config: beta2 outside [0,1)");
        if (!(adam_epsilon > 0.0)) throw std::invalid_argument("train config: epsilon must be > 0");
        if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
        if (hidden_width < 1 || hidden_layers < 1) throw std::invalid_argument("train config: empty hidden layer");
    }
};

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_epsilon", c.adam_epsilon},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"hidden_width", c.hidden_width},
            {"hidden_layers", c.hidden_layers},
            {"output_activation", c.output_activation == OutputActivation::tanh ? "tanh" : "linear"},
            {"log_perplexity", c.log_perplexity},
            {"loss", "mse"}};
}

// ---- standardization -------------------------------------------------------

inline constexpr double kStddevFloor = 1e-8;

struct StandardizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;

    std::vector<double> apply(std::span<const double> x) const {
        if (x.size() != mean.size()) throw ShapeError("standardize: dimension mismatch");
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / stddev[i];
        return out;
    }

    friend bool operator==(const StandardizationStats&, const StandardizationStats&) = default;
};

/// Per-dimension sample mean and stddev (n - 1), stddev floored at 1e-8.
/// A constant column gets its value as the exact mean.
inline StandardizationStats fit_standardization(std::span<const std::vector<double>> rows) {
    if (rows.size() < 2) throw DegenerateInputError("fit_standardization: need at least 2 rows");
    const std::size_t dim = rows.front().size();
    for (const auto& r : rows) {
        if (r.size() != dim) throw ShapeError("fit_standardization: inconsistent row dimension");
    }
    StandardizationStats stats{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
    const double n = static_cast<double>(rows.size());
    for (std::size_t d = 0; d < dim; ++d) {
        const double first = rows.front()[d];
        bool constant = true;
        double sum = 0.0;
        for (const auto& r : rows) {
            sum += r[d];
            constant = constant && r[d] == first;
        }
        if (constant) {
            stats.mean[d] = first;
            stats.stddev[d] = kStddevFloor;
            continue;
        }
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& r : rows) ss += (r[d] - mean) * (r[d] - mean);
        stats.mean[d] = mean;
        stats.stddev[d] = std::max(std::sqrt(ss / (n - 1.0)), kStddevFloor);
    }
    return stats;
}

// ---- linear regression -----------------------------------------------------

struct LinearCoefficients {
    std::vector<double> w;
    double b = 0.0;

    double predict(std::span<const double> x) const {
        if (x.size() != w.size()) throw ShapeError("linear predict: dimension mismatch");
        return std::inner_product(w.begin(), w.end(), x.begin(), b);
    }

    friend bool operator==(const LinearCoefficients&, const LinearCoefficients&) = default;
};

inline constexpr double kRidgeFallback = 1e-8;

/// Least squares with intercept via the normal equations. Falls back to a
/// ridge of 1e-8 when the system is singular or badly conditioned.
inline LinearCoefficients linreg_fit(std::span<const std::vector<double>> X, std::span<const double> y) {
    if (X.size() != y.size()) throw ShapeError("linreg_fit: |X| != |y|");
    if (X.empty()) throw DegenerateInputError("linreg_fit: no rows");
    const std::size_t dim = X.front().size();
    if (X.size() < dim + 1) throw DegenerateInputError("linreg_fit: need at least dim + 1 rows");

    const auto n = static_cast<Eigen::Index>(X.size());
    const auto p = static_cast<Eigen::Index>(dim + 1);
    Eigen::MatrixXd Z(n, p);
    Eigen::VectorXd target(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = X[static_cast<std::size_t>(i)];
        if (row.size() != dim) throw ShapeError("linreg_fit: inconsistent row dimension");
        for (Eigen::Index j = 0; j + 1 < p; ++j) Z(i, j) = row[static_cast<std::size_t>(j)];
        Z(i, p - 1) = 1.0;
        target(i) = y[static_cast<std::size_t>(i)];
    }
    if (!Z.allFinite() || !target.allFinite()) throw DegenerateInputError("linreg_fit: non-finite input");

    const Eigen::MatrixXd gram = Z.transpose() * Z;
    const Eigen::VectorXd rhs = Z.transpose() * target;

    std::optional<Eigen::VectorXd> solution;
    {
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) {
            Eigen::VectorXd s = llt.solve(rhs);
            if (s.allFinite()) solution = std::move(s);
        }
    }
    if (!solution) {
        Eigen::MatrixXd ridged = gram;
        ridged.diagonal().array() += kRidgeFallback;
        Eigen::LLT<Eigen::MatrixXd> llt(ridged);
        if (llt.info() != Eigen::Success) throw SingularSystemError("linreg_fit: normal equations singular");
        Eigen::VectorXd s = llt.solve(rhs);
        if (!s.allFinite()) throw SingularSystemError("linreg_fit: normal equations singular");
        solution = std::move(s);
    }

    LinearCoefficients coef;
    coef.w.assign(solution->data(), solution->data() + dim);
    coef.b = (*solution)(p - 1);
    return coef;
}

// ---- feed-forward network --------------------------------------------------

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weights;  // outputs x inputs, row-major
    std::vector<double> bias;     // outputs

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// tanh hidden stack followed by a single output unit. With one hidden layer
/// this is b2 + w2 . tanh(W1 x + b1) (tanh applied to the sum when the output
/// activation is tanh).
struct MlpParams {
    std::vector<DenseLayer> hidden;
    std::vector<double> w_out;
    double b_out = 0.0;
    OutputActivation output = OutputActivation::linear;

    std::size_t input_dim() const { return hidden.empty() ? w_out.size() : hidden.front().inputs; }

    std::size_t parameter_count() const {
        std::size_t count = w_out.size() + 1;
        for (const auto& layer : hidden) count += layer.weights.size() + layer.bias.size();
        return count;
    }

    /// All parameters in a fixed order: each hidden layer's weights then bias, then w_out, b_out.
    std::vector<double> flatten() const {
        std::vector<double> flat;
        flat.reserve(parameter_count());
        for (const auto& layer : hidden) {
            flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
            flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
        }
        flat.insert(flat.end(), w_out.begin(), w_out.end());
        flat.push_back(b_out);
        return flat;
    }

    void assign(std::span<const double> flat) {
        if (flat.size() != parameter_count()) throw ShapeError("mlp: flat parameter size mismatch");
        auto it = flat.begin();
        for (auto& layer : hidden) {
            std::copy_n(it, layer.weights.size(), layer.weights.begin());
            it += static_cast<std::ptrdiff_t>(layer.weights.size());
            std::copy_n(it, layer.bias.size(), layer.bias.begin());
            it += static_cast<std::ptrdiff_t>(layer.bias.size());
        }
        std::copy_n(it, w_out.size(), w_out.begin());
        it += static_cast<std::ptrdiff_t>(w_out.size());
        b_out = *it;
    }

    /// Zero-valued parameters of the given architecture.
    static MlpParams zeros(std::size_t input_dim, std::size_t width, std::size_t layers = 1,
                           OutputActivation output = OutputActivation::linear) {
        MlpParams p;
        std::size_t in = input_dim;
        for (std::size_t l = 0; l < layers; ++l) {
            p.hidden.push_back(DenseLayer{in, width, std::vector<double>(in * width, 0.0), std::vector<double>(width, 0.0)});
            in = width;
        }
        p.w_out.assign(in, 0.0);
        p.output = output;
        return p;
    }

    friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Glorot-uniform weights, zero biases.
template <typename Rng>
MlpParams init_mlp(std::size_t input_dim, std::size_t width, std::size_t layers, OutputActivation output, Rng& rng) {
    MlpParams p = MlpParams::zeros(input_dim, width, layers, output);
    auto fill = [&](std::vector<double>& w, std::size_t fan_in, std::size_t fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& v : w) v = dist(rng);
    };
    for (auto& layer : p.hidden) fill(layer.weights, layer.inputs, layer.outputs);
    fill(p.w_out, p.w_out.size(), 1);
    return p;
}

namespace detail {

inline void check_input(const MlpParams& params, std::span<const double> x) {
    if (x.size() != params.input_dim()) {
        throw ShapeError("mlp: input dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(params.input_dim()));
    }
}

/// Activations of every hidden layer (index 0 is the input itself).
inline std::vector<std::vector<double>> hidden_activations(const MlpParams& params, std::span<const double> x) {
    std::vector<std::vector<double>> acts;
    acts.reserve(params.hidden.size() + 1);
    acts.emplace_back(x.begin(), x.end());
    for (const auto& layer : params.hidden) {
        const auto& in = acts.back();
        std::vector<double> out(layer.outputs);
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            const double* row = layer.weights.data() + o * layer.inputs;
            out[o] = std::tanh(std::inner_product(row, row + layer.inputs, in.begin(), layer.bias[o]));
        }
        acts.push_back(std::move(out));
    }
    return acts;
}

inline double output_unit(const MlpParams& params, std::span<const double> last) {
    const double z = std::inner_product(params.w_out.begin(), params.w_out.end(), last.begin(), params.b_out);
    return params.output == OutputActivation::tanh ? std::tanh(z) : z;
}

}  // namespace detail

inline double mlp_forward(const MlpParams& params, std::span<const double> x) {
    detail::check_input(params, x);
    const auto acts = detail::hidden_activations(params, x);
    return detail::output_unit(params, acts.back());
}

/// Adds the gradient of 0.5 * (forward(x) - target)^2 into `grad` (flattened
/// order of MlpParams::flatten) and returns forward(x).
inline double mlp_accumulate_gradient(const MlpParams& params, std::span<const double> x, double target,
                                      std::span<double> grad) {
    detail::check_input(params, x);
    if (grad.size() != params.parameter_count()) throw ShapeError("mlp: gradient buffer size mismatch");
    const auto acts = detail::hidden_activations(params, x);
    const double y = detail::output_unit(params, acts.back());

    double delta_out = y - target;
    if (params.output == OutputActivation::tanh) delta_out *= 1.0 - y * y;

    // Offsets of each layer's block in the flat layout.
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const auto& layer : params.hidden) {
        offsets.push_back(offset);
        offset += layer.weights.size() + layer.bias.size();
    }
    const auto& last = acts.back();
    for (std::size_t i = 0; i < params.w_out.size(); ++i) grad[offset + i] += delta_out * last[i];
    grad[offset + params.w_out.size()] += delta_out;

    std::vector<double> delta(last.size());
    for (std::size_t i = 0; i < last.size(); ++i) delta[i] = delta_out * params.w_out[i] * (1.0 - last[i] * last[i]);

    for (std::size_t l = params.hidden.size(); l-- > 0;) {
        const auto& layer = params.hidden[l];
        const auto& in = acts[l];
        double* gw = grad.data() + offsets[l];
        double* gb = gw + layer.weights.size();
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            for (std::size_t i = 0; i < layer.inputs; ++i) gw[o * layer.inputs + i] += delta[o] * in[i];
            gb[o] += delta[o];
        }
        if (l == 0) break;
        std::vector<double> below(layer.inputs, 0.0);
        for (std::size_t o = 0; o < layer.outputs; ++o) {
            for (std::size_t i = 0; i < layer.inputs; ++i) below[i] += layer.weights[o * layer.inputs + i] * delta[o];
        }
        for (std::size_t i = 0; i < layer.inputs; ++i) below[i] *= 1.0 - in[i] * in[i];
        delta = std::move(below);
    }
    return y;
}

/// Gradient of 0.5 * (forward(x) - target)^2 with respect to every parameter,
/// returned in the same shape as `params`.
inline MlpParams mlp_backward(const MlpParams& params, std::span<const double> x, double target) {
    std::vector<double> flat(params.parameter_count(), 0.0);
    mlp_accumulate_gradient(params, x, target, flat);
    MlpParams grad = params;
    grad.assign(flat);
    return grad;
}

// ---- ADAM ------------------------------------------------------------------

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

/// One bias-corrected ADAM update, in place. `t` is the 1-based step index.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
                      const TrainConfig& config, std::size_t t) {
    if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: shape mismatch");
    }
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    }
}

// ---- trained aggregator ----------------------------------------------------

struct TrainedAggregator {
    AggregatorKind kind = AggregatorKind::mlp;
    FeatureMask mask = FeatureMask::neural();
    bool log_perplexity = true;
    StandardizationStats stats;
    std::variant<LinearCoefficients, MlpParams> params;
    std::string config_digest;

    std::size_t input_dim() const { return mask.dimension(); }

    friend bool operator==(const TrainedAggregator&, const TrainedAggregator&) = default;
};

/// Masked projection with ln() applied to perplexities when `log_perplexity` is set.
inline std::vector<double> model_inputs(const FeatureVector& fv, const FeatureMask& mask, bool log_perplexity) {
    FeatureVector t = fv;
    if (log_perplexity) {
        t.ppl_ref = std::log(fv.ppl_ref);
        t.ppl_cand = std::log(fv.ppl_cand);
    }
    return project(t, mask);
}

namespace detail {

inline void require_valid(const FeatureVector& fv) {
    auto violations = validate_features(fv);
    if (violations.empty()) return;
    std::string what = "invalid feature vector:";
    for (const auto& v : violations) what += " [" + v + "]";
    throw ValidationError(what, std::move(violations));
}

inline double regress(const TrainedAggregator& model, std::span<const double> z) {
    return std::visit(
        [&](const auto& p) -> double {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, LinearCoefficients>) {
                return p.predict(z);
            } else {
                return mlp_forward(p, z);
            }
        },
        model.params);
}

}  // namespace detail

/// Unclamped regressor output for one feature vector.
inline double predict_raw(const TrainedAggregator& model, const FeatureVector& fv) {
    detail::require_valid(fv);
    const auto z = model.stats.apply(model_inputs(fv, model.mask, model.log_perplexity));
    return detail::regress(model, z);
}

struct TrainingExample {
    FeatureVector features;
    double human_score;  // 0..1
};

struct TrainOutcome {
    TrainedAggregator model;
    std::vector<double> epoch_mse;  // running MSE per epoch (MLP only)
    double train_mse = 0.0;         // MSE of the final model on the training set
};

inline std::string config_digest(AggregatorKind kind, const FeatureMask& mask, const TrainConfig& config) {
    nlohmann::ordered_json j{{"kind", kind_name(kind)}, {"mask", mask.to_string()}, {"config", to_json(config)}};
    return text::sha256_hex(j.dump());
}

inline TrainOutcome fit_aggregator(std::span<const TrainingExample> dataset, const FeatureMask& mask,
                                   AggregatorKind kind, const TrainConfig& config) {
    config.validate();
    if (dataset.size() < 10) throw DegenerateInputError("train: need at least 10 examples");

    std::vector<std::vector<double>> rows;
    std::vector<double> targets;
    rows.reserve(dataset.size());
    targets.reserve(dataset.size());
    for (const auto& ex : dataset) {
        if (!(ex.human_score >= 0.0 && ex.human_score <= 1.0)) {
            throw DataError("train: human score outside [0,1]");
        }
        detail::require_valid(ex.features);
        rows.push_back(model_inputs(ex.features, mask, config.log_perplexity));
        targets.push_back(ex.human_score);
    }

    TrainOutcome outcome;
    TrainedAggregator& model = outcome.model;
    model.kind = kind;
    model.mask = mask;
    model.log_perplexity = config.log_perplexity;
    model.stats = fit_standardization(rows);
    model.config_digest = config_digest(kind, mask, config);
    for (auto& r : rows) r = model.stats.apply(r);

    if (kind == AggregatorKind::linreg) {
        model.params = linreg_fit(rows, targets);
    } else {
        std::mt19937_64 rng(config.seed);
        MlpParams params = init_mlp(mask.dimension(), config.hidden_width, config.hidden_layers,
                                    config.output_activation, rng);
        std::vector<double> flat = params.flatten();
        std::vector<double> grad(flat.size());
        AdamState state(flat.size());
        std::vector<std::size_t> order(rows.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::size_t step = 0;

        for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            double sse = 0.0;
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t end = std::min(start + config.batch_size, order.size());
                std::fill(grad.begin(), grad.end(), 0.0);
                for (std::size_t k = start; k < end; ++k) {
                    const std::size_t i = order[k];
                    const double y = mlp_accumulate_gradient(params, rows[i], targets[i], grad);
                    sse += (y - targets[i]) * (y - targets[i]);
                }
                const double scale = 1.0 / static_cast<double>(end - start);
                for (double& g : grad) g *= scale;
                adam_step(state, flat, grad, config, ++step);
                params.assign(flat);
            }
            const double mse = sse / static_cast<double>(rows.size());
            if (!std::isfinite(mse)) {
                throw DivergenceError(epoch, "train: loss diverged at epoch " + std::to_string(epoch));
            }
            outcome.epoch_mse.push_back(mse);
        }
        model.params = std::move(params);
    }

    double sse = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double e = detail::regress(model, rows[i]) - targets[i];
        sse += e * e;
    }
    outcome.train_mse = sse / static_cast<double>(rows.size());
    if (!std::isfinite(outcome.train_mse)) throw DivergenceError(config.epochs, "train: non-finite final loss");
    return outcome;
}

inline TrainedAggregator train(std::span<const TrainingExample> dataset, const FeatureMask& mask,
                               AggregatorKind kind, const TrainConfig& config) {
    return fit_aggregator(dataset, mask, kind, config).model;
}

}  // namespace metricforge
