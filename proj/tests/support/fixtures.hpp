#pragma once

// Shared generators and independent oracles for the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "metricforge/aggregator.hpp"
#include "metricforge/core.hpp"

namespace fixtures {

namespace mf = metricforge;

/// A valid feature vector with every field drawn from its legal range.
inline mf::FeatureVector random_features(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> log_ppl(0.0, 7.0);
    std::uniform_int_distribution<int> len(1, 60);
    const double a = u01(rng), b = u01(rng), c = u01(rng);
    const double s = a + b + c;
    mf::FeatureVector fv;
    fv.sem_sim = 5.0 * u01(rng);
    fv.mnli_contradiction = a / s;
    fv.mnli_neutral = b / s;
    fv.mnli_entailment = 1.0 - a / s - b / s;
    fv.ppl_ref = std::exp(log_ppl(rng));
    fv.ppl_cand = std::exp(log_ppl(rng));
    fv.len_ref = static_cast<std::uint64_t>(len(rng));
    fv.len_cand = static_cast<std::uint64_t>(len(rng));
    return fv;
}

/// Parameters with every entry drawn from N(0, scale^2).
inline mf::MlpParams gaussian_mlp(std::mt19937_64& rng, std::size_t in, std::size_t width, std::size_t layers,
                                  mf::OutputActivation out, double scale = 1.0) {
    auto p = mf::MlpParams::zeros(in, width, layers, out);
    std::normal_distribution<double> g(0.0, scale);
    auto flat = p.flatten();
    for (double& v : flat) v = g(rng);
    p.assign(flat);
    return p;
}

/// One-hidden-layer forward pass written directly from the formula
/// b2 + w2 . tanh(W1 x + b1), reading the weight matrix column by column.
inline double straight_line_forward(const mf::MlpParams& p, const std::vector<double>& x) {
    const auto& layer = p.hidden.at(0);
    std::vector<double> pre(layer.bias);
    for (std::size_t i = 0; i < layer.inputs; ++i) {
        for (std::size_t j = 0; j < layer.outputs; ++j) pre[j] += layer.weights[j * layer.inputs + i] * x[i];
    }
    double z = p.b_out;
    for (std::size_t j = 0; j < layer.outputs; ++j) z += p.w_out[j] * std::tanh(pre[j]);
    return p.output == mf::OutputActivation::tanh ? std::tanh(z) : z;
}

/// Central finite-difference gradient of 0.5 * (forward - target)^2.
inline std::vector<double> finite_difference_gradient(const mf::MlpParams& params, const std::vector<double>& x,
                                                      double target, double h = 1e-6) {
    auto probe = params;
    auto flat = params.flatten();
    std::vector<double> grad(flat.size());
    auto loss = [&] {
        const double r = mf::mlp_forward(probe, x) - target;
        return 0.5 * r * r;
    };
    for (std::size_t k = 0; k < flat.size(); ++k) {
        const double saved = flat[k];
        flat[k] = saved + h;
        probe.assign(flat);
        const double up = loss();
        flat[k] = saved - h;
        probe.assign(flat);
        const double down = loss();
        flat[k] = saved;
        grad[k] = (up - down) / (2.0 * h);
    }
    return grad;
}

/// Relative error with the denominator floored at 1e-2. Central differences
/// at h = 1e-6 carry roughly 1e-10 of absolute rounding noise, so on
/// coordinates whose true gradient is ~0 an unfloored ratio measures that
/// noise rather than the analytic gradient.
inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({1e-2, std::abs(analytic), std::abs(numeric)});
}

struct GradientCheck {
    double max_relative_error = 0.0;
    std::size_t coordinates = 0;
};

/// 100 seeded (params, x, target) triples over assorted architectures.
inline GradientCheck run_gradient_check(std::size_t configurations = 100) {
    GradientCheck out;
    for (std::size_t seed = 0; seed < configurations; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t in = 1 + rng() % 8;
        const std::size_t width = 1 + rng() % 12;
        const std::size_t layers = 1 + rng() % 3;
        const auto act = seed % 2 ? mf::OutputActivation::tanh : mf::OutputActivation::linear;
        const auto params = gaussian_mlp(rng, in, width, layers, act, 0.7);
        std::normal_distribution<double> g;
        std::vector<double> x(in);
        for (double& v : x) v = g(rng);
        const double target = g(rng);
        const auto analytic = mf::mlp_backward(params, x, target).flatten();
        const auto numeric = finite_difference_gradient(params, x, target);
        for (std::size_t k = 0; k < analytic.size(); ++k) {
            out.max_relative_error = std::max(out.max_relative_error, relative_error(analytic[k], numeric[k]));
        }
        out.coordinates += analytic.size();
    }
    return out;
}

/// Two ADAM steps on a scalar unrolled by hand with the bias corrections
/// folded in: m_hat2 = (b1 g1 + g2) / (1 + b1), v_hat2 = (b2 g1^2 + g2^2) / (1 + b2).
inline double adam_two_steps_closed_form(double p0, double g1, double g2, const mf::TrainConfig& c) {
    const double p1 = p0 - c.learning_rate * g1 / (std::abs(g1) + c.adam_epsilon);
    const double m_hat = (c.adam_beta1 * g1 + g2) / (1.0 + c.adam_beta1);
    const double v_hat = (c.adam_beta2 * g1 * g1 + g2 * g2) / (1.0 + c.adam_beta2);
    return p1 - c.learning_rate * m_hat / (std::sqrt(v_hat) + c.adam_epsilon);
}

/// Labelled examples whose target is a fixed width-10 tanh teacher applied
/// to the standardized 8-dim feature inputs, rescaled into [0, 1].
struct TeacherData {
    std::vector<mf::TrainingExample> examples;
    double target_variance = 0.0;
};

inline TeacherData teacher_student_data(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<mf::FeatureVector> features(n);
    std::vector<std::vector<double>> rows(n);
    const auto mask = mf::FeatureMask::all();
    for (std::size_t i = 0; i < n; ++i) {
        features[i] = random_features(rng);
        rows[i] = mf::model_inputs(features[i], mask, true);
    }
    const auto stats = mf::fit_standardization(rows);
    const auto teacher = gaussian_mlp(rng, 8, 10, 1, mf::OutputActivation::tanh, 0.5);
    TeacherData data;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = 0.5 + 0.45 * mf::mlp_forward(teacher, stats.apply(rows[i]));
        data.examples.push_back({features[i], y});
        sum += y;
        sum_sq += y * y;
    }
    const double mean = sum / static_cast<double>(n);
    data.target_variance = sum_sq / static_cast<double>(n) - mean * mean;
    return data;
}

}  // namespace fixtures
