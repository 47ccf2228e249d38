#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "metricforge/aggregator.hpp"
#include "support/fixtures.hpp"

namespace mf = metricforge;

namespace {

using Rows = std::vector<std::vector<double>>;

// Least squares through column-pivoting QR of the design matrix [X | 1],
// never forming X^T X.
std::vector<double> qr_oracle(const Rows& X, const std::vector<double>& y) {
    const auto n = static_cast<Eigen::Index>(X.size());
    const auto p = static_cast<Eigen::Index>(X.front().size() + 1);
    Eigen::MatrixXd A(n, p);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j + 1 < p; ++j) A(i, j) = X[i][j];
        A(i, p - 1) = 1.0;
        b(i) = y[i];
    }
    const Eigen::VectorXd s = A.colPivHouseholderQr().solve(b);
    return {s.data(), s.data() + s.size()};
}

mf::TrainConfig quick_config() {
    mf::TrainConfig c;
    c.epochs = 5;
    c.seed = 42;
    return c;
}

std::vector<mf::TrainingExample> noisy_dataset(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<mf::TrainingExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto fv = fixtures::random_features(rng);
        const double y = std::clamp(0.15 * fv.sem_sim + 0.2 * fv.mnli_entailment + noise(rng), 0.0, 1.0);
        out.push_back({fv, y});
    }
    return out;
}

}  // namespace

TEST(Standardization, SampleStatistics) {
    const Rows rows{{0.0}, {2.0}};
    const auto s = mf::fit_standardization(rows);
    EXPECT_EQ(s.mean, std::vector<double>{1.0});
    EXPECT_EQ(s.stddev, std::vector<double>{std::sqrt(2.0)});
}

TEST(Standardization, ConstantColumnUsesFloor) {
    const Rows rows{{3.5, 1.0}, {3.5, 2.0}, {3.5, 4.0}};
    const auto s = mf::fit_standardization(rows);
    EXPECT_EQ(s.mean[0], 3.5);
    EXPECT_EQ(s.stddev[0], mf::kStddevFloor);
    EXPECT_EQ(s.apply(rows[1])[0], 0.0);
}

TEST(Standardization, OutputHasZeroMeanUnitStddev) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(40.0, 12.0);
    Rows rows(300, std::vector<double>(4));
    for (auto& r : rows) {
        for (auto& v : r) v = g(rng);
    }
    const auto s = mf::fit_standardization(rows);
    for (std::size_t d = 0; d < 4; ++d) {
        double sum = 0.0, ss = 0.0;
        for (const auto& r : rows) sum += s.apply(r)[d];
        const double mean = sum / 300.0;
        for (const auto& r : rows) ss += std::pow(s.apply(r)[d] - mean, 2);
        EXPECT_NEAR(mean, 0.0, 1e-10);
        EXPECT_NEAR(std::sqrt(ss / 299.0), 1.0, 1e-10);
    }
}

TEST(Standardization, Errors) {
    EXPECT_THROW(mf::fit_standardization(Rows{{1.0}}), mf::DegenerateInputError);
    EXPECT_THROW(mf::fit_standardization(Rows{{1.0}, {1.0, 2.0}}), mf::ShapeError);
}

TEST(Linreg, RecoversNoiselessPlane) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-5, 5);
    Rows X;
    std::vector<double> y;
    for (int i = 0; i < 10; ++i) {
        X.push_back({u(rng), u(rng)});
        y.push_back(2 * X.back()[0] + 3 * X.back()[1] + 1);
    }
    const auto c = mf::linreg_fit(X, y);
    EXPECT_NEAR(c.w[0], 2.0, 1e-8);
    EXPECT_NEAR(c.w[1], 3.0, 1e-8);
    EXPECT_NEAR(c.b, 1.0, 1e-8);
}

TEST(Linreg, ConstantTarget) {
    const Rows X{{1, 0}, {0, 1}, {2, 3}, {5, -1}};
    const std::vector<double> y(4, 0.25);
    const auto c = mf::linreg_fit(X, y);
    EXPECT_NEAR(c.w[0], 0.0, 1e-12);
    EXPECT_NEAR(c.w[1], 0.0, 1e-12);
    EXPECT_NEAR(c.b, 0.25, 1e-12);
}

TEST(Linreg, MatchesQrOracleAndResidualIsOrthogonal) {
    const Rows X{{1.0, 2.0}, {2.0, -1.0}, {3.0, 0.5}, {-1.0, 4.0}, {0.5, 0.5}};
    const std::vector<double> y{1.2, 0.7, 2.9, -0.4, 0.8};
    const auto c = mf::linreg_fit(X, y);
    const auto oracle = qr_oracle(X, y);
    EXPECT_NEAR(c.w[0], oracle[0], 1e-10);
    EXPECT_NEAR(c.w[1], oracle[1], 1e-10);
    EXPECT_NEAR(c.b, oracle[2], 1e-10);

    std::vector<double> residual(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - c.predict(X[i]);
    double dot_ones = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) dot += residual[i] * X[i][j];
        EXPECT_LT(std::abs(dot), 1e-8);
    }
    for (double r : residual) dot_ones += r;
    EXPECT_LT(std::abs(dot_ones), 1e-8);
}

TEST(Linreg, RandomSystemsAgreeWithQr) {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t dim = 1 + rng() % 8;
        const std::size_t n = dim + 1 + rng() % 40;
        Rows X(n, std::vector<double>(dim));
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : X[i]) v = g(rng);
            y[i] = g(rng);
        }
        const auto c = mf::linreg_fit(X, y);
        const auto oracle = qr_oracle(X, y);
        for (std::size_t j = 0; j < dim; ++j) EXPECT_NEAR(c.w[j], oracle[j], 1e-8);
        EXPECT_NEAR(c.b, oracle[dim], 1e-8);
    }
}

TEST(Linreg, CollinearColumnsFallBackToRidge) {
    // Third column duplicates the first: X^T X is singular.
    Rows X;
    std::vector<double> y;
    for (int i = 0; i < 12; ++i) {
        const double a = i * 0.5, b = std::sin(i);
        X.push_back({a, b, a});
        y.push_back(1.0 + 2.0 * a - b);
    }
    const auto c = mf::linreg_fit(X, y);
    for (double w : c.w) EXPECT_TRUE(std::isfinite(w));
    for (std::size_t i = 0; i < X.size(); ++i) EXPECT_NEAR(c.predict(X[i]), y[i], 1e-6);
    EXPECT_NEAR(c.w[0] + c.w[2], 2.0, 1e-6);
}

TEST(Linreg, Preconditions) {
    EXPECT_THROW(mf::linreg_fit(Rows{{1, 2}, {3, 4}}, std::vector<double>{1, 2}), mf::DegenerateInputError);
    EXPECT_THROW(mf::linreg_fit(Rows{{1}, {2}}, std::vector<double>{1}), mf::ShapeError);
    EXPECT_THROW(mf::linreg_fit(Rows{{1}, {NAN}, {3}}, std::vector<double>{1, 2, 3}), mf::DegenerateInputError);
}

TEST(MlpForward, Examples) {
    auto p = mf::MlpParams::zeros(3, 10);
    const std::vector<double> x{0.3, -1.2, 2.0};
    EXPECT_EQ(mf::mlp_forward(p, x), 0.0);
    p.b_out = 0.7;
    EXPECT_EQ(mf::mlp_forward(p, x), 0.7);
    EXPECT_THROW(mf::mlp_forward(p, std::vector<double>{1.0}), mf::ShapeError);
}

TEST(MlpForward, MatchesStraightLineImplementation) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t in = 1 + rng() % 8;
        const auto act = seed % 3 ? mf::OutputActivation::linear : mf::OutputActivation::tanh;
        const auto p = mf::init_mlp(in, 10, 1, act, rng);
        std::normal_distribution<double> g;
        std::vector<double> x(in);
        for (auto& v : x) v = g(rng);
        EXPECT_NEAR(mf::mlp_forward(p, x), fixtures::straight_line_forward(p, x), 1e-14);
    }
}

TEST(MlpBackward, ZeroResidualGivesZeroGradient) {
    const auto zero = mf::MlpParams::zeros(4, 10);
    const std::vector<double> x{1, 2, 3, 4};
    for (double g : mf::mlp_backward(zero, x, 0.0).flatten()) EXPECT_EQ(g, 0.0);

    std::mt19937_64 rng(3);
    const auto p = mf::init_mlp(4, 10, 2, mf::OutputActivation::linear, rng);
    const double y = mf::mlp_forward(p, x);
    for (double g : mf::mlp_backward(p, x, y).flatten()) EXPECT_EQ(g, 0.0);
}

TEST(MlpBackward, MatchesFiniteDifferences) {
    const auto start = std::chrono::steady_clock::now();
    const auto check = fixtures::run_gradient_check(100);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_LT(check.max_relative_error, 1e-6);
    EXPECT_GT(check.coordinates, 1000u);
    EXPECT_LT(seconds, 5.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    mf::TrainConfig c;
    for (double g : {3.0, -0.02, 1e-3}) {
        mf::AdamState s(1);
        std::vector<double> p{0.5};
        const std::vector<double> grad{g};
        mf::adam_step(s, p, grad, c, 1);
        EXPECT_NEAR(p[0], 0.5 - c.learning_rate * g / (std::abs(g) + c.adam_epsilon), 1e-16);
    }
}

TEST(Adam, TwoStepsMatchHandUnrolledForm) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 200; ++trial) {
        mf::TrainConfig c;
        c.learning_rate = std::exp(g(rng) - 5.0);
        c.adam_beta1 = 0.5 + 0.49 * std::abs(std::tanh(g(rng)));
        c.adam_beta2 = 0.9 + 0.099 * std::abs(std::tanh(g(rng)));
        const double p0 = g(rng), g1 = g(rng), g2 = g(rng);
        mf::AdamState s(1);
        std::vector<double> p{p0};
        mf::adam_step(s, p, std::vector<double>{g1}, c, 1);
        mf::adam_step(s, p, std::vector<double>{g2}, c, 2);
        EXPECT_NEAR(p[0], fixtures::adam_two_steps_closed_form(p0, g1, g2, c), 1e-12);
    }
}

TEST(Adam, ZeroGradientIsAFixpoint) {
    mf::TrainConfig c;
    std::vector<double> p{0.25, -3.0, 7.5};
    const auto before = p;
    mf::AdamState fresh(3);
    for (std::size_t t = 1; t <= 5; ++t) mf::adam_step(fresh, p, std::vector<double>(3, 0.0), c, t);
    EXPECT_EQ(p, before);
    EXPECT_EQ(fresh.m, std::vector<double>(3, 0.0));

    // With history the moments decay geometrically and nothing else changes in them.
    mf::AdamState warm(3);
    warm.m = {0.1, -0.2, 0.3};
    warm.v = {0.01, 0.04, 0.09};
    const auto m0 = warm.m, v0 = warm.v;
    mf::adam_step(warm, p, std::vector<double>(3, 0.0), c, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(warm.m[i], c.adam_beta1 * m0[i]);
        EXPECT_EQ(warm.v[i], c.adam_beta2 * v0[i]);
    }
}

TEST(Adam, Preconditions) {
    mf::TrainConfig c;
    mf::AdamState s(1);
    std::vector<double> p{1.0};
    EXPECT_THROW(mf::adam_step(s, p, std::vector<double>{1.0}, c, 0), std::invalid_argument);
    EXPECT_THROW(mf::adam_step(s, p, std::vector<double>{1.0, 2.0}, c, 1), mf::ShapeError);
}

TEST(TrainConfig, Validation) {
    mf::TrainConfig c;
    c.learning_rate = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.adam_beta2 = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.epochs = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Train, TeacherStudentReachesLowMse) {
    const auto data = fixtures::teacher_student_data(5000, 2024);
    mf::TrainConfig c;
    c.seed = 7;
    const auto outcome = mf::fit_aggregator(data.examples, mf::FeatureMask::all(), mf::AggregatorKind::mlp, c);
    EXPECT_EQ(outcome.epoch_mse.size(), 200u);
    for (double e : outcome.epoch_mse) EXPECT_TRUE(std::isfinite(e));
    EXPECT_LT(outcome.train_mse, 1e-3);
    // The target is not nearly constant, so the bound above is informative.
    EXPECT_GT(data.target_variance, 20 * outcome.train_mse);
    for (std::size_t i = 0; i < 20; ++i) {
        const auto& ex = data.examples[i * 97];
        EXPECT_NEAR(mf::predict_raw(outcome.model, ex.features), ex.human_score, 0.1);
    }
}

TEST(Train, LinregRecoversLinearTeacherThroughPipeline) {
    std::mt19937_64 rng(5);
    const auto mask = mf::FeatureMask::parse("SS,SI,LEN");
    std::vector<mf::TrainingExample> data;
    for (int i = 0; i < 200; ++i) {
        const auto fv = fixtures::random_features(rng);
        const auto in = mf::model_inputs(fv, mask, true);
        double y = 0.05;
        const double w[] = {0.08, 0.02, 0.03, 0.002, 0.001};
        for (std::size_t k = 0; k < in.size(); ++k) y += w[k] * in[k];
        data.push_back({fv, y});
    }
    for (const auto& ex : data) ASSERT_TRUE(ex.human_score >= 0.0 && ex.human_score <= 1.0);
    const auto model = mf::train(data, mask, mf::AggregatorKind::linreg, {});
    for (const auto& ex : data) EXPECT_NEAR(mf::predict_raw(model, ex.features), ex.human_score, 1e-10);
}

TEST(Train, DeterministicForSeed) {
    const auto data = noisy_dataset(300, 1);
    const auto a = mf::train(data, mf::FeatureMask::all(), mf::AggregatorKind::mlp, quick_config());
    const auto b = mf::train(data, mf::FeatureMask::all(), mf::AggregatorKind::mlp, quick_config());
    EXPECT_EQ(a, b);
    auto other = quick_config();
    other.seed = 43;
    EXPECT_NE(mf::train(data, mf::FeatureMask::all(), mf::AggregatorKind::mlp, other), a);
}

TEST(Train, RejectsBadData) {
    auto data = noisy_dataset(9, 2);
    EXPECT_THROW(mf::train(data, mf::FeatureMask::all(), mf::AggregatorKind::linreg, {}), mf::DegenerateInputError);
    data = noisy_dataset(20, 2);
    data[3].human_score = 1.5;
    EXPECT_THROW(mf::train(data, mf::FeatureMask::all(), mf::AggregatorKind::linreg, {}), mf::DataError);
    data = noisy_dataset(20, 2);
    data[5].features.mnli_neutral += 0.1;
    EXPECT_THROW(mf::train(data, mf::FeatureMask::all(), mf::AggregatorKind::linreg, {}), mf::ValidationError);
}

TEST(Train, DivergenceIsReported) {
    auto data = noisy_dataset(64, 3);
    mf::TrainConfig c = quick_config();
    c.learning_rate = 1e300;
    c.epochs = 50;
    c.output_activation = mf::OutputActivation::linear;
    try {
        mf::train(data, mf::FeatureMask::all(), mf::AggregatorKind::mlp, c);
        FAIL() << "expected DivergenceError";
    } catch (const mf::DivergenceError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    }
}

TEST(PredictRaw, ConstantLinearModel) {
    mf::TrainedAggregator m;
    m.kind = mf::AggregatorKind::linreg;
    m.mask = mf::FeatureMask::parse("SS");
    m.stats = {{0.0}, {1.0}};
    m.params = mf::LinearCoefficients{{0.0}, 0.5};
    std::mt19937_64 rng(1);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(mf::predict_raw(m, fixtures::random_features(rng)), 0.5);
    auto bad = fixtures::random_features(rng);
    bad.sem_sim = -1;
    EXPECT_THROW(mf::predict_raw(m, bad), mf::ValidationError);
}

TEST(PredictRaw, UnmaskedFeaturesNeverMatter) {
    const auto data = noisy_dataset(200, 4);
    std::mt19937_64 rng(99);
    for (const char* spec : {"SS", "LI", "SI", "LEN", "SS,LI", "LI,SI", "SS,LI,SI"}) {
        const auto mask = mf::FeatureMask::parse(spec);
        for (auto kind : {mf::AggregatorKind::linreg, mf::AggregatorKind::mlp}) {
            const auto model = mf::train(data, mask, kind, quick_config());
            for (int i = 0; i < 20; ++i) {
                const auto fv = fixtures::random_features(rng);
                auto noisy = fixtures::random_features(rng);
                if (mask.has(mf::FeatureGroup::SS)) noisy.sem_sim = fv.sem_sim;
                if (mask.has(mf::FeatureGroup::LI)) {
                    noisy.mnli_contradiction = fv.mnli_contradiction;
                    noisy.mnli_neutral = fv.mnli_neutral;
                    noisy.mnli_entailment = fv.mnli_entailment;
                }
                if (mask.has(mf::FeatureGroup::SI)) {
                    noisy.ppl_ref = fv.ppl_ref;
                    noisy.ppl_cand = fv.ppl_cand;
                }
                if (mask.has(mf::FeatureGroup::LEN)) {
                    noisy.len_ref = fv.len_ref;
                    noisy.len_cand = fv.len_cand;
                }
                EXPECT_EQ(mf::predict_raw(model, fv), mf::predict_raw(model, noisy)) << spec;
            }
        }
    }
}
