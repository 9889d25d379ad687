#include <gtest/gtest.h>

#include "counterpart/metrics.hpp"
#include "counterpart/predictor.hpp"
#include "oracles/generators.hpp"
#include "oracles/metric_oracles.hpp"
#include "test_util.hpp"

using namespace counterpart;
using counterpart::testing::fixture_endpoint;
using counterpart::testing::random_vector;

namespace {

struct Data {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    std::vector<std::vector<double>> Q;
};

Data make_data(Rng& rng, std::size_t n, std::size_t q, std::size_t d, bool classification, double nan_rate = 0.0) {
    Data out;
    auto row = [&] {
        auto r = random_vector(rng, d, -3, 3);
        for (auto& x : r)
            if (rng.uniform() < nan_rate) x = kNaN;
        return r;
    };
    for (std::size_t i = 0; i < n; ++i) {
        out.X.push_back(row());
        out.y.push_back(classification ? static_cast<double>(rng.below(2)) : rng.uniform(-1, 1));
    }
    for (std::size_t i = 0; i < q; ++i) out.Q.push_back(row());
    return out;
}

TrainSet train_of(const Data& d, TaskKind task) { return {Matrix::from_rows(d.X), d.y, task}; }

}  // namespace

TEST(Knn, MatchesBruteForceOracle) {
    Rng rng(10);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 5 + rng.below(80), d = 1 + rng.below(10), k = 1 + rng.below(30);
        const bool clf = trial % 2 == 0;
        const Data data = make_data(rng, n, 10, d, clf, trial % 3 == 0 ? 0.2 : 0.0);
        const auto pred = knn_predict(train_of(data, clf ? TaskKind::Classification : TaskKind::Regression), Matrix::from_rows(data.Q), {k});
        for (std::size_t i = 0; i < data.Q.size(); ++i) {
            // An all-missing query ties every row at infinity; the oracle does not model tie order.
            if (std::none_of(data.Q[i].begin(), data.Q[i].end(), [](double x) { return std::isfinite(x); })) continue;
            EXPECT_NEAR(pred[i], counterpart::testing::brute_knn(data.X, data.y, data.Q[i], k), 1e-12) << "trial " << trial;
        }
    }
}

TEST(Knn, InvariantToTrainingRowOrder) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Data data = make_data(rng, 40, 15, 4, true, 0.1);
        const auto a = knn_predict(train_of(data, TaskKind::Classification), Matrix::from_rows(data.Q), {7});
        std::vector<std::size_t> perm(data.X.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(std::span(perm));
        Data shuffled = data;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            shuffled.X[i] = data.X[perm[i]];
            shuffled.y[i] = data.y[perm[i]];
        }
        const auto b = knn_predict(train_of(shuffled, TaskKind::Classification), Matrix::from_rows(data.Q), {7});
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    }
}

TEST(Knn, InvariantToPowerOfTwoColumnScaling) {
    Rng rng(12);
    Data data = make_data(rng, 50, 20, 5, false);
    const auto a = knn_predict(train_of(data, TaskKind::Regression), Matrix::from_rows(data.Q), {9});
    for (auto* rows : {&data.X, &data.Q})
        for (auto& r : *rows) {
            r[1] *= 1024.0;
            r[3] *= 0.125;
        }
    const auto b = knn_predict(train_of(data, TaskKind::Regression), Matrix::from_rows(data.Q), {9});
    EXPECT_EQ(a, b);
}

TEST(Knn, ScoresStayInRange) {
    Rng rng(13);
    const Data data = make_data(rng, 30, 30, 3, true, 0.3);
    for (double p : knn_predict(train_of(data, TaskKind::Classification), Matrix::from_rows(data.Q), {5})) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
    }
}

TEST(Knn, NoSharedColumnsFallsBackToUniformVote) {
    TrainSet t{Matrix::from_rows({{1.0, kNaN}, {2.0, kNaN}, {3.0, kNaN}}), {1, 0, 1}, TaskKind::Classification};
    const auto p = knn_predict(t, Matrix::from_rows({{kNaN, 5.0}}), {3});
    EXPECT_DOUBLE_EQ(p[0], 2.0 / 3.0);
    // A row sharing a column outweighs the rest entirely.
    TrainSet u{Matrix::from_rows({{1.0, kNaN}, {kNaN, 5.0}, {3.0, kNaN}}), {0, 1, 0}, TaskKind::Classification};
    EXPECT_DOUBLE_EQ(knn_predict(u, Matrix::from_rows({{kNaN, 4.0}}), {3})[0], 1.0);
}

TEST(Knn, ClampsKAndValidates) {
    TrainSet t{Matrix::from_rows({{0.0}, {1.0}}), {0.2, 0.4}, TaskKind::Regression};
    std::vector<std::string> warnings;
    const auto p = knn_predict(t, Matrix::from_rows({{0.5}}), {25}, &warnings);
    EXPECT_NEAR(p[0], 0.3, 1e-12);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("k=25"), std::string::npos);
    EXPECT_THROW(knn_predict(TrainSet{}, Matrix::from_rows({{0.5}})), PredictorError);
    EXPECT_THROW(knn_predict(t, Matrix::from_rows({{0.5, 1.0}})), PredictorError);
    EXPECT_THROW(knn_predict(t, Matrix::from_rows({{0.5}}), {0}), PredictorError);
}

TEST(Knn, ExactMatchDominates) {
    TrainSet t{Matrix::from_rows({{0.0, 0.0}, {1.0, 1.0}, {2.0, 2.0}}), {0.0, 1.0, 0.0}, TaskKind::Regression};
    EXPECT_NEAR(knn_predict(t, Matrix::from_rows({{1.0, 1.0}}), {3})[0], 1.0, 1e-6);
}

TEST(PredictorSpec, Parsing) {
    EXPECT_EQ(PredictorEndpoint::parse("knn").knn.k, 25u);
    EXPECT_EQ(PredictorEndpoint::parse("knn:5").knn.k, 5u);
    EXPECT_THROW(PredictorEndpoint::parse("knn:abc"), ConfigError);
    EXPECT_EQ(PredictorEndpoint::parse("cmd=x").kind, PredictorEndpoint::Kind::External);
}

TEST(ExternalPredictor, AgreesWithBuiltinThroughTheProtocol) {
    Rng rng(14);
    const Data data = make_data(rng, 40, 12, 4, true, 0.2);
    const TrainSet t = train_of(data, TaskKind::Classification);
    const Matrix q = Matrix::from_rows(data.Q);
    const auto local = knn_predict(t, q);
    const auto remote = predict(PredictorEndpoint::parse(fixture_endpoint("predictor-knn")), t, q);
    ASSERT_EQ(remote.size(), local.size());
    for (std::size_t i = 0; i < local.size(); ++i) EXPECT_NEAR(remote[i], local[i], 1e-12);
}

TEST(ExternalPredictor, ShortOrBrokenRepliesAreErrors) {
    TrainSet t{Matrix::from_rows({{0.0}, {1.0}}), {0, 1}, TaskKind::Classification};
    const Matrix q = Matrix::from_rows({{0.1}, {0.9}});
    for (const std::string mode : {"predictor-short", "crash", "garbage", "error"}) {
        try {
            external_predict(Endpoint::parse(fixture_endpoint(mode)), t, q);
            ADD_FAILURE() << mode << " did not fail";
        } catch (const PredictorError& e) {
            if (mode == "predictor-short") {
                EXPECT_NE(std::string(e.what()).find("1 predictions for 2 rows"), std::string::npos) << e.what();
            }
        }
    }
    EXPECT_THROW(external_predict(Endpoint::parse(fixture_endpoint("silent", 150)), t, q), PredictorError);
}

TEST(Metrics, AucMatchesPairwiseOracle) {
    Rng rng(15);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(60);
        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(8)) / 8.0;  // plenty of ties
            y[i] = static_cast<double>(rng.below(2));
        }
        const auto a = auc(s, y);
        const auto b = counterpart::testing::pairwise_auc(s, y);
        ASSERT_EQ(a.has_value(), b.has_value());
        if (a) {
            EXPECT_NEAR(*a, *b, 1e-12);
        }
    }
    const std::vector<double> s{0.1, 0.2, 0.3, 0.4}, y{0, 0, 1, 1};
    EXPECT_EQ(auc(s, y), 1.0);
    const std::vector<double> c{0.5, 0.5, 0.5, 0.5};
    EXPECT_EQ(auc(c, y), 0.5);
}

TEST(Metrics, R2MatchesDirectFormula) {
    Rng rng(16);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(40);
        const auto y = random_vector(rng, n, -1, 1);
        const auto p = random_vector(rng, n, -1, 1);
        EXPECT_NEAR(*r_squared(p, y), *counterpart::testing::direct_r2(p, y), 1e-12);
    }
    const std::vector<double> y{1, 2, 3};
    EXPECT_EQ(r_squared(y, y), 1.0);
    const std::vector<double> flat{2, 2, 2};
    EXPECT_EQ(r_squared(flat, y), 0.0);
    EXPECT_FALSE(r_squared(y, flat));
    const std::vector<double> one{1};
    EXPECT_FALSE(r_squared(one, one));
}

TEST(Metrics, SummaryStatistics) {
    const std::vector<double> v{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(median(v), 2.5);
    EXPECT_NEAR(sample_sd(v), std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_NEAR(standard_error(v), std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
    EXPECT_DOUBLE_EQ(population_sd(v), std::sqrt(1.25));
    Rng rng(17);
    for (int t = 0; t < 50; ++t) {
        auto x = random_vector(rng, 1 + rng.below(30), 0, 10);
        const double q = rng.uniform();
        const double ref = counterpart::testing::ref_quantile(x, q);
        std::sort(x.begin(), x.end());
        EXPECT_NEAR(quantile_sorted(x, q), ref, 1e-12);
    }
}
