#pragma once

// Predictors behind one call: fit on a training set, score a test matrix.
// The builtin is a distance-weighted k-nearest-neighbour model that ignores
// missing cells. An external predictor speaks the predictor wire protocol:
//
//   -> {"type":"fit_predict","task":"clf"|"reg","train_X":[[...]],"train_y":[...],"test_X":[[...]]}
//   <- {"pred":[...]}
//
// NaN cells travel as null.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "counterpart/errors.hpp"
#include "counterpart/line_channel.hpp"
#include "counterpart/metrics.hpp"
#include "counterpart/rng.hpp"
#include "counterpart/table.hpp"

namespace counterpart {

enum class TaskKind { Classification, Regression };

struct TrainSet {
    Matrix X;
    std::vector<double> y;
    TaskKind task = TaskKind::Classification;
};

struct KnnParams {
    std::size_t k = 25;
    double epsilon = 1e-9;
};

/// Per-column spread: IQR, else standard deviation, else 1. Missing cells are skipped.
inline std::vector<double> robust_scales(const Matrix& X) {
    std::vector<double> scales(X.cols(), 1.0);
    std::vector<double> col;
    for (std::size_t j = 0; j < X.cols(); ++j) {
        col.clear();
        for (std::size_t i = 0; i < X.rows(); ++i)
            if (std::isfinite(X(i, j))) col.push_back(X(i, j));
        if (col.empty()) continue;
        std::sort(col.begin(), col.end());
        const double iqr = quantile_sorted(col, 0.75) - quantile_sorted(col, 0.25);
        if (iqr > 0) {
            scales[j] = iqr;
            continue;
        }
        const double sd = sample_sd(col);
        if (sd > 0) scales[j] = sd;
    }
    return scales;
}

/// Mean normalized squared difference over columns present in both rows; +inf if none are.
inline double knn_distance(std::span<const double> a, std::span<const double> b, std::span<const double> scales) {
    double sum = 0.0;
    std::size_t m = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (!std::isfinite(a[j]) || !std::isfinite(b[j])) continue;
        const double z = (a[j] - b[j]) / scales[j];
        sum += z * z;
        ++m;
    }
    return m ? sum / static_cast<double>(m) : std::numeric_limits<double>::infinity();
}

/// Content hash of a training row and its label, used to order distance ties.
inline std::uint64_t training_row_hash(std::span<const double> row, double y) {
    StableHasher h;
    for (double x : row) h.add(x);
    h.add(y);
    return h.value();
}

/// Classification scores are the weighted share of positive neighbours;
/// regression outputs the weighted mean label. k is capped at the training size.
inline std::vector<double> knn_predict(const TrainSet& train, const Matrix& test, KnnParams params = {},
                                       std::vector<std::string>* warnings = nullptr) {
    const std::size_t n = train.X.rows();
    if (n == 0) throw PredictorError("empty training set");
    if (train.y.size() != n) throw PredictorError("label count does not match training rows");
    if (test.rows() > 0 && test.cols() != train.X.cols()) throw PredictorError("test width does not match training width");
    std::size_t k = params.k;
    if (k == 0) throw PredictorError("k must be positive");
    if (k > n) {
        if (warnings) warnings->push_back("knn: k=" + std::to_string(k) + " exceeds " + std::to_string(n) + " training rows; using k=" + std::to_string(n));
        k = n;
    }
    const auto scales = robust_scales(train.X);
    std::vector<std::uint64_t> hashes(n);
    for (std::size_t i = 0; i < n; ++i) hashes[i] = training_row_hash(train.X.row(i), train.y[i]);

    std::vector<double> out(test.rows());
    std::vector<double> dist(n);
    std::vector<std::size_t> idx(n);
    for (std::size_t t = 0; t < test.rows(); ++t) {
        const auto row = test.row(t);
        for (std::size_t i = 0; i < n; ++i) dist[i] = knn_distance(row, train.X.row(i), scales);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        auto closer = [&](std::size_t a, std::size_t b) {
            if (dist[a] != dist[b]) return dist[a] < dist[b];
            if (hashes[a] != hashes[b]) return hashes[a] < hashes[b];
            return a < b;
        };
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), closer);
        double wsum = 0.0, acc = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double d = dist[idx[i]];
            const double w = std::isfinite(d) ? 1.0 / (d + params.epsilon) : 0.0;
            wsum += w;
            acc += w * train.y[idx[i]];
        }
        if (wsum == 0.0) {
            for (std::size_t i = 0; i < k; ++i) acc += train.y[idx[i]];
            wsum = static_cast<double>(k);
        }
        out[t] = acc / wsum;
    }
    return out;
}

struct PredictorEndpoint {
    enum class Kind { BuiltinKnn, External };

    Kind kind = Kind::BuiltinKnn;
    KnnParams knn;
    std::optional<Endpoint> endpoint;

    static PredictorEndpoint builtin(KnnParams p = {}) { return {Kind::BuiltinKnn, p, std::nullopt}; }
    static PredictorEndpoint external(Endpoint e) { return {Kind::External, {}, std::move(e)}; }

    /// "knn", "knn:<k>" or an endpoint string.
    static PredictorEndpoint parse(std::string_view text) {
        if (text == "knn") return builtin();
        if (text.starts_with("knn:")) {
            try {
                return builtin({static_cast<std::size_t>(std::stoul(std::string(text.substr(4))))});
            } catch (const std::exception&) {
                throw ConfigError("predictor: bad k in '" + std::string(text) + "'");
            }
        }
        return external(Endpoint::parse(text));
    }

    std::string describe() const { return kind == Kind::BuiltinKnn ? "knn:" + std::to_string(knn.k) : endpoint->describe(); }
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (double x : m.row(i)) r.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace detail

/// One fresh connection per call; the peer keeps no state between calls.
inline std::vector<double> external_predict(const Endpoint& endpoint, const TrainSet& train, const Matrix& test) {
    const nlohmann::json request{{"type", "fit_predict"},
                                 {"task", train.task == TaskKind::Classification ? "clf" : "reg"},
                                 {"train_X", detail::matrix_to_json(train.X)},
                                 {"train_y", train.y},
                                 {"test_X", detail::matrix_to_json(test)}};
    nlohmann::json reply;
    try {
        LineChannel channel(endpoint);
        reply = channel.request(request);
    } catch (const Error& e) {
        throw PredictorError(std::string("predictor failed: ") + e.what());
    }
    const auto it = reply.find("pred");
    if (it == reply.end() || !it->is_array()) throw PredictorError("predictor reply lacks 'pred'");
    if (it->size() != test.rows())
        throw PredictorError("predictor returned " + std::to_string(it->size()) + " predictions for " + std::to_string(test.rows()) + " rows");
    std::vector<double> out;
    out.reserve(it->size());
    for (const auto& x : *it) {
        if (!x.is_number() || !std::isfinite(x.get<double>())) throw PredictorError("predictor returned a non-finite prediction");
        out.push_back(x.get<double>());
    }
    return out;
}

inline std::vector<double> predict(const PredictorEndpoint& p, const TrainSet& train, const Matrix& test,
                                   std::vector<std::string>* warnings = nullptr) {
    if (p.kind == PredictorEndpoint::Kind::BuiltinKnn) return knn_predict(train, test, p.knn, warnings);
    return external_predict(*p.endpoint, train, test);
}

}  // namespace counterpart
