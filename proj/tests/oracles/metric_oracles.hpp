#pragma once

// Brute-force references for metrics and the nearest-neighbour predictor.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace counterpart::testing {

/// Fraction of (positive, negative) pairs ranked correctly; ties count half.
inline std::optional<double> pairwise_auc(const std::vector<double>& s, const std::vector<double>& y) {
    double good = 0;
    long pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (!(y[i] == 1 && y[j] == 0)) continue;
            ++pairs;
            if (s[i] > s[j]) good += 1;
            else if (s[i] == s[j]) good += 0.5;
        }
    if (pairs == 0) return std::nullopt;
    return good / double(pairs);
}

/// 1 - SS_res / SS_tot, written out term by term.
inline std::optional<double> direct_r2(const std::vector<double>& pred, const std::vector<double>& y) {
    double ybar = 0;
    for (double v : y) ybar += v;
    ybar /= double(y.size());
    double res = 0, tot = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        res += (y[i] - pred[i]) * (y[i] - pred[i]);
        tot += (y[i] - ybar) * (y[i] - ybar);
    }
    if (tot == 0) return std::nullopt;
    return 1 - res / tot;
}

/// Linear-interpolated quantile of an unsorted sample.
inline double ref_quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

/// Straightforward kNN over row vectors: full sort of distances, ties by index.
/// Rows with distinct distances only (tie order is not modelled).
inline double brute_knn(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                        const std::vector<double>& q, std::size_t k) {
    const std::size_t d = q.size();
    std::vector<double> scale(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> col;
        for (const auto& r : X)
            if (std::isfinite(r[j])) col.push_back(r[j]);
        if (col.empty()) continue;
        const double iqr = ref_quantile(col, 0.75) - ref_quantile(col, 0.25);
        if (iqr > 0) {
            scale[j] = iqr;
            continue;
        }
        if (col.size() > 1) {
            const double mu = std::accumulate(col.begin(), col.end(), 0.0) / double(col.size());
            double ss = 0;
            for (double v : col) ss += (v - mu) * (v - mu);
            const double sd = std::sqrt(ss / double(col.size() - 1));
            if (sd > 0) scale[j] = sd;
        }
    }
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < X.size(); ++i) {
        double s = 0;
        int m = 0;
        for (std::size_t j = 0; j < d; ++j) {
            if (!std::isfinite(X[i][j]) || !std::isfinite(q[j])) continue;
            const double z = (X[i][j] - q[j]) / scale[j];
            s += z * z;
            ++m;
        }
        dist.emplace_back(m ? s / m : std::numeric_limits<double>::infinity(), i);
    }
    std::sort(dist.begin(), dist.end());
    k = std::min(k, X.size());
    double num = 0, den = 0;
    for (std::size_t t = 0; t < k; ++t) {
        const double w = std::isfinite(dist[t].first) ? 1.0 / (dist[t].first + 1e-9) : 0.0;
        num += w * y[dist[t].second];
        den += w;
    }
    if (den == 0) {
        for (std::size_t t = 0; t < k; ++t) num += y[dist[t].second];
        den = double(k);
    }
    return num / den;
}

}  // namespace counterpart::testing
