#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "counterpart/table.hpp"

namespace counterpart {

/// Centered linear projection onto the leading principal directions.
struct PcaModel {
    std::vector<double> mean;
    Eigen::MatrixXd components;  // output_dim x input_dim; rows past rank are zero
    std::size_t rank = 0;

    std::size_t input_dim() const { return mean.size(); }
    std::size_t output_dim() const { return static_cast<std::size_t>(components.rows()); }
};

/// Fits on `rows` only. If the data has fewer than `dims` independent
/// directions the missing outputs are zero columns and a warning is added.
/// Each component's largest-magnitude loading is made positive.
inline PcaModel fit_pca(const Matrix& rows, std::size_t dims, std::vector<std::string>* warnings = nullptr) {
    const auto n = static_cast<Eigen::Index>(rows.rows());
    const auto d = static_cast<Eigen::Index>(rows.cols());
    PcaModel m;
    m.mean.assign(rows.cols(), 0.0);
    m.components = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims), d);
    if (n == 0) {
        if (warnings) warnings->push_back("pca: no rows to fit");
        return m;
    }
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rows(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    const Eigen::RowVectorXd mu = X.colwise().mean();
    for (Eigen::Index j = 0; j < d; ++j) m.mean[static_cast<std::size_t>(j)] = mu(j);
    X.rowwise() -= mu;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double top = sv.size() > 0 ? sv(0) : 0.0;
    const double tol = std::max(top * 1e-9, 1e-12);
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    m.rank = std::min(rank, dims);
    for (std::size_t k = 0; k < m.rank; ++k) {
        Eigen::VectorXd c = svd.matrixV().col(static_cast<Eigen::Index>(k));
        Eigen::Index arg = 0;
        c.cwiseAbs().maxCoeff(&arg);
        if (c(arg) < 0) c = -c;
        m.components.row(static_cast<Eigen::Index>(k)) = c.transpose();
    }
    if (m.rank < dims && warnings)
        warnings->push_back("pca: data has rank " + std::to_string(rank) + " < " + std::to_string(dims) + "; padding with zero columns");
    return m;
}

inline Matrix apply_pca(const PcaModel& m, const Matrix& rows) {
    Matrix out(rows.rows(), m.output_dim());
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        const auto r = rows.row(i);
        for (std::size_t k = 0; k < m.output_dim(); ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < m.input_dim(); ++j)
                s += (r[j] - m.mean[j]) * m.components(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
            out(i, k) = s;
        }
    }
    return out;
}

/// Maps projections back to input space (mean plus the spanned part).
inline Matrix reconstruct_pca(const PcaModel& m, const Matrix& projected) {
    Matrix out(projected.rows(), m.input_dim());
    for (std::size_t i = 0; i < projected.rows(); ++i)
        for (std::size_t j = 0; j < m.input_dim(); ++j) {
            double s = m.mean[j];
            for (std::size_t k = 0; k < m.output_dim(); ++k)
                s += projected(i, k) * m.components(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
            out(i, j) = s;
        }
    return out;
}

}  // namespace counterpart
