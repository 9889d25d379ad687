#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace counterpart {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Dense row-major matrix of doubles; NaN marks a missing cell.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            assert(rows[i].size() == m.cols_);
            std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    void append_row(std::span<const double> values) {
        if (rows_ == 0 && cols_ == 0) cols_ = values.size();
        assert(values.size() == cols_);
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    /// Rows picked by index, in the given order.
    Matrix select_rows(std::span<const std::size_t> idx) const {
        Matrix m(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto src = row(idx[i]);
            std::copy(src.begin(), src.end(), m.row(i).begin());
        }
        return m;
    }

    /// Side-by-side concatenation; row counts must match.
    static Matrix hcat(const std::vector<const Matrix*>& parts) {
        std::size_t rows = 0, cols = 0;
        for (const Matrix* p : parts) {
            if (p->cols() == 0) continue;
            rows = p->rows();
            cols += p->cols();
        }
        Matrix m(rows, cols);
        std::size_t off = 0;
        for (const Matrix* p : parts) {
            if (p->cols() == 0) continue;
            assert(p->rows() == rows);
            for (std::size_t r = 0; r < rows; ++r) {
                auto src = p->row(r);
                std::copy(src.begin(), src.end(), m.row(r).begin() + static_cast<std::ptrdiff_t>(off));
            }
            off += p->cols();
        }
        return m;
    }

    const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace counterpart
