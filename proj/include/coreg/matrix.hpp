#pragma once

#include <cstddef>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace coreg {

/// Dense row-major matrix of doubles. Just enough surface for the dynamic
/// programming tables used here; not a linear-algebra type.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    const std::vector<double>& data() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Writes the matrix as CSV, row-major, 9 significant digits. Deterministic:
/// same matrix, same bytes.
inline void write_csv(const Matrix& m, std::ostream& out) {
    char buf[40];
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.9g", m(r, c));
            if (c) out << ',';
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace coreg
