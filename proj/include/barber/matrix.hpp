#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "barber/errors.hpp"

namespace barber {

// Dense row-major matrix of doubles. All kernels below run in reference mode:
// fixed summation order (ascending inner index), single-threaded, so results
// are bit-reproducible run to run.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data; // rows * cols, row-major

    Matrix() = default;

    Matrix(int r, int c) : rows(r), cols(c) {
        if (r < 0 || c < 0) {
            throw shape_error("matrix: negative dimension");
        }
        data.assign(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0);
    }

    Matrix(int r, int c, std::initializer_list<double> values) : Matrix(r, c) {
        if (values.size() != data.size()) {
            throw shape_error("matrix: initializer size does not match rows*cols");
        }
        std::size_t i = 0;
        for (double v : values) {
            data[i++] = v;
        }
    }

    double &at(int r, int c) {
        return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)];
    }

    double at(int r, int c) const {
        return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)];
    }

    std::size_t size() const { return data.size(); }

    bool same_shape(const Matrix &o) const { return rows == o.rows && cols == o.cols; }

    bool operator==(const Matrix &o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }
};

// a (m x k) times b (k x n); throws shape_error on inner-dimension mismatch
Matrix matmul(const Matrix &a, const Matrix &b);

// sum of squared entries
double frobenius_sq(const Matrix &a);

// l2 norm of each row
std::vector<double> row_l2_norms(const Matrix &x);

Matrix transpose(const Matrix &a);

// row-wise softmax with max subtraction; each output row sums to 1
Matrix softmax_rows(const Matrix &a);

Matrix silu(const Matrix &a);
Matrix gelu(const Matrix &a); // exact erf form

// per-row RMS normalization; gain has one entry per column
Matrix rmsnorm_rows(const Matrix &a, const std::vector<double> &gain);

Matrix hadamard(const Matrix &a, const Matrix &b);
Matrix add(const Matrix &a, const Matrix &b);
Matrix sub(const Matrix &a, const Matrix &b);
Matrix scale(const Matrix &a, double s);

bool all_finite(const Matrix &a);

inline constexpr double kRmsEps = 1e-6;

} // namespace barber
