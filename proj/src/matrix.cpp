#include "barber/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace barber {

Matrix matmul(const Matrix &a, const Matrix &b) {
    if (a.cols != b.rows) {
        throw shape_error("matmul: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                          " times " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) { // fixed ascending-k order
                acc += a.at(i, k) * b.at(k, j);
            }
            out.at(i, j) = acc;
        }
    }
    return out;
}

double frobenius_sq(const Matrix &a) {
    double acc = 0.0;
    for (double v : a.data) {
        acc += v * v;
    }
    return acc;
}

std::vector<double> row_l2_norms(const Matrix &x) {
    std::vector<double> norms(static_cast<std::size_t>(x.rows), 0.0);
    for (int r = 0; r < x.rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < x.cols; ++c) {
            const double v = x.at(r, c);
            acc += v * v;
        }
        norms[static_cast<std::size_t>(r)] = std::sqrt(acc);
    }
    return norms;
}

Matrix transpose(const Matrix &a) {
    Matrix out(a.cols, a.rows);
    for (int r = 0; r < a.rows; ++r) {
        for (int c = 0; c < a.cols; ++c) {
            out.at(c, r) = a.at(r, c);
        }
    }
    return out;
}

Matrix softmax_rows(const Matrix &a) {
    Matrix out(a.rows, a.cols);
    for (int r = 0; r < a.rows; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < a.cols; ++c) {
            mx = std::max(mx, a.at(r, c));
        }
        double sum = 0.0;
        for (int c = 0; c < a.cols; ++c) {
            const double e = std::exp(a.at(r, c) - mx);
            out.at(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < a.cols; ++c) {
            out.at(r, c) /= sum;
        }
    }
    return out;
}

Matrix silu(const Matrix &a) {
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a.data[i];
        out.data[i] = x / (1.0 + std::exp(-x));
    }
    return out;
}

Matrix gelu(const Matrix &a) {
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a.data[i];
        out.data[i] = 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244));
    }
    return out;
}

Matrix rmsnorm_rows(const Matrix &a, const std::vector<double> &gain) {
    if (static_cast<int>(gain.size()) != a.cols) {
        throw shape_error("rmsnorm_rows: gain length " + std::to_string(gain.size()) +
                          " vs " + std::to_string(a.cols) + " columns");
    }
    Matrix out(a.rows, a.cols);
    for (int r = 0; r < a.rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < a.cols; ++c) {
            const double v = a.at(r, c);
            acc += v * v;
        }
        const double inv = 1.0 / std::sqrt(acc / static_cast<double>(a.cols) + kRmsEps);
        for (int c = 0; c < a.cols; ++c) {
            out.at(r, c) = a.at(r, c) * inv * gain[static_cast<std::size_t>(c)];
        }
    }
    return out;
}

static void require_same_shape(const Matrix &a, const Matrix &b, const char *op) {
    if (!a.same_shape(b)) {
        throw shape_error(std::string(op) + ": shape mismatch");
    }
}

Matrix hadamard(const Matrix &a, const Matrix &b) {
    require_same_shape(a, b, "hadamard");
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.data[i] = a.data[i] * b.data[i];
    }
    return out;
}

Matrix add(const Matrix &a, const Matrix &b) {
    require_same_shape(a, b, "add");
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.data[i] = a.data[i] + b.data[i];
    }
    return out;
}

Matrix sub(const Matrix &a, const Matrix &b) {
    require_same_shape(a, b, "sub");
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.data[i] = a.data[i] - b.data[i];
    }
    return out;
}

Matrix scale(const Matrix &a, double s) {
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.data[i] = a.data[i] * s;
    }
    return out;
}

bool all_finite(const Matrix &a) {
    for (double v : a.data) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

} // namespace barber
