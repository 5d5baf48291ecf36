#include "barber/mask_init.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace barber {

namespace {

void check_sparsity(double sparsity) {
    if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
        throw input_error("sparsity must lie in [0, 1], got " + std::to_string(sparsity));
    }
}

long floor_count(double fraction, long group_size) {
    // guard against binary-representation artifacts like 0.3 * 10 = 2.999...
    return static_cast<long>(std::floor(fraction * static_cast<double>(group_size) + 1e-12));
}

// Zero out the `zeros` lowest-scoring entries among `group` (flat indices).
// Ties: the ascending index wins the keep slot, so among equals the higher
// index is masked first.
void mask_lowest(Matrix &mask, const Matrix &scores, std::vector<int> group, long zeros) {
    std::sort(group.begin(), group.end(), [&scores](int a, int b) {
        const double sa = scores.data[static_cast<std::size_t>(a)];
        const double sb = scores.data[static_cast<std::size_t>(b)];
        if (sa != sb) {
            return sa < sb;
        }
        return a > b;
    });
    for (long i = 0; i < zeros && i < static_cast<long>(group.size()); ++i) {
        mask.data[static_cast<std::size_t>(group[static_cast<std::size_t>(i)])] = 0.0;
    }
}

Matrix mask_per_output_row(const Matrix &scores, double sparsity) {
    Matrix mask(scores.rows, scores.cols);
    for (double &v : mask.data) {
        v = 1.0;
    }
    const long zeros = floor_count(sparsity, scores.cols);
    for (int r = 0; r < scores.rows; ++r) {
        std::vector<int> group(static_cast<std::size_t>(scores.cols));
        std::iota(group.begin(), group.end(), r * scores.cols);
        mask_lowest(mask, scores, std::move(group), zeros);
    }
    return mask;
}

// Diagonal of H^-1 via Cholesky: [H^-1]_jj = ||L^-1 e_j||^2.
std::vector<double> spd_inverse_diagonal(const Matrix &h) {
    const int n = h.rows;
    Matrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double d = h.at(j, j);
        for (int k = 0; k < j; ++k) {
            d -= l.at(j, k) * l.at(j, k);
        }
        if (!(d > 0.0)) {
            throw numeric_error("OBS Hessian factorization failed (pivot " + std::to_string(j) +
                                " not positive); raise the damping");
        }
        l.at(j, j) = std::sqrt(d);
        for (int i = j + 1; i < n; ++i) {
            double s = h.at(i, j);
            for (int k = 0; k < j; ++k) {
                s -= l.at(i, k) * l.at(j, k);
            }
            l.at(i, j) = s / l.at(j, j);
        }
    }
    std::vector<double> diag(static_cast<std::size_t>(n), 0.0);
    std::vector<double> y(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
        // forward solve L y = e_j; rows above j give y = 0
        double acc = 0.0;
        for (int i = j; i < n; ++i) {
            double s = (i == j) ? 1.0 : 0.0;
            for (int k = j; k < i; ++k) {
                s -= l.at(i, k) * y[static_cast<std::size_t>(k)];
            }
            y[static_cast<std::size_t>(i)] = s / l.at(i, i);
            acc += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
        }
        diag[static_cast<std::size_t>(j)] = acc;
    }
    return diag;
}

} // namespace

Matrix magnitude_scores(const Matrix &w) {
    Matrix s(w.rows, w.cols);
    for (std::size_t i = 0; i < w.size(); ++i) {
        s.data[i] = std::fabs(w.data[i]);
    }
    return s;
}

Matrix wanda_scores(const Matrix &w, const Matrix &calib_x) {
    if (calib_x.rows != w.cols) {
        throw shape_error("wanda: activation rows (" + std::to_string(calib_x.rows) +
                          ") must equal layer input dimension (" + std::to_string(w.cols) + ")");
    }
    const std::vector<double> norms = row_l2_norms(calib_x);
    Matrix s(w.rows, w.cols);
    for (int r = 0; r < w.rows; ++r) {
        for (int c = 0; c < w.cols; ++c) {
            s.at(r, c) = std::fabs(w.at(r, c)) * norms[static_cast<std::size_t>(c)];
        }
    }
    return s;
}

Matrix obs_scores(const Matrix &w, const Matrix &calib_x, double damping) {
    if (calib_x.rows != w.cols) {
        throw shape_error("obs: activation rows (" + std::to_string(calib_x.rows) +
                          ") must equal layer input dimension (" + std::to_string(w.cols) + ")");
    }
    if (!(damping > 0.0)) {
        throw input_error("obs: damping must be positive");
    }
    Matrix h = matmul(calib_x, transpose(calib_x));
    double trace = 0.0;
    for (int i = 0; i < h.rows; ++i) {
        trace += h.at(i, i);
    }
    const double ridge = damping * trace / static_cast<double>(h.rows);
    for (int i = 0; i < h.rows; ++i) {
        h.at(i, i) += ridge;
    }
    const std::vector<double> inv_diag = spd_inverse_diagonal(h);
    Matrix s(w.rows, w.cols);
    for (int r = 0; r < w.rows; ++r) {
        for (int c = 0; c < w.cols; ++c) {
            s.at(r, c) = w.at(r, c) * w.at(r, c) / inv_diag[static_cast<std::size_t>(c)];
        }
    }
    return s;
}

Matrix magnitude_mask(const Matrix &w, double sparsity, MagnitudeScope scope) {
    check_sparsity(sparsity);
    const Matrix scores = magnitude_scores(w);
    if (scope == MagnitudeScope::output_row) {
        return mask_per_output_row(scores, sparsity);
    }
    Matrix mask = ones_like(w);
    std::vector<int> group(w.size());
    std::iota(group.begin(), group.end(), 0);
    mask_lowest(mask, scores, std::move(group), floor_count(sparsity, static_cast<long>(w.size())));
    return mask;
}

Matrix wanda_mask(const Matrix &w, const Matrix &calib_x, double sparsity) {
    check_sparsity(sparsity);
    return mask_per_output_row(wanda_scores(w, calib_x), sparsity);
}

Matrix obs_mask(const Matrix &w, const Matrix &calib_x, double sparsity, double damping) {
    check_sparsity(sparsity);
    return mask_per_output_row(obs_scores(w, calib_x, damping), sparsity);
}

Matrix to_nm(const Matrix &scores, const NmPattern &pattern) {
    validate_nm_pattern(pattern);
    if (scores.cols % pattern.m != 0) {
        throw input_error("N:M: input dimension " + std::to_string(scores.cols) +
                          " not divisible by " + std::to_string(pattern.m));
    }
    Matrix mask(scores.rows, scores.cols); // zeros
    for (int r = 0; r < scores.rows; ++r) {
        for (int g = 0; g < scores.cols / pattern.m; ++g) {
            std::vector<int> group(static_cast<std::size_t>(pattern.m));
            std::iota(group.begin(), group.end(), r * scores.cols + g * pattern.m);
            // keep the top n: sort by (score desc, index asc) and flip the head
            std::sort(group.begin(), group.end(), [&scores](int a, int b) {
                const double sa = scores.data[static_cast<std::size_t>(a)];
                const double sb = scores.data[static_cast<std::size_t>(b)];
                if (sa != sb) {
                    return sa > sb;
                }
                return a < b;
            });
            for (int i = 0; i < pattern.n; ++i) {
                mask.data[static_cast<std::size_t>(group[static_cast<std::size_t>(i)])] = 1.0;
            }
        }
    }
    return mask;
}

ModelMasks init_masks(const TinyModel &model,
                      const std::vector<std::vector<Matrix>> *layer_inputs,
                      const InitOptions &options) {
    if (options.method != InitMethod::magnitude && layer_inputs == nullptr) {
        throw input_error("calibration activations are required for wanda/obs initialization");
    }
    if (layer_inputs != nullptr && layer_inputs->size() != model.blocks.size()) {
        throw shape_error("init_masks: layer inputs must cover every block");
    }
    if (options.nm) {
        validate_nm_pattern(*options.nm);
    } else {
        check_sparsity(options.sparsity);
    }

    ModelMasks masks;
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        const BlockWeights &block = model.blocks[b];
        BlockMask bm;
        for (int l = 0; l < block_layer_count(block); ++l) {
            const Matrix &w = block_layer(block, l);
            const Matrix *x = layer_inputs != nullptr ? &(*layer_inputs)[b][static_cast<std::size_t>(l)]
                                                      : nullptr;
            Matrix scores;
            switch (options.method) {
                case InitMethod::magnitude: scores = magnitude_scores(w); break;
                case InitMethod::wanda: scores = wanda_scores(w, *x); break;
                case InitMethod::obs: scores = obs_scores(w, *x, options.obs_damping); break;
            }
            if (options.nm) {
                bm.push_back(to_nm(scores, *options.nm));
            } else if (options.method == InitMethod::magnitude &&
                       options.magnitude_scope == MagnitudeScope::layer) {
                Matrix mask = ones_like(w);
                std::vector<int> group(w.size());
                std::iota(group.begin(), group.end(), 0);
                mask_lowest(mask, scores, std::move(group),
                            floor_count(options.sparsity, static_cast<long>(w.size())));
                bm.push_back(std::move(mask));
            } else {
                bm.push_back(mask_per_output_row(scores, options.sparsity));
            }
        }
        masks.blocks.push_back(std::move(bm));
    }
    return masks;
}

} // namespace barber
