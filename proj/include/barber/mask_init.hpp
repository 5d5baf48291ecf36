#pragma once

#include <optional>

#include "barber/mask.hpp"
#include "barber/model.hpp"

namespace barber {

// Baseline mask initializers. All selection is deterministic: on score ties
// the ascending (row, col) index wins the keep slot.

enum class MagnitudeScope { layer, output_row };

// |W| scores; mask the floor(sparsity * group size) smallest per scope group
Matrix magnitude_mask(const Matrix &w, double sparsity, MagnitudeScope scope);

// score_ij = |W_ij| * ||X_j||_2, compared per output row
Matrix wanda_mask(const Matrix &w, const Matrix &calib_x, double sparsity);

// OBS-style second-order scores: H = X X^T + damping * mean(diag(X X^T)) * I,
// score_ij = W_ij^2 / [H^-1]_jj, compared per output row. Mask selection
// only; no weight update.
Matrix obs_mask(const Matrix &w, const Matrix &calib_x, double sparsity, double damping);

// keep the n highest-scoring entries of every m-group along the input axis
Matrix to_nm(const Matrix &scores, const NmPattern &pattern);

// score builders (shared by the N:M variants and tests)
Matrix magnitude_scores(const Matrix &w);
Matrix wanda_scores(const Matrix &w, const Matrix &calib_x);
Matrix obs_scores(const Matrix &w, const Matrix &calib_x, double damping);

inline constexpr double kDefaultObsDamping = 0.01;

enum class InitMethod { magnitude, wanda, obs };

struct InitOptions {
    InitMethod method = InitMethod::magnitude;
    double sparsity = 0.5;
    std::optional<NmPattern> nm;
    MagnitudeScope magnitude_scope = MagnitudeScope::layer;
    double obs_damping = kDefaultObsDamping;
};

// Whole-model initialization. layer_inputs (from collect_layer_inputs on the
// dense model) is required for wanda and obs; magnitude ignores it.
ModelMasks init_masks(const TinyModel &model,
                      const std::vector<std::vector<Matrix>> *layer_inputs,
                      const InitOptions &options);

} // namespace barber
