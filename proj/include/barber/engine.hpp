#pragma once

#include <optional>
#include <span>
#include <vector>

#include "barber/mask.hpp"
#include "barber/model.hpp"
#include "barber/rebuild_pair.hpp"

namespace barber {

// One-shot sparsity-mask rebuilding. Per block: compute the dense target,
// the reconstruction error of the initial mask, gradients of that error at
// the sparse point, importance scores |W| * |G| on the original dense
// weights, then swap mask bits in grow/prune pairs inside granularity
// groups. One gradient snapshot per block; no weight updates ever.

enum class Granularity { block, layer, input_channel, output_channel };

struct BarberConfig {
    // nullopt = AUTO: per block, alpha = suggest_alpha over its pair values
    std::optional<double> alpha;
    Granularity granularity = Granularity::block;
    std::optional<NmPattern> nm;
    bool report_errors = true; // compute E_i / E_r (always needed for reports)
};

struct ErrorReport {
    double e_init = 0.0;
    double e_rebuilt = 0.0;
    long pairs_applied = 0;
    long positive_pairs = 0;
    long total_pairs = 0;
    double alpha_used = 0.0;
};

// ||W X - (W (.) M) X||_2^2
double layer_error(const Matrix &w, const Matrix &mask, const Matrix &x);

// ||Block(W, X) - Block(W (.) M, X)||_2^2
double block_error(const BlockWeights &block, const BlockMask &mask, const Matrix &x);
double block_error(const BlockWeights &block, const BlockMask &mask, std::span<const Matrix> xs);

// dE/dW-hat of the layer error at the sparse point: -2 (W - W-hat) X X^T
Matrix layer_gradient(const Matrix &w, const Matrix &mask, const Matrix &x);

// S = |W| (.) |G| elementwise, dense original W
std::vector<Matrix> importance_scores(std::span<const Matrix> weights, const BlockGradients &grads);

// Grow/prune pairs per granularity group, pooled over groups and sorted by
// (value desc, grow index asc, prune index asc).
std::vector<RebuildPair> build_pairs(std::span<const Matrix> scores, std::span<const Matrix> mask,
                                     Granularity granularity);

// N = floor(count(value > 0) * alpha), clamped to the list length
long rebuild_count(const std::vector<RebuildPair> &sorted_pairs, double alpha);

// flip the first n pairs: grow index 0 -> 1, prune index 1 -> 0
void apply_rebuild(std::vector<Matrix> &mask, const std::vector<RebuildPair> &sorted_pairs, long n);

// k/P where P = positive-value pair count and k = positives beyond
// median + 3 * IQR of the positive values; 0 when no positives
double suggest_alpha(const std::vector<double> &pair_values);

struct BlockBarberResult {
    BlockMask mask;
    ErrorReport report;
    std::vector<RebuildPair> pairs; // all candidates, sorted by value desc
};

BlockBarberResult barber_block(const BlockWeights &block, const BlockMask &mask_init,
                               std::span<const Matrix> xs, const BarberConfig &config);

// N:M-preserving rebuild; config.nm must be set and mask_init N:M-valid
BlockBarberResult nm_rebuild(const BlockWeights &block, const BlockMask &mask_init,
                             std::span<const Matrix> xs, const BarberConfig &config);

// degenerate single-linear-layer variant (E = layer error)
struct LayerBarberResult {
    Matrix mask;
    ErrorReport report;
    std::vector<RebuildPair> pairs;
};

LayerBarberResult barber_layer(const Matrix &w, const Matrix &mask_init, const Matrix &x,
                               const BarberConfig &config);

struct ModelBarberResult {
    ModelMasks masks;
    std::vector<ErrorReport> reports;
    std::vector<std::vector<RebuildPair>> pairs; // per block
};

// Sequential whole-model pass: block b sees activations propagated through
// the rebuilt sparse weights of blocks 0..b-1, and its dense target is
// computed from that same input.
ModelBarberResult barber_model(const TinyModel &model, const ModelMasks &masks_init,
                               const std::vector<TokenSequence> &calib, const BarberConfig &config);

// Block errors of a fixed mask under the same sequential sparse propagation
// (what `barber_model` with alpha = 0 would report as E_i per block).
std::vector<double> model_block_errors(const TinyModel &model, const ModelMasks &masks,
                                       const std::vector<TokenSequence> &calib);

} // namespace barber
