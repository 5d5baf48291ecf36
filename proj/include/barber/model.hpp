#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "barber/matrix.hpp"

namespace barber {

// Tiny pre-norm transformer: embedding -> alternating attention/MLP blocks
// with residual connections -> final RMS norm -> output head. Activations at
// public boundaries use the channels-as-rows layout: x is (d_model x tokens).
// Only the linear projection weights inside blocks are ever masked; norm
// gains, the embedding and the head are left dense.

enum class Activation : std::uint8_t { silu = 0, gelu = 1 };

struct AttentionBlockWeights {
    Matrix w_q, w_k, w_v, w_o;       // each d_model x d_model
    std::vector<double> norm_gain;   // d_model
    int n_heads = 1;
};

struct MlpBlockWeights {
    Matrix w_up;                     // d_ff x d_model
    Matrix w_down;                   // d_model x d_ff
    std::vector<double> norm_gain;   // d_model
    Activation activation = Activation::silu;
};

using BlockWeights = std::variant<AttentionBlockWeights, MlpBlockWeights>;

// One binary matrix per linear layer of a block, in layer order
// (attention: w_q, w_k, w_v, w_o; mlp: w_up, w_down).
using BlockMask = std::vector<Matrix>;

struct BlockGradients {
    std::vector<Matrix> layers; // same order and shapes as the block's weights
};

struct TinyModel {
    int vocab_size = 0;
    int d_model = 0;
    int d_ff = 0;
    int n_heads = 0;
    Activation activation = Activation::silu;
    Matrix embedding;                 // vocab_size x d_model
    std::vector<BlockWeights> blocks; // attention, mlp, attention, mlp, ...
    std::vector<double> final_gain;   // d_model
    Matrix head;                      // vocab_size x d_model

    int n_block_pairs() const { return static_cast<int>(blocks.size()) / 2; }
};

using TokenSequence = std::vector<int>;

// layer bookkeeping
int block_layer_count(const BlockWeights &block);
const Matrix &block_layer(const BlockWeights &block, int idx);
Matrix &block_layer_mut(BlockWeights &block, int idx);
std::string block_layer_name(const BlockWeights &block, int idx);
std::string block_kind_name(const BlockWeights &block);

void validate_block(const BlockWeights &block, int d_model);
void validate_block_mask_shapes(const BlockWeights &block, const BlockMask &mask);
void validate_model(const TinyModel &model);

// Block(W (.) M, X); mask == nullptr means dense. x is (d_model x tokens),
// the result has the same shape.
Matrix block_forward(const BlockWeights &block, const BlockMask *mask, const Matrix &x);

// Gradients of E = ||target - Block(W (.) M, x)||_2^2 with respect to each
// entry of the effective weights W (.) M taken as free variables, so pruned
// entries (currently 0) get the sensitivity of E to reactivating them.
BlockGradients block_backward(const BlockWeights &block, const BlockMask &mask,
                              const Matrix &x, const Matrix &target);

// Multi-sequence variant: sums gradients over (x, target) pairs.
BlockGradients block_backward(const BlockWeights &block, const BlockMask &mask,
                              std::span<const Matrix> xs, std::span<const Matrix> targets);

void accumulate_gradients(BlockGradients &into, const BlockGradients &from);

// Per-block masks for a whole model; blocks[b] aligns with model.blocks[b].
struct ModelMasks {
    std::vector<BlockMask> blocks;
};

// (d_model x tokens) embedding of a token sequence
Matrix embed_tokens(const TinyModel &model, const TokenSequence &tokens);

// logits as (vocab_size x tokens); masks == nullptr means dense
Matrix model_forward(const TinyModel &model, const TokenSequence &tokens, const ModelMasks *masks);

// exp of mean next-token cross-entropy over all predicted positions
double perplexity(const TinyModel &model, const ModelMasks *masks,
                  const std::vector<TokenSequence> &corpus);

// Input activation of every linear layer, pooled column-wise over the corpus:
// result[b][l] is (C_in of layer l x total tokens). Used by the calibrated
// mask initializers.
std::vector<std::vector<Matrix>> collect_layer_inputs(const TinyModel &model, const ModelMasks *masks,
                                                      const std::vector<TokenSequence> &corpus);

TinyModel make_random_model(std::uint64_t seed, int vocab_size, int d_model, int d_ff,
                            int n_heads, int n_block_pairs, Activation activation);

} // namespace barber
